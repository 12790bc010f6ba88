#include "lidarnav/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lidarnav/errors.hpp"

namespace lidarnav {

namespace {

constexpr double kWidth = 840.0, kHeight = 520.0;
constexpr double kLeft = 70.0, kRight = 30.0, kTop = 50.0, kBottom = 60.0;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// round the tick step to 1/2/5 × 10^k
double tick_step(double span) {
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  if (r < 1.5) return mag;
  if (r < 3.5) return 2.0 * mag;
  if (r < 7.5) return 5.0 * mag;
  return 10.0 * mag;
}

}  // namespace

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<CurveSeries>& series) {
  if (series.empty()) throw DataError("plot: no series to draw");
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = x_hi;
  for (const CurveSeries& s : series) {
    if (s.x.empty() || s.x.size() != s.mean.size() ||
        s.x.size() != s.min.size() || s.x.size() != s.max.size())
      throw DataError("plot: series '" + s.label + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.min[i]);
      y_hi = std::max(y_hi, s.max[i]);
    }
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto sy = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"28\" font-family=\"sans-serif\" "
         "font-size=\"17\" text-anchor=\"middle\">" << title << "</text>\n";

  // gridlines + ticks
  const double ys = tick_step(y_hi - y_lo), xs = tick_step(x_hi - x_lo);
  for (double t = std::ceil(y_lo / ys) * ys; t <= y_hi + 1e-9; t += ys) {
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(sy(t)) << "\" x2=\""
        << kLeft + pw << "\" y2=\"" << fmt(sy(t))
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt(sy(t) + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\" "
           "text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  for (double t = std::ceil(x_lo / xs) * xs; t <= x_hi + 1e-9; t += xs) {
    svg << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << kTop + ph << "\" x2=\""
        << fmt(sx(t)) << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"#444444\" stroke-width=\"1\"/>\n"
        << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << kTop + ph + 20
        << "\" font-family=\"sans-serif\" font-size=\"12\" "
           "text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }

  // min–max bands behind the mean lines
  for (const CurveSeries& s : series) {
    svg << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.18\" "
           "stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << fmt(sx(s.x[i])) << "," << fmt(sy(s.max[i])) << " ";
    for (std::size_t i = s.x.size(); i-- > 0;)
      svg << fmt(sx(s.x[i])) << "," << fmt(sy(s.min[i])) << " ";
    svg << "\"/>\n";
  }
  for (const CurveSeries& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << fmt(sx(s.x[i])) << "," << fmt(sy(s.mean[i])) << " ";
    svg << "\"/>\n";
  }

  // axes frame
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n"
      << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14
      << "\" font-family=\"sans-serif\" font-size=\"14\" "
         "text-anchor=\"middle\">" << x_label << "</text>\n"
      << "<text x=\"20\" y=\"" << kTop + ph / 2
      << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 20 " << kTop + ph / 2 << ")\">" << y_label
      << "</text>\n";

  // legend, top-left inside the frame
  double ly = kTop + 16.0;
  for (const CurveSeries& s : series) {
    svg << "<line x1=\"" << kLeft + 12 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << kLeft + 40 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color
        << "\" stroke-width=\"3\"/>\n"
        << "<text x=\"" << kLeft + 46 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"13\">" << s.label
        << "</text>\n";
    ly += 18.0;
  }
  svg << "</svg>\n";

  std::ofstream os(path);
  if (!os) throw DataError("plot: cannot open " + path);
  os << svg.str();
  if (!os) throw DataError("plot: write failed for " + path);
}

}  // namespace lidarnav
