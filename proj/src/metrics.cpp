#include "lidarnav/metrics.hpp"

#include <cmath>

#include "lidarnav/errors.hpp"

namespace lidarnav {

namespace {

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw DataError("metric inputs differ in size");
}

// Continued fraction for the incomplete beta, modified Lentz iteration.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

std::int64_t false_positives(const std::vector<std::uint8_t>& recon,
                             const std::vector<std::uint8_t>& target) {
  require_same_size(recon.size(), target.size());
  std::int64_t n = 0;
  for (std::size_t i = 0; i < recon.size(); ++i)
    n += (recon[i] != 0 && target[i] == 0);
  return n;
}

std::int64_t false_negatives(const std::vector<std::uint8_t>& recon,
                             const std::vector<std::uint8_t>& target) {
  require_same_size(recon.size(), target.size());
  std::int64_t n = 0;
  for (std::size_t i = 0; i < recon.size(); ++i)
    n += (recon[i] == 0 && target[i] != 0);
  return n;
}

double mse_expectation(const std::vector<double>& recon_mean,
                       const std::vector<std::uint8_t>& target) {
  require_same_size(recon_mean.size(), target.size());
  double s = 0.0;
  for (std::size_t i = 0; i < recon_mean.size(); ++i) {
    const double d = recon_mean[i] - static_cast<double>(target[i]);
    s += d * d;
  }
  return s;
}

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  if (a.size() < 2 || b.size() < 2)
    throw DataError("welch_t_test: both samples need at least 2 values");

  double ma = 0.0, mb = 0.0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= na;
  mb /= nb;
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= na - 1.0;
  vb /= nb - 1.0;
  if (va == 0.0 && vb == 0.0)
    throw DataError("welch_t_test: both samples have zero variance");

  const double sa = va / na, sb = vb / nb;
  WelchResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.dof = (sa + sb) * (sa + sb) /
          (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  // two-sided p from the t distribution: I_{ν/(ν+t²)}(ν/2, 1/2)
  r.p = reg_incomplete_beta(0.5 * r.dof, 0.5,
                            r.dof / (r.dof + r.t * r.t));
  return r;
}

void ReconReport::add_scan(double scan_fp, double scan_fn, double scan_mse) {
  per_scan_fp.push_back(scan_fp);
  per_scan_fn.push_back(scan_fn);
  per_scan_mse.push_back(scan_mse);
  fp += scan_fp;
  fn += scan_fn;
  mse += scan_mse;
}

void ReconReport::finalize() {
  const double n = static_cast<double>(per_scan_mse.size());
  if (n > 0) {
    fp /= n;
    fn /= n;
    mse /= n;
  }
}

}  // namespace lidarnav
