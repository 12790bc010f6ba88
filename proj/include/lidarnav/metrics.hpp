#pragma once

#include <cstdint>
#include <vector>

namespace lidarnav {

// recon = 1 where target = 0, over same-length binary grids
std::int64_t false_positives(const std::vector<std::uint8_t>& recon,
                             const std::vector<std::uint8_t>& target);
// recon = 0 where target = 1
std::int64_t false_negatives(const std::vector<std::uint8_t>& recon,
                             const std::vector<std::uint8_t>& target);

// Σ_pixels (recon_mean − target)², recon_mean the generative model's
// probability map (or the image rasterized from mean ranges for the raw
// baseline)
double mse_expectation(const std::vector<double>& recon_mean,
                       const std::vector<std::uint8_t>& target);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double reg_incomplete_beta(double a, double b, double x);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
// freedom. Requires size >= 2 on both sides and nonzero variance in at
// least one.
WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b);

struct ReconReport {
  double fp = 0.0;   // mean false positives per scan
  double fn = 0.0;   // mean false negatives per scan
  double mse = 0.0;  // mean summed squared error per scan
  std::vector<double> per_scan_fp, per_scan_fn, per_scan_mse;

  void add_scan(double scan_fp, double scan_fn, double scan_mse);
  void finalize();  // turns accumulated sums into means
};

}  // namespace lidarnav
