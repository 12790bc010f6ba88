#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "lidarnav/errors.hpp"
#include "lidarnav/metrics.hpp"
#include "lidarnav/rng.hpp"

using namespace lidarnav;

namespace {

struct WelchCase {
  std::vector<double> a, b;
  double t, dof, p;
};

const std::vector<WelchCase> kWelchCases = {
#include "welch_cases.inc"
};

}  // namespace

TEST_CASE("fp/fn/mse against brute force on 1000 random grids") {
  Rng rng(3001);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 96));
    std::vector<std::uint8_t> recon(n), target(n);
    std::vector<double> probs(n);
    for (int i = 0; i < n; ++i) {
      recon[i] = rng.bernoulli(0.3) ? 1 : 0;
      target[i] = rng.bernoulli(0.25) ? 1 : 0;
      probs[i] = rng.uniform01();
    }
    std::int64_t fp = 0, fn = 0, hamming = 0;
    double mse = 0.0;
    for (int i = 0; i < n; ++i) {
      if (recon[i] == 1 && target[i] == 0) ++fp;
      if (recon[i] == 0 && target[i] == 1) ++fn;
      if (recon[i] != target[i]) ++hamming;
      const double d = probs[i] - target[i];
      mse += d * d;
    }
    CHECK(false_positives(recon, target) == fp);
    CHECK(false_negatives(recon, target) == fn);
    // FP + FN decomposes the Hamming distance
    CHECK(false_positives(recon, target) + false_negatives(recon, target) ==
          hamming);
    CHECK(mse_expectation(probs, target) == doctest::Approx(mse).epsilon(1e-12));
  }
}

TEST_CASE("metric edge cases and input validation") {
  const std::vector<std::uint8_t> zeros(8, 0), ones(8, 1);
  CHECK(false_positives(ones, zeros) == 8);
  CHECK(false_positives(zeros, ones) == 0);
  CHECK(false_negatives(zeros, ones) == 8);
  CHECK(false_negatives(ones, zeros) == 0);
  CHECK(false_positives(ones, ones) == 0);
  CHECK(mse_expectation(std::vector<double>(8, 1.0), ones) == 0.0);
  CHECK(mse_expectation(std::vector<double>(8, 0.5), ones) ==
        doctest::Approx(2.0));
  CHECK_THROWS_AS(false_positives(zeros, std::vector<std::uint8_t>(3, 0)),
                  DataError);
  CHECK_THROWS_AS(mse_expectation(std::vector<double>(3, 0.0), zeros),
                  DataError);
}

TEST_CASE("regularized incomplete beta identities") {
  // boundaries
  CHECK(reg_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(reg_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  // I_x(1,1) = x
  for (double x : {0.1, 0.35, 0.5, 0.92})
    CHECK(reg_incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
  // I_x(1,b) = 1 - (1-x)^b
  CHECK(reg_incomplete_beta(1.0, 4.0, 0.3) ==
        doctest::Approx(1.0 - std::pow(0.7, 4.0)).epsilon(1e-12));
  // I_x(a,1) = x^a
  CHECK(reg_incomplete_beta(3.0, 1.0, 0.6) ==
        doctest::Approx(std::pow(0.6, 3.0)).epsilon(1e-12));
  // symmetry: I_x(a,b) = 1 - I_{1-x}(b,a)
  CHECK(reg_incomplete_beta(2.5, 4.0, 0.3) ==
        doctest::Approx(1.0 - reg_incomplete_beta(4.0, 2.5, 0.7)).epsilon(1e-12));
  // I_0.5(a,a) = 0.5
  CHECK(reg_incomplete_beta(7.0, 7.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  // recurrence spot check: I_x(2,2) = 3x^2 - 2x^3
  CHECK(reg_incomplete_beta(2.0, 2.0, 0.25) ==
        doctest::Approx(3 * 0.0625 - 2 * 0.015625).epsilon(1e-12));
}

TEST_CASE("welch t-test matches the frozen reference triples") {
  REQUIRE(kWelchCases.size() == 10);
  for (std::size_t i = 0; i < kWelchCases.size(); ++i) {
    const WelchCase& c = kWelchCases[i];
    const WelchResult r = welch_t_test(c.a, c.b);
    INFO("case " << i);
    CHECK(std::abs(r.t - c.t) < 1e-6);
    CHECK(std::abs(r.dof - c.dof) < 1e-6);
    CHECK(std::abs(r.p - c.p) < 1e-6);
    // tiny p-values additionally agree in relative terms
    if (c.p < 1e-4) CHECK(std::abs(r.p - c.p) < 1e-3 * c.p);
  }
}

TEST_CASE("welch t-test basic properties") {
  // identical samples: t = 0, p = 1
  const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  const WelchResult same = welch_t_test(a, a);
  CHECK(same.t == doctest::Approx(0.0));
  CHECK(same.p == doctest::Approx(1.0));

  // antisymmetry in the sample order
  const std::vector<double> b = {2.5, 3.5, 4.5, 6.0};
  const WelchResult ab = welch_t_test(a, b);
  const WelchResult ba = welch_t_test(b, a);
  CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
  CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
  CHECK(ab.dof == doctest::Approx(ba.dof).epsilon(1e-12));

  // clearly separated samples give a tiny p
  std::vector<double> lo, hi;
  Rng rng(88);
  for (int i = 0; i < 12; ++i) {
    lo.push_back(rng.normal(0.0, 0.1));
    hi.push_back(rng.normal(10.0, 0.1));
  }
  CHECK(welch_t_test(lo, hi).p < 1e-10);

  // equal-size equal-variance case degenerates to Student dof n1+n2-2
  const std::vector<double> u = {1.0, 2.0, 3.0};
  const std::vector<double> v = {1.5, 2.5, 3.5};
  CHECK(welch_t_test(u, v).dof == doctest::Approx(4.0).epsilon(1e-12));

  // validation: need >= 2 samples per side and variance on at least one
  CHECK_THROWS_AS(welch_t_test({1.0}, a), DataError);
  CHECK_THROWS_AS(welch_t_test(a, {}), DataError);
  CHECK_THROWS_AS(welch_t_test({2.0, 2.0}, {3.0, 3.0}), DataError);
}

TEST_CASE("recon report averages per-scan values") {
  ReconReport rep;
  rep.add_scan(2.0, 1.0, 10.0);
  rep.add_scan(4.0, 3.0, 30.0);
  rep.finalize();
  CHECK(rep.fp == doctest::Approx(3.0));
  CHECK(rep.fn == doctest::Approx(2.0));
  CHECK(rep.mse == doctest::Approx(20.0));
  REQUIRE(rep.per_scan_fp.size() == 2);
  CHECK(rep.per_scan_mse[1] == 30.0);
}
