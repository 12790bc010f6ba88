#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lidarnav/errors.hpp"
#include "lidarnav/nn.hpp"
#include "lidarnav/rng.hpp"
#include "lidarnav/tensor.hpp"

using namespace lidarnav;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double weighted_sum(const Tensor& y, const Tensor& w) {
  double s = 0.0;
  for (std::int64_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

// Max-normalized infinity-norm error between analytic and central-difference
// gradients of L(x) = sum_i w_i * layer(x)_i.
struct FdReport {
  double input = 0.0;
  double params = 0.0;
};

FdReport fd_check(Layer& layer, const Tensor& x0, bool train, Rng& rng,
                  bool check_params = true, double h = 1e-6) {
  Tensor y0 = layer.forward(x0, train);
  Tensor w = random_tensor(y0.shape(), rng);

  std::vector<Param*> params;
  layer.collect_params(params);
  for (Param* p : params) p->grad.fill(0.0);
  const Tensor dx = layer.backward(w);
  REQUIRE(dx.same_shape(x0));

  const auto loss = [&](const Tensor& xx) {
    return weighted_sum(layer.forward(xx, train), w);
  };

  FdReport rep;
  double scale_in = 0.0, diff_in = 0.0;
  for (std::int64_t i = 0; i < x0.size(); ++i) {
    Tensor xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (loss(xp) - loss(xm)) / (2.0 * h);
    scale_in = std::max({scale_in, std::abs(fd), std::abs(dx[i])});
    diff_in = std::max(diff_in, std::abs(fd - dx[i]));
  }
  rep.input = diff_in / std::max(scale_in, 1e-8);

  if (check_params) {
    double scale_p = 0.0, diff_p = 0.0;
    for (Param* p : params) {
      if (!p->trainable) continue;
      for (std::int64_t i = 0; i < p->value.size(); ++i) {
        const double orig = p->value[i];
        p->value[i] = orig + h;
        const double lp = loss(x0);
        p->value[i] = orig - h;
        const double lm = loss(x0);
        p->value[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        scale_p = std::max({scale_p, std::abs(fd), std::abs(p->grad[i])});
        diff_p = std::max(diff_p, std::abs(fd - p->grad[i]));
      }
    }
    rep.params = diff_p / std::max(scale_p, 1e-8);
  }
  return rep;
}

// <L(x), y> == <x, L^T(y)> for a linear layer (biases zeroed by the caller).
double adjoint_gap(Layer& layer, const Tensor& x, Rng& rng) {
  const Tensor lx = layer.forward(x, true);
  const Tensor y = random_tensor(lx.shape(), rng);
  std::vector<Param*> params;
  layer.collect_params(params);
  for (Param* p : params) p->grad.fill(0.0);
  const Tensor lty = layer.backward(y);
  const double lhs = weighted_sum(lx, y);
  const double rhs = weighted_sum(x, lty);
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-8});
}

void zero_bias(Param& bias) { bias.value.fill(0.0); }

}  // namespace

TEST_CASE("finite-difference gradients: dense / relu / scaled tanh") {
  Rng rng(101);
  {
    Dense layer("d", 3, 4, rng);
    const FdReport r = fd_check(layer, random_tensor({2, 3}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    Relu layer("r");
    // keep activations away from the kink at zero
    Tensor x = random_tensor({2, 6}, rng, 0.2, 1.2);
    for (std::int64_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
    const FdReport r = fd_check(layer, x, true, rng);
    CHECK(r.input < 1e-4);
  }
  {
    ScaledTanh layer("t", 2.0);
    const FdReport r = fd_check(layer, random_tensor({3, 4}, rng), true, rng);
    CHECK(r.input < 1e-4);
  }
}

TEST_CASE("finite-difference gradients: 2d conv and transposed conv") {
  Rng rng(102);
  {
    Conv2d layer("c", 2, 3, 3, 2, rng);
    const FdReport r = fd_check(layer, random_tensor({2, 2, 5, 5}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    Conv2d layer("c1", 1, 2, 5, 1, rng);
    const FdReport r = fd_check(layer, random_tensor({1, 1, 6, 6}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    ConvTranspose2d layer("tc", 2, 3, 3, 2, 5, 5, rng);
    const FdReport r = fd_check(layer, random_tensor({2, 2, 3, 3}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    // non-square output with stride 2: ceil(6/2)=3, ceil(4/2)=2
    ConvTranspose2d layer("tc2", 1, 2, 4, 2, 6, 4, rng);
    const FdReport r = fd_check(layer, random_tensor({1, 1, 3, 2}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
}

TEST_CASE("finite-difference gradients: circular 1d conv pair") {
  Rng rng(103);
  {
    Conv1dCircular layer("c", 2, 3, 5, 2, rng);
    const FdReport r = fd_check(layer, random_tensor({2, 2, 10}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    Conv1dCircular layer("c1", 1, 2, 3, 1, rng);
    const FdReport r = fd_check(layer, random_tensor({1, 1, 7}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    ConvTranspose1dCircular layer("tc", 3, 2, 5, 2, 10, rng);
    const FdReport r = fd_check(layer, random_tensor({2, 3, 5}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    // odd length: ceil(9/2) = 5
    ConvTranspose1dCircular layer("tc2", 2, 1, 3, 2, 9, rng);
    const FdReport r = fd_check(layer, random_tensor({1, 2, 5}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
}

TEST_CASE("finite-difference gradients: batch norm, pooling, reshape") {
  Rng rng(104);
  {
    BatchNorm layer("bn", 3);
    const FdReport r = fd_check(layer, random_tensor({4, 3}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    BatchNorm layer("bn2", 2);
    const FdReport r = fd_check(layer, random_tensor({3, 2, 4, 4}, rng), true, rng);
    CHECK(r.input < 1e-4);
    CHECK(r.params < 1e-4);
  }
  {
    // eval mode: input gradient flows through the frozen affine map
    BatchNorm layer("bn3", 2);
    Rng warm(7);
    layer.forward(random_tensor({8, 2, 3}, warm), true);  // move running stats
    const FdReport r = fd_check(layer, random_tensor({2, 2, 3}, rng), false, rng,
                                /*check_params=*/false);
    CHECK(r.input < 1e-4);
  }
  {
    MaxPool2d layer("mp", 2);
    const FdReport r = fd_check(layer, random_tensor({2, 2, 4, 4}, rng), true, rng);
    CHECK(r.input < 1e-4);
  }
  {
    AvgPool2d layer("ap", 2);
    const FdReport r = fd_check(layer, random_tensor({2, 2, 4, 4}, rng), true, rng);
    CHECK(r.input < 1e-4);
  }
  {
    Flatten layer("f");
    const FdReport r = fd_check(layer, random_tensor({2, 3, 2, 2}, rng), true, rng);
    CHECK(r.input < 1e-4);
  }
  {
    Reshape layer("rs", {3, 2, 2});
    const FdReport r = fd_check(layer, random_tensor({2, 12}, rng), true, rng);
    CHECK(r.input < 1e-4);
  }
}

TEST_CASE("backward is the exact adjoint of forward for linear layers") {
  Rng rng(105);
  {
    Dense layer("d", 5, 3, rng);
    zero_bias(layer.bias);
    CHECK(adjoint_gap(layer, random_tensor({4, 5}, rng), rng) < 1e-12);
  }
  {
    Conv2d layer("c", 2, 3, 3, 2, rng);
    zero_bias(layer.bias);
    CHECK(adjoint_gap(layer, random_tensor({2, 2, 5, 5}, rng), rng) < 1e-12);
  }
  {
    ConvTranspose2d layer("tc", 3, 2, 3, 2, 5, 5, rng);
    zero_bias(layer.bias);
    CHECK(adjoint_gap(layer, random_tensor({2, 3, 3, 3}, rng), rng) < 1e-12);
  }
  {
    Conv1dCircular layer("c1", 2, 3, 5, 2, rng);
    zero_bias(layer.bias);
    CHECK(adjoint_gap(layer, random_tensor({2, 2, 12}, rng), rng) < 1e-12);
  }
  {
    ConvTranspose1dCircular layer("t1", 3, 2, 5, 2, 12, rng);
    zero_bias(layer.bias);
    CHECK(adjoint_gap(layer, random_tensor({2, 3, 6}, rng), rng) < 1e-12);
  }
  {
    AvgPool2d layer("ap", 2);
    CHECK(adjoint_gap(layer, random_tensor({2, 2, 6, 6}, rng), rng) < 1e-12);
  }
}

TEST_CASE("transposed conv forward is the adjoint of the matching conv forward") {
  Rng rng(106);
  // 2d pair: conv maps (N,3,5,5) -> (N,2,3,3); its adjoint maps back.
  {
    Conv2d conv("c", 3, 2, 3, 2, rng);
    ConvTranspose2d tconv("t", 2, 3, 3, 2, 5, 5, rng);
    zero_bias(conv.bias);
    zero_bias(tconv.bias);
    REQUIRE(tconv.weight.value.shape() == conv.weight.value.shape());
    for (std::int64_t i = 0; i < conv.weight.value.size(); ++i)
      tconv.weight.value[i] = conv.weight.value[i];
    const Tensor x = random_tensor({2, 3, 5, 5}, rng);
    const Tensor u = random_tensor({2, 2, 3, 3}, rng);
    const double lhs = weighted_sum(conv.forward(x, true), u);
    const double rhs = weighted_sum(x, tconv.forward(u, true));
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
  // circular 1d pair: conv maps (N,3,14) -> (N,2,7)
  {
    Conv1dCircular conv("c", 3, 2, 5, 2, rng);
    ConvTranspose1dCircular tconv("t", 2, 3, 5, 2, 14, rng);
    zero_bias(conv.bias);
    zero_bias(tconv.bias);
    REQUIRE(tconv.weight.value.shape() == conv.weight.value.shape());
    for (std::int64_t i = 0; i < conv.weight.value.size(); ++i)
      tconv.weight.value[i] = conv.weight.value[i];
    const Tensor x = random_tensor({2, 3, 14}, rng);
    const Tensor u = random_tensor({2, 2, 7}, rng);
    const double lhs = weighted_sum(conv.forward(x, true), u);
    const double rhs = weighted_sum(x, tconv.forward(u, true));
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("conv shape arithmetic uses ceil(in/stride)") {
  Rng rng(107);
  Conv2d c1("a", 1, 2, 4, 2, rng);
  CHECK(c1.forward(random_tensor({1, 1, 128, 128}, rng), true).shape() ==
        std::vector<int>{1, 2, 64, 64});
  Conv2d c2("b", 1, 1, 3, 2, rng);
  CHECK(c2.forward(random_tensor({1, 1, 5, 7}, rng), true).shape() ==
        std::vector<int>{1, 1, 3, 4});
  Conv1dCircular c3("c", 1, 4, 5, 2, rng);
  CHECK(c3.forward(random_tensor({1, 1, 45}, rng), true).shape() ==
        std::vector<int>{1, 4, 23});
  ConvTranspose2d t1("d", 1, 1, 3, 2, 9, 9, rng);
  CHECK(t1.forward(random_tensor({1, 1, 5, 5}, rng), true).shape() ==
        std::vector<int>{1, 1, 9, 9});
  // input that is not ceil(out/stride) is rejected
  CHECK_THROWS_AS(t1.forward(random_tensor({1, 1, 4, 4}, rng), true), DataError);
}

TEST_CASE("batch norm: train-mode oracle, running stats, eval affine map") {
  Rng rng(108);
  BatchNorm bn("bn", 2, 0.9, 1e-3);
  const Tensor x = random_tensor({4, 2, 3}, rng);

  // recompute the normalization by hand
  const int n = 4, spatial = 3;
  const double count = n * spatial;
  std::vector<double> mean(2, 0.0), var(2, 0.0);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < spatial; ++j) mean[c] += x[(i * 2 + c) * spatial + j];
    mean[c] /= count;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < spatial; ++j) {
        const double d = x[(i * 2 + c) * spatial + j] - mean[c];
        var[c] += d * d;
      }
    var[c] /= count;
  }

  const Tensor y = bn.forward(x, true);
  for (int c = 0; c < 2; ++c) {
    const double invstd = 1.0 / std::sqrt(var[c] + 1e-3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < spatial; ++j) {
        const std::size_t k = (static_cast<std::size_t>(i) * 2 + c) * spatial + j;
        CHECK(y[k] == doctest::Approx((x[k] - mean[c]) * invstd).epsilon(1e-10));
      }
    // momentum blend from the (0, 1) initialization
    CHECK(bn.running_mean.value[c] == doctest::Approx(0.1 * mean[c]).epsilon(1e-12));
    CHECK(bn.running_var.value[c] ==
          doctest::Approx(0.9 * 1.0 + 0.1 * var[c]).epsilon(1e-12));
  }

  // eval mode: y = gamma * (x - rm) / sqrt(rv + eps) + beta, elementwise
  bn.gamma.value[0] = 1.5;
  bn.beta.value[1] = -0.25;
  const Tensor xe = random_tensor({2, 2, 3}, rng);
  const Tensor ye = bn.forward(xe, false);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < spatial; ++j) {
        const std::size_t k = (static_cast<std::size_t>(i) * 2 + c) * spatial + j;
        const double invstd = 1.0 / std::sqrt(bn.running_var.value[c] + 1e-3);
        const double expect =
            bn.gamma.value[c] * (xe[k] - bn.running_mean.value[c]) * invstd +
            bn.beta.value[c];
        CHECK(ye[k] == doctest::Approx(expect).epsilon(1e-12));
      }
}

TEST_CASE("pooling semantics") {
  Rng rng(109);
  // max pool picks the max of each 2x2 block and routes gradient to it
  Tensor x({1, 1, 4, 4});
  const double vals[16] = {1, 2, 5, 4, 3, 0, 1, 2, 9, 8, 7, 6, 2, 3, 4, 5};
  for (int i = 0; i < 16; ++i) x[i] = vals[i];
  MaxPool2d mp("mp", 2);
  const Tensor y = mp.forward(x, true);
  REQUIRE(y.shape() == std::vector<int>{1, 1, 2, 2});
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 5.0);
  CHECK(y[2] == 9.0);
  CHECK(y[3] == 7.0);
  Tensor dy({1, 1, 2, 2});
  dy[0] = 1.0; dy[1] = 2.0; dy[2] = 3.0; dy[3] = 4.0;
  const Tensor dx = mp.backward(dy);
  CHECK(dx[4] == 1.0);   // 3 at (1,0)
  CHECK(dx[2] == 2.0);   // 5 at (0,2)
  CHECK(dx[8] == 3.0);   // 9 at (2,0)
  CHECK(dx[10] == 4.0);  // 7 at (2,2)
  double total = 0.0;
  for (int i = 0; i < 16; ++i) total += dx[i];
  CHECK(total == 10.0);

  AvgPool2d ap("ap", 2);
  const Tensor ya = ap.forward(x, true);
  CHECK(ya[0] == doctest::Approx(1.5));
  CHECK(ya[2] == doctest::Approx(5.5));
  const Tensor dxa = ap.backward(dy);
  CHECK(dxa[0] == doctest::Approx(0.25));
  CHECK(dxa[8] == doctest::Approx(0.75));
}

TEST_CASE("stack: end-to-end finite differences through a small network") {
  Rng rng(110);
  Stack net;
  net.add<Conv2d>("c1", 1, 4, 3, 2, rng);
  net.add<BatchNorm>("bn1", 4);
  net.add<Relu>("r1");
  net.add<MaxPool2d>("p1", 2);
  net.add<Flatten>("fl");
  net.add<Dense>("fc", 16, 5, rng);
  net.add<ScaledTanh>("out", 1.5);

  const Tensor x0 = random_tensor({2, 1, 8, 8}, rng);
  const Tensor y0 = net.forward(x0, true);
  REQUIRE(y0.shape() == std::vector<int>{2, 5});
  const Tensor w = random_tensor(y0.shape(), rng);

  net.zero_grad();
  net.forward(x0, true);
  const Tensor dx = net.backward(w);

  const auto loss = [&](const Tensor& xx) {
    return weighted_sum(net.forward(xx, true), w);
  };
  const double h = 1e-6;
  double scale = 0.0, diff = 0.0;
  for (std::int64_t i = 0; i < x0.size(); ++i) {
    Tensor xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (loss(xp) - loss(xm)) / (2.0 * h);
    scale = std::max({scale, std::abs(fd), std::abs(dx[i])});
    diff = std::max(diff, std::abs(fd - dx[i]));
  }
  CHECK(diff / std::max(scale, 1e-8) < 1e-3);

  double pscale = 0.0, pdiff = 0.0;
  for (Param* p : net.params()) {
    if (!p->trainable) continue;
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double lp = loss(x0);
      p->value[i] = orig - h;
      const double lm = loss(x0);
      p->value[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      pscale = std::max({pscale, std::abs(fd), std::abs(p->grad[i])});
      pdiff = std::max(pdiff, std::abs(fd - p->grad[i]));
    }
  }
  CHECK(pdiff / std::max(pscale, 1e-8) < 1e-3);
}

TEST_CASE("stack utilities and layer error handling") {
  Rng rng(111);
  Stack net;
  net.add<Dense>("a", 3, 4, rng);
  net.add<Relu>("r");
  net.add<Dense>("b", 4, 2, rng);
  CHECK(net.layer_count() == 3);

  const Tensor x = random_tensor({2, 3}, rng);
  const Tensor full = net.forward(x, true);
  const Tensor pre = net.forward_prefix(x, 1, true);
  CHECK(pre.shape() == std::vector<int>{2, 4});
  REQUIRE(full.shape() == std::vector<int>{2, 2});

  // zero_grad clears accumulated gradients
  net.backward(random_tensor(full.shape(), rng));
  bool any_nonzero = false;
  for (Param* p : net.params())
    for (std::int64_t i = 0; i < p->grad.size(); ++i)
      if (p->grad[i] != 0.0) any_nonzero = true;
  CHECK(any_nonzero);
  net.zero_grad();
  for (Param* p : net.params())
    for (std::int64_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);

  // shape and ordering errors surface as DataError
  Dense d("d", 3, 2, rng);
  CHECK_THROWS_AS(d.forward(random_tensor({2, 4}, rng), true), DataError);
  Relu r("r2");
  CHECK_THROWS_AS(r.backward(random_tensor({2, 2}, rng)), DataError);

  // parameter names carry the layer prefix (used by checkpoints)
  CHECK(net.params()[0]->name == "a.w");
  CHECK(net.params()[1]->name == "a.b");
}
