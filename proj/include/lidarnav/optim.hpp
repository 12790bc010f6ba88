#pragma once

#include <cstdint>
#include <vector>

#include "lidarnav/nn.hpp"

namespace lidarnav {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Single-tensor Adam update with explicit timestep (t counts from 1).
void adam_update(Tensor& value, const Tensor& grad, Tensor& m, Tensor& v,
                 std::int64_t t, const AdamConfig& cfg);

class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg = {});

  // Applies one update from the accumulated gradients of all trainable
  // parameters, then clears every gradient. Throws NumericError on
  // non-finite gradients.
  void step();

  std::int64_t t() const { return t_; }
  void set_t(std::int64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace lidarnav
