#include "lidarnav/optim.hpp"

#include <cmath>

#include "lidarnav/errors.hpp"

namespace lidarnav {

void adam_update(Tensor& value, const Tensor& grad, Tensor& m, Tensor& v,
                 std::int64_t t, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::int64_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

Adam::Adam(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {}

void Adam::step() {
  ++t_;
  for (Param* p : params_) {
    if (!p->trainable) {
      p->grad.fill(0.0);
      continue;
    }
    if (!p->grad.all_finite())
      throw NumericError("non-finite gradient in parameter " + p->name);
    adam_update(p->value, p->grad, p->m, p->v, t_, cfg_);
    p->grad.fill(0.0);
  }
}

}  // namespace lidarnav
