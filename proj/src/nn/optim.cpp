#include "vgdp/nn/optim.hpp"

#include <cmath>

#include "vgdp/common.hpp"

namespace vgdp::nn {

Adam::Adam(ParamMap params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& [name, p] : params_) {
    m_[name].assign(static_cast<size_t>(p.size()), 0.0f);
    v_[name].assign(static_cast<size_t>(p.size()), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(t_));
  const float step_size = config_.lr / static_cast<float>(bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  for (auto& [name, p] : params_) {
    if (!p.has_grad()) {
      throw NumericalError("adam: parameter '" + name + "' has no gradient");
    }
    const auto& g = p.grad();
    for (float gv : g) {
      if (!std::isfinite(gv)) {
        throw NumericalError("adam: non-finite gradient in parameter '" + name + "'");
      }
    }
    auto& m = m_[name];
    auto& v = v_[name];
    auto& w = p.data();
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0f - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0f - config_.beta2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

}  // namespace vgdp::nn
