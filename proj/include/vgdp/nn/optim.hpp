#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vgdp/nn/tensor.hpp"

namespace vgdp::nn {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with bias correction. Moments are kept per parameter name so optimizer
// state can round-trip through checkpoints.
class Adam {
 public:
  explicit Adam(ParamMap params, AdamConfig config = {});

  // Applies one update from the gradients currently stored on the parameters.
  // Throws NumericalError if any gradient is missing or non-finite.
  void step();

  void zero_grad();

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }

  const AdamConfig& config() const { return config_; }
  ParamMap& params() { return params_; }

  std::map<std::string, std::vector<float>>& moment1() { return m_; }
  std::map<std::string, std::vector<float>>& moment2() { return v_; }

 private:
  ParamMap params_;
  AdamConfig config_;
  std::map<std::string, std::vector<float>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace vgdp::nn
