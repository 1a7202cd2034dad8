#pragma once

#include <string>
#include <vector>

#include "vgdp/common.hpp"
#include "vgdp/nn/tensor.hpp"

namespace vgdp::diff {

enum class ScheduleKind { squared_cosine, linear };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string schedule_kind_name(ScheduleKind kind);

// DDPM variance schedule. Entries are indexed by step-1 (steps run 1..T);
// alpha_bar is the running product of alpha, so alpha_bar_at(0) == 1.
struct NoiseSchedule {
  int T = 0;
  ScheduleKind kind = ScheduleKind::squared_cosine;
  std::vector<double> beta, alpha, alpha_bar;

  double beta_at(int t) const;
  double alpha_at(int t) const;
  double alpha_bar_at(int t) const;  // valid for t in [0, T]
};

NoiseSchedule build_schedule(int T, ScheduleKind kind);

// Closed-form forward noising: sqrt(alpha_bar_t) a0 + sqrt(1-alpha_bar_t) eps.
// Shapes of a0 and eps must match; t must lie in [1, T].
nn::Tensor q_sample(const nn::Tensor& a0, int t, const nn::Tensor& eps,
                    const NoiseSchedule& sched);

// 32-dim sinusoidal step embedding (first half sines, second half cosines,
// geometric frequencies from 1 down to 1/10000).
std::vector<float> sinusoidal_embedding(float t, int dim);

struct DenoiserConfig {
  int horizon = 8;
  int action_dim = 3;
  int context_dim = 192;
  int hidden = 256;
  int hidden_layers = 3;
  int time_embed_dim = 32;

  int flat_dim() const { return horizon * action_dim; }
  void validate() const;
};

// Conditional noise-prediction MLP over [a_t || step embedding || context].
class Denoiser {
 public:
  Denoiser(const DenoiserConfig& cfg, Rng& rng, nn::ParamMap& params, const std::string& prefix);

  const DenoiserConfig& config() const { return cfg_; }
  // a_t: [B, horizon*action_dim]; t: one step per row; ctx: [B, context_dim].
  nn::Tensor forward(const nn::Tensor& a_t, const std::vector<int>& t,
                     const nn::Tensor& ctx) const;
  int call_count() const { return calls_; }

 private:
  DenoiserConfig cfg_;
  std::vector<nn::Tensor> w_, b_;
  mutable int calls_ = 0;
};

// One training minibatch of noised actions: per-row uniform step in [1, T]
// (drawn first, row order), then unit-normal eps (row-major).
struct TrainingBatch {
  nn::Tensor a_t;
  std::vector<int> t;
  nn::Tensor eps;
};

TrainingBatch make_training_batch(const nn::Tensor& a0, const NoiseSchedule& sched, Rng& rng);

nn::Tensor mse(const nn::Tensor& pred, const nn::Tensor& target);

// Eq-style noise-prediction objective: MSE between drawn and predicted eps.
nn::Tensor training_loss(const Denoiser& den, const nn::Tensor& a0, const nn::Tensor& ctx,
                         const NoiseSchedule& sched, Rng& rng);

// Ancestral DDPM sampler conditioned on ctx ([B, context_dim]); returns
// [B, horizon*action_dim] clamped to [-1, 1]. Deterministic given the rng.
nn::Tensor denoise_sample(const Denoiser& den, const NoiseSchedule& sched, const nn::Tensor& ctx,
                          Rng& rng);

}  // namespace vgdp::diff
