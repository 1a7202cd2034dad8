#include "vgdp/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "vgdp/nn/init.hpp"
#include "vgdp/nn/ops.hpp"

namespace vgdp::diff {

using nn::ParamMap;
using nn::Tensor;

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "squared_cosine") return ScheduleKind::squared_cosine;
  if (name == "linear") return ScheduleKind::linear;
  throw UsageError("unknown schedule kind: " + name);
}

std::string schedule_kind_name(ScheduleKind kind) {
  return kind == ScheduleKind::squared_cosine ? "squared_cosine" : "linear";
}

double NoiseSchedule::beta_at(int t) const {
  if (t < 1 || t > T) throw UsageError("schedule step out of range: " + std::to_string(t));
  return beta[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_at(int t) const {
  if (t < 1 || t > T) throw UsageError("schedule step out of range: " + std::to_string(t));
  return alpha[static_cast<size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t == 0) return 1.0;
  if (t < 0 || t > T) throw UsageError("schedule step out of range: " + std::to_string(t));
  return alpha_bar[static_cast<size_t>(t - 1)];
}

NoiseSchedule build_schedule(int T, ScheduleKind kind) {
  if (T < 1) throw UsageError("schedule needs at least one step");
  NoiseSchedule s;
  s.T = T;
  s.kind = kind;
  s.beta.resize(static_cast<size_t>(T));
  if (kind == ScheduleKind::linear) {
    const double lo = 1e-4, hi = 0.02;
    for (int t = 1; t <= T; ++t) {
      s.beta[static_cast<size_t>(t - 1)] =
          (T == 1) ? lo : lo + (hi - lo) * static_cast<double>(t - 1) / (T - 1);
    }
  } else {
    // Squared-cosine alpha_bar curve with the usual small offset; betas come
    // from consecutive ratios and are clipped to (0, 0.999].
    const double off = 0.008;
    auto f = [&](double t) {
      const double x = (t / T + off) / (1.0 + off) * (3.14159265358979323846 / 2.0);
      const double c = std::cos(x);
      return c * c;
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double cur = f(static_cast<double>(t)) / f0;
      double beta = 1.0 - cur / prev;
      beta = std::min(beta, 0.999);
      beta = std::max(beta, 1e-8);
      s.beta[static_cast<size_t>(t - 1)] = beta;
      prev = cur;
    }
  }
  s.alpha.resize(static_cast<size_t>(T));
  s.alpha_bar.resize(static_cast<size_t>(T));
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    s.alpha[static_cast<size_t>(i)] = 1.0 - s.beta[static_cast<size_t>(i)];
    prod *= s.alpha[static_cast<size_t>(i)];
    s.alpha_bar[static_cast<size_t>(i)] = prod;
  }
  return s;
}

Tensor q_sample(const Tensor& a0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T) throw UsageError("q_sample: step out of range");
  if (a0.shape() != eps.shape()) throw ShapeError("q_sample: a0 and eps must share a shape");
  const double ab = sched.alpha_bar_at(t);
  const float c0 = static_cast<float>(std::sqrt(ab));
  const float ce = static_cast<float>(std::sqrt(1.0 - ab));
  return nn::add(nn::scale(a0, c0), nn::scale(eps, ce));
}

std::vector<float> sinusoidal_embedding(float t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw UsageError("time embedding dim must be even and >= 2");
  const int half = dim / 2;
  std::vector<float> emb(static_cast<size_t>(dim));
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
    emb[static_cast<size_t>(i)] = static_cast<float>(std::sin(t * freq));
    emb[static_cast<size_t>(half + i)] = static_cast<float>(std::cos(t * freq));
  }
  return emb;
}

void DenoiserConfig::validate() const {
  if (horizon < 1 || action_dim < 1 || context_dim < 1 || hidden < 1 || hidden_layers < 1) {
    throw UsageError("denoiser config: all dims must be positive");
  }
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw UsageError("denoiser config: time_embed_dim must be even and >= 2");
  }
}

Denoiser::Denoiser(const DenoiserConfig& cfg, Rng& rng, ParamMap& params,
                   const std::string& prefix)
    : cfg_(cfg) {
  cfg.validate();
  auto reg = [&params](const std::string& name, Tensor t) {
    params[name] = t;
    return t;
  };
  int in = cfg.flat_dim() + cfg.time_embed_dim + cfg.context_dim;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    const std::string tag = prefix + "h" + std::to_string(l) + ".";
    w_.push_back(reg(tag + "w", nn::he_init(rng, {in, cfg.hidden}, in)));
    b_.push_back(reg(tag + "b", nn::zeros_init({cfg.hidden})));
    in = cfg.hidden;
  }
  // Small final layer so initial predictions sit near zero and the initial
  // loss lands at the unit-normal target variance.
  w_.push_back(reg(prefix + "out.w", nn::normal_init(rng, {in, cfg.flat_dim()}, 0.01f)));
  b_.push_back(reg(prefix + "out.b", nn::zeros_init({cfg.flat_dim()})));
}

Tensor Denoiser::forward(const Tensor& a_t, const std::vector<int>& t, const Tensor& ctx) const {
  const int b = a_t.ndim() == 2 ? a_t.dim(0) : -1;
  if (b < 1 || a_t.dim(1) != cfg_.flat_dim()) {
    throw ShapeError("denoiser: expected a_t [B," + std::to_string(cfg_.flat_dim()) + "], got " +
                     nn::shape_str(a_t.shape()));
  }
  if (ctx.ndim() != 2 || ctx.dim(0) != b || ctx.dim(1) != cfg_.context_dim) {
    throw ShapeError("denoiser: expected context [B," + std::to_string(cfg_.context_dim) +
                     "], got " + nn::shape_str(ctx.shape()));
  }
  if (static_cast<int>(t.size()) != b) {
    throw ShapeError("denoiser: need one step per batch row");
  }
  ++calls_;
  Tensor temb = Tensor::zeros({b, cfg_.time_embed_dim});
  for (int r = 0; r < b; ++r) {
    const std::vector<float> e =
        sinusoidal_embedding(static_cast<float>(t[static_cast<size_t>(r)]), cfg_.time_embed_dim);
    std::copy(e.begin(), e.end(),
              temb.data().begin() + static_cast<long>(r) * cfg_.time_embed_dim);
  }
  Tensor x = nn::concat({a_t, temb, ctx}, 1);
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    x = nn::relu(nn::linear(x, w_[static_cast<size_t>(l)], b_[static_cast<size_t>(l)]));
  }
  return nn::linear(x, w_.back(), b_.back());
}

TrainingBatch make_training_batch(const Tensor& a0, const NoiseSchedule& sched, Rng& rng) {
  if (a0.ndim() != 2) throw ShapeError("make_training_batch: a0 must be [B, horizon*action_dim]");
  const int b = a0.dim(0);
  const int d = a0.dim(1);
  TrainingBatch batch;
  batch.t.resize(static_cast<size_t>(b));
  for (auto& t : batch.t) t = 1 + rng.uniform_int(sched.T);
  batch.eps = Tensor::zeros(a0.shape());
  for (auto& v : batch.eps.data()) v = static_cast<float>(rng.normal());
  // Per-row schedule coefficients as constant factors.
  Tensor c0 = Tensor::zeros(a0.shape());
  Tensor ce = Tensor::zeros(a0.shape());
  for (int r = 0; r < b; ++r) {
    const double ab = sched.alpha_bar_at(batch.t[static_cast<size_t>(r)]);
    const float s0 = static_cast<float>(std::sqrt(ab));
    const float se = static_cast<float>(std::sqrt(1.0 - ab));
    std::fill_n(c0.data().begin() + static_cast<long>(r) * d, d, s0);
    std::fill_n(ce.data().begin() + static_cast<long>(r) * d, d, se);
  }
  batch.a_t = nn::add(nn::mul(a0, c0), nn::mul(batch.eps, ce));
  return batch;
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  Tensor d = nn::sub(pred, target);
  return nn::mean_all(nn::mul(d, d));
}

Tensor training_loss(const Denoiser& den, const Tensor& a0, const Tensor& ctx,
                     const NoiseSchedule& sched, Rng& rng) {
  TrainingBatch batch = make_training_batch(a0, sched, rng);
  Tensor eps_hat = den.forward(batch.a_t, batch.t, ctx);
  return mse(eps_hat, batch.eps);
}

Tensor denoise_sample(const Denoiser& den, const NoiseSchedule& sched, const Tensor& ctx,
                      Rng& rng) {
  if (ctx.ndim() != 2) throw ShapeError("denoise_sample: context must be [B, context_dim]");
  const int b = ctx.dim(0);
  const int d = den.config().flat_dim();
  std::vector<float> a(static_cast<size_t>(b) * d);
  for (auto& v : a) v = static_cast<float>(rng.normal());

  for (int t = sched.T; t >= 1; --t) {
    // Fresh constant leaf each step keeps the tape per-step only.
    Tensor a_t = Tensor::from(a, {b, d});
    Tensor eps_hat = den.forward(a_t, std::vector<int>(static_cast<size_t>(b), t), ctx);
    const double beta = sched.beta_at(t);
    const double ab = sched.alpha_bar_at(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
    const double eps_coef = beta / std::sqrt(1.0 - ab);
    double sigma = 0.0;
    if (t > 1) {
      const double ab_prev = sched.alpha_bar_at(t - 1);
      sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta);
    }
    for (size_t i = 0; i < a.size(); ++i) {
      const double mean =
          inv_sqrt_alpha * (static_cast<double>(a[i]) -
                            eps_coef * static_cast<double>(eps_hat.data()[i]));
      const double z = (t > 1) ? rng.normal() : 0.0;
      a[i] = static_cast<float>(mean + sigma * z);
      if (!std::isfinite(a[i])) throw NumericalError("denoise_sample produced a non-finite value");
    }
  }
  for (auto& v : a) v = std::clamp(v, -1.0f, 1.0f);
  return Tensor::from(std::move(a), {b, d});
}

}  // namespace vgdp::diff
