#include "vgdp/fusion.hpp"

#include <cmath>

#include "vgdp/nn/init.hpp"
#include "vgdp/nn/ops.hpp"

namespace vgdp::fus {

using nn::ParamMap;
using nn::Tensor;

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "cross_attention") return FusionMode::cross_attention;
  if (name == "concat") return FusionMode::concat;
  if (name == "early_fusion") return FusionMode::early_fusion;
  throw UsageError("unknown fusion mode: " + name);
}

std::string fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::cross_attention: return "cross_attention";
    case FusionMode::concat: return "concat";
    case FusionMode::early_fusion: return "early_fusion";
  }
  throw UsageError("invalid fusion mode value");
}

FusionConfig FusionConfig::desk() { return FusionConfig{}; }

FusionConfig FusionConfig::paper() {
  FusionConfig cfg;
  cfg.shared_dim = 256;
  return cfg;
}

void FusionConfig::validate() const {
  if (shared_dim < 1 || token_count < 1 || head_count < 1) {
    throw UsageError("fusion config: dims and counts must be positive");
  }
  if (shared_dim % token_count != 0) {
    throw UsageError("fusion config: shared_dim must be divisible by token_count");
  }
  if (token_dim() % head_count != 0) {
    throw UsageError("fusion config: token_dim must be divisible by head_count");
  }
  if (modality_drop_p < 0.0f || modality_drop_p > 0.5f) {
    throw UsageError("fusion config: modality_drop_p must lie in [0, 0.5]");
  }
  if (element_drop_p < 0.0f || element_drop_p >= 1.0f) {
    throw UsageError("fusion config: element_drop_p must lie in [0, 1)");
  }
  parse_fusion_mode(fusion_mode);
}

std::vector<Drop> draw_drop_masks(int batch, float p, bool training, Rng& rng) {
  if (batch < 1) throw UsageError("draw_drop_masks: batch must be positive");
  if (p < 0.0f || p > 0.5f) throw UsageError("modality_drop_p must lie in [0, 0.5]");
  std::vector<Drop> masks(static_cast<size_t>(batch), Drop::keep_both);
  if (!training || p == 0.0f) return masks;
  for (auto& m : masks) {
    const double u = rng.uniform();
    if (u < p) {
      m = Drop::drop_rgb;
    } else if (u < 2.0 * static_cast<double>(p)) {
      m = Drop::drop_pc;
    }
  }
  return masks;
}

namespace {

bool any_drop(const std::vector<Drop>& masks) {
  for (Drop m : masks) {
    if (m != Drop::keep_both) return true;
  }
  return false;
}

// Multiplies rows flagged in `zero_rows` by zero (others by one). A constant
// mask tensor keeps gradients out of the dropped rows.
Tensor zero_rows(const Tensor& x, const std::vector<Drop>& masks, Drop which) {
  Tensor mask = Tensor::full(x.shape(), 1.0f);
  const int cols = x.dim(1);
  bool hit = false;
  for (size_t r = 0; r < masks.size(); ++r) {
    if (masks[r] != which) continue;
    hit = true;
    std::fill_n(mask.data().begin() + static_cast<long>(r) * cols, cols, 0.0f);
  }
  if (!hit) return x;
  return nn::mul(x, mask);
}

}  // namespace

ModalityDropResult modality_dropout(const Tensor& rgb, const Tensor& pc, float p, bool training,
                                    Rng& rng) {
  if (rgb.ndim() != 2 || pc.ndim() != 2 || rgb.dim(0) != pc.dim(0)) {
    throw ShapeError("modality_dropout: expected [B,*] features with matching batch");
  }
  ModalityDropResult out{rgb, pc, draw_drop_masks(rgb.dim(0), p, training, rng)};
  if (any_drop(out.masks)) {
    out.rgb = zero_rows(rgb, out.masks, Drop::drop_rgb);
    out.pc = zero_rows(pc, out.masks, Drop::drop_pc);
  }
  return out;
}

FusionModule::FusionModule(const FusionConfig& cfg, int rgb_in, int pc_in, int state_dim, Rng& rng,
                           ParamMap& params, const std::string& prefix)
    : cfg_(cfg), mode_(parse_fusion_mode(cfg.fusion_mode)), rgb_in_(rgb_in), pc_in_(pc_in),
      state_dim_(state_dim) {
  cfg.validate();
  if (pc_in < 1 || state_dim < 1 || (mode_ != FusionMode::early_fusion && rgb_in < 1)) {
    throw UsageError("fusion module: input dims must be positive");
  }
  auto reg = [&params](const std::string& name, Tensor t) {
    params[name] = t;
    return t;
  };
  const int sd = cfg.shared_dim;
  if (mode_ != FusionMode::early_fusion) {
    proj_rgb_w_ = reg(prefix + "proj_rgb_w", nn::he_init(rng, {rgb_in, sd}, rgb_in));
    proj_rgb_b_ = reg(prefix + "proj_rgb_b", nn::zeros_init({sd}));
  }
  proj_pc_w_ = reg(prefix + "proj_pc_w", nn::he_init(rng, {pc_in, sd}, pc_in));
  proj_pc_b_ = reg(prefix + "proj_pc_b", nn::zeros_init({sd}));
  if (mode_ == FusionMode::cross_attention) {
    const int td = cfg.token_dim();
    wq_r2p_ = reg(prefix + "attn_r2p_wq", nn::he_init(rng, {td, td}, td));
    wk_r2p_ = reg(prefix + "attn_r2p_wk", nn::he_init(rng, {td, td}, td));
    wv_r2p_ = reg(prefix + "attn_r2p_wv", nn::he_init(rng, {td, td}, td));
    wq_p2r_ = reg(prefix + "attn_p2r_wq", nn::he_init(rng, {td, td}, td));
    wk_p2r_ = reg(prefix + "attn_p2r_wk", nn::he_init(rng, {td, td}, td));
    wv_p2r_ = reg(prefix + "attn_p2r_wv", nn::he_init(rng, {td, td}, td));
  }
}

int FusionModule::context_dim() const {
  const int rich = (mode_ == FusionMode::early_fusion) ? cfg_.shared_dim : 2 * cfg_.shared_dim;
  return rich + state_dim_;
}

Tensor FusionModule::project(const Tensor& feat, const Tensor& w, const Tensor& b,
                             int expect_in) const {
  if (feat.ndim() != 2 || feat.dim(1) != expect_in) {
    throw ShapeError("fusion projection: expected [B," + std::to_string(expect_in) + "], got " +
                     nn::shape_str(feat.shape()));
  }
  return nn::linear(feat, w, b);
}

Tensor FusionModule::project_and_tokenize_rgb(const Tensor& feat) const {
  Tensor p = project(feat, proj_rgb_w_, proj_rgb_b_, rgb_in_);
  return nn::reshape(p, {feat.dim(0), cfg_.token_count, cfg_.token_dim()});
}

Tensor FusionModule::project_and_tokenize_pc(const Tensor& feat) const {
  Tensor p = project(feat, proj_pc_w_, proj_pc_b_, pc_in_);
  return nn::reshape(p, {feat.dim(0), cfg_.token_count, cfg_.token_dim()});
}

Tensor FusionModule::apply_heads(const Tensor& q_tokens, const Tensor& k_tokens,
                                 const Tensor& v_tokens, std::vector<float>& attn_log) const {
  const int hd = cfg_.head_dim();
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));
  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(cfg_.head_count));
  for (int h = 0; h < cfg_.head_count; ++h) {
    Tensor q = nn::slice_last(q_tokens, h * hd, hd);
    Tensor k = nn::slice_last(k_tokens, h * hd, hd);
    Tensor v = nn::slice_last(v_tokens, h * hd, hd);
    Tensor scores = nn::scale(nn::bmm(q, nn::transpose_last2(k)), inv_sqrt);
    Tensor attn = nn::softmax(scores);
    attn_log.insert(attn_log.end(), attn.data().begin(), attn.data().end());
    heads.push_back(nn::bmm(attn, v));
  }
  return nn::concat(heads, 2);
}

std::pair<Tensor, Tensor> FusionModule::cross_attend(const Tensor& rgb_tokens,
                                                     const Tensor& pc_tokens) const {
  if (mode_ != FusionMode::cross_attention) {
    throw UsageError("cross_attend is only available in cross_attention mode");
  }
  const int b = rgb_tokens.dim(0);
  const int tc = cfg_.token_count;
  const int td = cfg_.token_dim();
  if (rgb_tokens.shape() != nn::Shape{b, tc, td} || pc_tokens.shape() != nn::Shape{b, tc, td}) {
    throw ShapeError("cross_attend: token grids must be [B,token_count,token_dim]");
  }
  auto lin3 = [&](const Tensor& x, const Tensor& w) {
    return nn::reshape(nn::matmul(nn::reshape(x, {b * tc, td}), w), {b, tc, td});
  };
  attn_r2p_.clear();
  attn_p2r_.clear();
  // RGB queries attend over PC keys/values.
  Tensor r_out = apply_heads(lin3(rgb_tokens, wq_r2p_), lin3(pc_tokens, wk_r2p_),
                             lin3(pc_tokens, wv_r2p_), attn_r2p_);
  // PC queries attend over RGB keys/values.
  Tensor p_out = apply_heads(lin3(pc_tokens, wq_p2r_), lin3(rgb_tokens, wk_p2r_),
                             lin3(rgb_tokens, wv_p2r_), attn_p2r_);
  if (cfg_.use_residual) {
    r_out = nn::add(rgb_tokens, r_out);
    p_out = nn::add(pc_tokens, p_out);
  }
  return {r_out, p_out};
}

Tensor FusionModule::fuse(const Tensor& rgb, const Tensor& pc, const Tensor& state, bool training,
                          Rng& rng) const {
  std::vector<Drop> masks;
  if (mode_ != FusionMode::early_fusion && cfg_.use_modality_dropout) {
    masks = draw_drop_masks(pc.dim(0), cfg_.modality_drop_p, training, rng);
  } else {
    masks.assign(static_cast<size_t>(pc.dim(0)), Drop::keep_both);
  }
  return fuse_masked(rgb, pc, state, masks, training, rng);
}

Tensor FusionModule::fuse_masked(const Tensor& rgb, const Tensor& pc, const Tensor& state,
                                 const std::vector<Drop>& masks, bool training, Rng& rng) const {
  const int b = pc.dim(0);
  if (state.ndim() != 2 || state.dim(0) != b || state.dim(1) != state_dim_) {
    throw ShapeError("fuse: expected state [B," + std::to_string(state_dim_) + "], got " +
                     nn::shape_str(state.shape()));
  }
  if (static_cast<int>(masks.size()) != b) {
    throw ShapeError("fuse: need exactly one drop mask per batch row");
  }

  Tensor ctx;
  if (mode_ == FusionMode::early_fusion) {
    ctx = nn::concat({project(pc, proj_pc_w_, proj_pc_b_, pc_in_), state}, 1);
  } else {
    Tensor rgb_in = any_drop(masks) ? zero_rows(rgb, masks, Drop::drop_rgb) : rgb;
    Tensor pc_in = any_drop(masks) ? zero_rows(pc, masks, Drop::drop_pc) : pc;
    if (mode_ == FusionMode::concat) {
      ctx = nn::concat({project(rgb_in, proj_rgb_w_, proj_rgb_b_, rgb_in_),
                        project(pc_in, proj_pc_w_, proj_pc_b_, pc_in_), state},
                       1);
    } else {
      Tensor rt = project_and_tokenize_rgb(rgb_in);
      Tensor pt = project_and_tokenize_pc(pc_in);
      auto [ra, pa] = cross_attend(rt, pt);
      ctx = nn::concat({nn::reshape(ra, {b, cfg_.shared_dim}),
                        nn::reshape(pa, {b, cfg_.shared_dim}), state},
                       1);
    }
  }

  if (training && cfg_.element_drop_p > 0.0f) {
    // Inverted scaling: surviving elements are multiplied by 1/(1-p) so the
    // expectation matches eval mode. Drawn row-major.
    const float p = cfg_.element_drop_p;
    const float keep_scale = 1.0f / (1.0f - p);
    Tensor mask = Tensor::zeros(ctx.shape());
    for (auto& m : mask.data()) m = (rng.uniform() < p) ? 0.0f : keep_scale;
    ctx = nn::mul(ctx, mask);
  }
  ++calls_;
  return ctx;
}

}  // namespace vgdp::fus
