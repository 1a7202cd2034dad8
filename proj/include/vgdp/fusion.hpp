#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vgdp/common.hpp"
#include "vgdp/nn/tensor.hpp"

namespace vgdp::fus {

enum class FusionMode { cross_attention, concat, early_fusion };

FusionMode parse_fusion_mode(const std::string& name);
std::string fusion_mode_name(FusionMode mode);

struct FusionConfig {
  int shared_dim = 64;
  int token_count = 8;
  int head_count = 4;
  float modality_drop_p = 0.2f;
  float element_drop_p = 0.1f;
  std::string fusion_mode = "cross_attention";
  bool use_residual = true;
  bool use_modality_dropout = true;

  int token_dim() const { return shared_dim / token_count; }
  int head_dim() const { return token_dim() / head_count; }

  static FusionConfig desk();
  static FusionConfig paper();
  void validate() const;
};

// Per-sample modality dropout outcome. The draw is one categorical sample, so
// both branches can never be dropped together.
enum class Drop : uint8_t { keep_both = 0, drop_rgb = 1, drop_pc = 2 };

// One outcome per batch row: drop_rgb with prob p, drop_pc with prob p,
// keep_both otherwise. Eval mode always keeps both and consumes no randomness.
std::vector<Drop> draw_drop_masks(int batch, float p, bool training, Rng& rng);

struct ModalityDropResult {
  nn::Tensor rgb;
  nn::Tensor pc;
  std::vector<Drop> masks;
};

// Replaces dropped branch rows with zeros (no rescaling).
ModalityDropResult modality_dropout(const nn::Tensor& rgb, const nn::Tensor& pc, float p,
                                    bool training, Rng& rng);

// The fusion block: modality dropout, projection of each surviving branch into
// a shared space, bidirectional multi-head cross-attention over reshaped
// tokens with residual connections, then concatenation with the state feature
// and element-wise dropout. Alternative modes skip the attention (concat) or
// the whole image branch (early_fusion, which expects features encoded from a
// color-augmented cloud).
class FusionModule {
 public:
  FusionModule(const FusionConfig& cfg, int rgb_in, int pc_in, int state_dim, Rng& rng,
               nn::ParamMap& params, const std::string& prefix);

  const FusionConfig& config() const { return cfg_; }
  FusionMode mode() const { return mode_; }
  int context_dim() const;
  int call_count() const { return calls_; }

  // Draws per-sample modality masks (when enabled), then fuses.
  nn::Tensor fuse(const nn::Tensor& rgb, const nn::Tensor& pc, const nn::Tensor& state,
                  bool training, Rng& rng) const;

  // Same pipeline with caller-supplied masks, one per batch row. The rng is
  // consumed only by element dropout.
  nn::Tensor fuse_masked(const nn::Tensor& rgb, const nn::Tensor& pc, const nn::Tensor& state,
                         const std::vector<Drop>& masks, bool training, Rng& rng) const;

  // [B, in] -> [B, token_count, token_dim] through the branch projection.
  nn::Tensor project_and_tokenize_rgb(const nn::Tensor& feat) const;
  nn::Tensor project_and_tokenize_pc(const nn::Tensor& feat) const;

  // Bidirectional multi-head scaled-dot-product attention over token grids.
  std::pair<nn::Tensor, nn::Tensor> cross_attend(const nn::Tensor& rgb_tokens,
                                                 const nn::Tensor& pc_tokens) const;

  // Attention probabilities of the most recent cross_attend call, concatenated
  // per head: head_count blocks of [B, token_count, token_count] each.
  const std::vector<float>& last_attention_rgb_to_pc() const { return attn_r2p_; }
  const std::vector<float>& last_attention_pc_to_rgb() const { return attn_p2r_; }

 private:
  nn::Tensor apply_heads(const nn::Tensor& q_tokens, const nn::Tensor& k_tokens,
                         const nn::Tensor& v_tokens, std::vector<float>& attn_log) const;
  nn::Tensor project(const nn::Tensor& feat, const nn::Tensor& w, const nn::Tensor& b,
                     int expect_in) const;

  FusionConfig cfg_;
  FusionMode mode_;
  int rgb_in_ = 0, pc_in_ = 0, state_dim_ = 0;
  nn::Tensor proj_rgb_w_, proj_rgb_b_, proj_pc_w_, proj_pc_b_;
  nn::Tensor wq_r2p_, wk_r2p_, wv_r2p_;
  nn::Tensor wq_p2r_, wk_p2r_, wv_p2r_;
  mutable std::vector<float> attn_r2p_, attn_p2r_;
  mutable int calls_ = 0;
};

}  // namespace vgdp::fus
