#pragma once

#include <string>
#include <vector>

#include "vgdp/common.hpp"
#include "vgdp/geometry.hpp"
#include "vgdp/nn/tensor.hpp"

namespace vgdp::enc {

struct EncoderConfig {
  int image_feature_dim = 128;
  int point_feature_dim = 64;
  int state_feature_dim = 64;
  int image_resolution = 64;
  int point_count = 256;
  // Stage widths of the image encoder (4 stride-2 stages).
  std::vector<int> image_channels = {8, 16, 32, 64};
  // Per-point MLP widths before the max-pool.
  int point_hidden1 = 64;
  int point_hidden2 = 128;
  int state_hidden = 64;

  static EncoderConfig desk();
  static EncoderConfig paper();
  void validate() const;
};

// Converts an 8-bit image to a [3, H, W] tensor scaled to [0, 1].
nn::Tensor image_to_tensor(const geo::RgbImage& img);

// Converts a cloud to [N, 3] (or [N, 6] with colors appended per point).
nn::Tensor cloud_to_tensor(const geo::PointCloud& cloud, bool with_colors);

// Residual convolutional image encoder: 4 stages of
// relu(conv3x3/s2 + conv1x1/s2 shortcut), then global average pooling and an
// affine head. Takes [B, 3, R, R], returns [B, image_feature_dim].
class ImageEncoder {
 public:
  ImageEncoder(const EncoderConfig& cfg, Rng& rng, nn::ParamMap& params,
               const std::string& prefix);

  nn::Tensor forward(const nn::Tensor& rgb) const;
  int call_count() const { return calls_; }

 private:
  EncoderConfig cfg_;
  std::vector<nn::Tensor> conv_w_, conv_b_, skip_w_, skip_b_;
  nn::Tensor head_w_, head_b_;
  mutable int calls_ = 0;
};

// Permutation-invariant point encoder: shared per-point MLP
// (in -> 64 -> 128 with layer norm + relu), max over points, affine head.
// Takes [B, N, in_dim], returns [B, point_feature_dim].
class PointEncoder {
 public:
  PointEncoder(const EncoderConfig& cfg, bool with_colors, Rng& rng, nn::ParamMap& params,
               const std::string& prefix);

  nn::Tensor forward(const nn::Tensor& points) const;
  int in_dim() const { return in_dim_; }
  int call_count() const { return calls_; }

 private:
  EncoderConfig cfg_;
  int in_dim_;
  nn::Tensor w1_, b1_, ln1_g_, ln1_b_, w2_, b2_, ln2_g_, ln2_b_, head_w_, head_b_;
  mutable int calls_ = 0;
};

// Two-layer state MLP. Takes [B, state_dim], returns [B, state_feature_dim].
class StateEncoder {
 public:
  StateEncoder(const EncoderConfig& cfg, int state_dim, Rng& rng, nn::ParamMap& params,
               const std::string& prefix);

  nn::Tensor forward(const nn::Tensor& state) const;
  int state_dim() const { return state_dim_; }
  int call_count() const { return calls_; }

 private:
  int state_dim_;
  int feature_dim_;
  nn::Tensor w1_, b1_, w2_, b2_;
  mutable int calls_ = 0;
};

}  // namespace vgdp::enc
