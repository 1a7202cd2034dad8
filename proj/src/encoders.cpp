#include "vgdp/encoders.hpp"

#include "vgdp/nn/init.hpp"
#include "vgdp/nn/ops.hpp"

namespace vgdp::enc {

using nn::ParamMap;
using nn::Tensor;

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::paper() {
  EncoderConfig cfg;
  cfg.image_feature_dim = 512;
  cfg.image_resolution = 256;
  cfg.point_count = 4096;
  cfg.image_channels = {16, 32, 64, 128};
  return cfg;
}

void EncoderConfig::validate() const {
  if (image_feature_dim < 1 || point_feature_dim < 1 || state_feature_dim < 1 ||
      image_resolution < 1 || point_count < 1 || point_hidden1 < 1 || point_hidden2 < 1 ||
      state_hidden < 1) {
    throw UsageError("encoder config: all dimensions must be >= 1");
  }
  if (image_channels.size() != 4) {
    throw UsageError("encoder config: image encoder requires exactly 4 stage widths");
  }
  for (int c : image_channels) {
    if (c < 1) throw UsageError("encoder config: stage widths must be >= 1");
  }
}

Tensor image_to_tensor(const geo::RgbImage& img) {
  const int h = img.height, w = img.width;
  std::vector<float> data(static_cast<size_t>(3) * h * w);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        data[(static_cast<size_t>(c) * h + i) * w + j] =
            static_cast<float>(img.data[(static_cast<size_t>(i) * w + j) * 3 + c]) / 255.0f;
      }
    }
  }
  return Tensor::from(std::move(data), {3, h, w});
}

Tensor cloud_to_tensor(const geo::PointCloud& cloud, bool with_colors) {
  const int n = cloud.size();
  const int d = with_colors ? 6 : 3;
  if (with_colors && !cloud.has_rgb()) {
    throw DataError("cloud_to_tensor: colors requested but the cloud has none");
  }
  std::vector<float> data(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const geo::Vec3& p = cloud.xyz[static_cast<size_t>(i)];
    float* row = data.data() + static_cast<size_t>(i) * d;
    row[0] = p.x;
    row[1] = p.y;
    row[2] = p.z;
    if (with_colors) {
      const geo::Vec3& c = cloud.rgb[static_cast<size_t>(i)];
      row[3] = c.x;
      row[4] = c.y;
      row[5] = c.z;
    }
  }
  return Tensor::from(std::move(data), {n, d});
}

namespace {

Tensor reg(ParamMap& params, const std::string& name, Tensor t) {
  params[name] = t;
  return t;
}

}  // namespace

ImageEncoder::ImageEncoder(const EncoderConfig& cfg, Rng& rng, ParamMap& params,
                           const std::string& prefix)
    : cfg_(cfg) {
  cfg.validate();
  int ci = 3;
  for (size_t s = 0; s < cfg.image_channels.size(); ++s) {
    const int co = cfg.image_channels[s];
    const std::string stage = prefix + "stage" + std::to_string(s) + ".";
    conv_w_.push_back(reg(params, stage + "conv_w", nn::he_init(rng, {co, ci, 3, 3}, ci * 9)));
    conv_b_.push_back(reg(params, stage + "conv_b", nn::zeros_init({co})));
    skip_w_.push_back(reg(params, stage + "skip_w", nn::he_init(rng, {co, ci, 1, 1}, ci)));
    skip_b_.push_back(reg(params, stage + "skip_b", nn::zeros_init({co})));
    ci = co;
  }
  head_w_ = reg(params, prefix + "head_w", nn::he_init(rng, {ci, cfg.image_feature_dim}, ci));
  head_b_ = reg(params, prefix + "head_b", nn::zeros_init({cfg.image_feature_dim}));
}

Tensor ImageEncoder::forward(const Tensor& rgb) const {
  ++calls_;
  const int r = cfg_.image_resolution;
  if (rgb.ndim() != 4 || rgb.dim(1) != 3 || rgb.dim(2) != r || rgb.dim(3) != r) {
    throw ShapeError("image encoder: expected [B,3," + std::to_string(r) + "," +
                     std::to_string(r) + "], got " + nn::shape_str(rgb.shape()));
  }
  Tensor x = rgb;
  for (size_t s = 0; s < conv_w_.size(); ++s) {
    Tensor main = nn::conv2d(x, conv_w_[s], conv_b_[s], /*stride=*/2, /*pad=*/1);
    Tensor skip = nn::conv2d(x, skip_w_[s], skip_b_[s], /*stride=*/2, /*pad=*/0);
    x = nn::relu(nn::add(main, skip));
  }
  // Global average pool over the remaining spatial grid.
  const int b = x.dim(0), c = x.dim(1), sp = x.dim(2) * x.dim(3);
  Tensor pooled = nn::reduce_mean(nn::reshape(x, {b, c, sp}), 2);
  return nn::linear(pooled, head_w_, head_b_);
}

PointEncoder::PointEncoder(const EncoderConfig& cfg, bool with_colors, Rng& rng, ParamMap& params,
                           const std::string& prefix)
    : cfg_(cfg), in_dim_(with_colors ? 6 : 3) {
  cfg.validate();
  const int h1 = cfg.point_hidden1, h2 = cfg.point_hidden2;
  w1_ = reg(params, prefix + "w1", nn::he_init(rng, {in_dim_, h1}, in_dim_));
  b1_ = reg(params, prefix + "b1", nn::zeros_init({h1}));
  ln1_g_ = reg(params, prefix + "ln1_g", nn::ones_init({h1}));
  ln1_b_ = reg(params, prefix + "ln1_b", nn::zeros_init({h1}));
  w2_ = reg(params, prefix + "w2", nn::he_init(rng, {h1, h2}, h1));
  b2_ = reg(params, prefix + "b2", nn::zeros_init({h2}));
  ln2_g_ = reg(params, prefix + "ln2_g", nn::ones_init({h2}));
  ln2_b_ = reg(params, prefix + "ln2_b", nn::zeros_init({h2}));
  head_w_ = reg(params, prefix + "head_w", nn::he_init(rng, {h2, cfg.point_feature_dim}, h2));
  head_b_ = reg(params, prefix + "head_b", nn::zeros_init({cfg.point_feature_dim}));
}

Tensor PointEncoder::forward(const Tensor& points) const {
  ++calls_;
  const int n = cfg_.point_count;
  if (points.ndim() != 3 || points.dim(1) != n || points.dim(2) != in_dim_) {
    throw ShapeError("point encoder: expected [B," + std::to_string(n) + "," +
                     std::to_string(in_dim_) + "], got " + nn::shape_str(points.shape()));
  }
  const int b = points.dim(0);
  // The per-point MLP runs over a flattened [B*N, d] view for one large GEMM.
  Tensor flat = nn::reshape(points, {b * n, in_dim_});
  Tensor h1 = nn::relu(nn::layer_norm(nn::linear(flat, w1_, b1_), ln1_g_, ln1_b_));
  Tensor h2 = nn::relu(nn::layer_norm(nn::linear(h1, w2_, b2_), ln2_g_, ln2_b_));
  Tensor pooled = nn::reduce_max(nn::reshape(h2, {b, n, cfg_.point_hidden2}), 1);
  return nn::linear(pooled, head_w_, head_b_);
}

StateEncoder::StateEncoder(const EncoderConfig& cfg, int state_dim, Rng& rng, ParamMap& params,
                           const std::string& prefix)
    : state_dim_(state_dim), feature_dim_(cfg.state_feature_dim) {
  cfg.validate();
  if (state_dim < 1) throw UsageError("state encoder: state_dim must be >= 1");
  const int h = cfg.state_hidden;
  w1_ = reg(params, prefix + "w1", nn::he_init(rng, {state_dim, h}, state_dim));
  b1_ = reg(params, prefix + "b1", nn::zeros_init({h}));
  w2_ = reg(params, prefix + "w2", nn::he_init(rng, {h, cfg.state_feature_dim}, h));
  b2_ = reg(params, prefix + "b2", nn::zeros_init({cfg.state_feature_dim}));
}

Tensor StateEncoder::forward(const Tensor& state) const {
  ++calls_;
  if (state.ndim() != 2 || state.dim(1) != state_dim_) {
    throw ShapeError("state encoder: expected [B," + std::to_string(state_dim_) + "], got " +
                     nn::shape_str(state.shape()));
  }
  return nn::linear(nn::relu(nn::linear(state, w1_, b1_)), w2_, b2_);
}

}  // namespace vgdp::enc
