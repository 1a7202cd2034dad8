#pragma once

#include <string>

#include <json.hpp>

#include "vgdp/nn/optim.hpp"
#include "vgdp/nn/tensor.hpp"

namespace vgdp::nn {

// Checkpoint container:
//   bytes 0-7   magic "VGDPCK01"
//   bytes 8-11  u32 little-endian metadata length
//   metadata    UTF-8 JSON; lists parameter names/shapes in blob order plus
//               caller metadata (config hash, variant, normalization stats,
//               seed, training step)
//   payload     raw little-endian float32 blobs: one per parameter in the
//               declared order, then (if optimizer state is present) all Adam
//               first moments, then all second moments, in the same order.
//
// `meta` carries caller fields; the writer adds "format", "dtype", "params"
// and "optimizer". Loading validates names and shapes against the live
// parameter map and throws DataError with the offending name on mismatch.

void save_checkpoint(const std::string& path, const ParamMap& params, const Adam* optim,
                     const nlohmann::json& meta);

// Fills `params` in place; returns the stored metadata. If `optim` is given,
// the checkpoint must contain optimizer state (moments and step counter).
nlohmann::json load_checkpoint(const std::string& path, ParamMap& params, Adam* optim);

// Reads only the metadata block (for inspection without a live model).
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace vgdp::nn
