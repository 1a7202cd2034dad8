#include "vgdp/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace vgdp::nn {

namespace {

constexpr char kMagic[8] = {'V', 'G', 'D', 'P', 'C', 'K', '0', '1'};

void write_exact(std::ofstream& out, const void* data, size_t n, const std::string& path) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw DataError("checkpoint write failed: " + path);
}

void read_exact(std::ifstream& in, void* data, size_t n, const std::string& path,
                const std::string& what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw DataError("truncated checkpoint " + path + ": short read in " + what + " at offset " +
                    std::to_string(static_cast<long long>(in.tellg()) < 0
                                       ? 0
                                       : static_cast<long long>(in.tellg())));
  }
}

void write_floats(std::ofstream& out, const std::vector<float>& v, const std::string& path) {
  write_exact(out, v.data(), v.size() * sizeof(float), path);
}

void read_floats(std::ifstream& in, std::vector<float>& v, size_t count, const std::string& path,
                 const std::string& what) {
  v.resize(count);
  read_exact(in, v.data(), count * sizeof(float), path, what);
}

nlohmann::json open_and_read_meta(std::ifstream& in, const std::string& path) {
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  read_exact(in, magic, sizeof(magic), path, "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  uint8_t len_bytes[4];
  read_exact(in, len_bytes, sizeof(len_bytes), path, "metadata length");
  const uint32_t meta_len = static_cast<uint32_t>(len_bytes[0]) |
                            (static_cast<uint32_t>(len_bytes[1]) << 8) |
                            (static_cast<uint32_t>(len_bytes[2]) << 16) |
                            (static_cast<uint32_t>(len_bytes[3]) << 24);
  std::string meta_str(meta_len, '\0');
  read_exact(in, meta_str.data(), meta_len, path, "metadata");
  nlohmann::json meta = nlohmann::json::parse(meta_str, nullptr, /*allow_exceptions=*/false);
  if (meta.is_discarded()) throw DataError("checkpoint metadata is not valid JSON: " + path);
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamMap& params, const Adam* optim,
                     const nlohmann::json& meta) {
  nlohmann::json full = meta;
  full["format"] = "VGDPCK01";
  full["dtype"] = "f32";
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& [name, p] : params) {
    plist.push_back({{"name", name}, {"shape", p.shape()}});
  }
  full["params"] = std::move(plist);
  if (optim) {
    full["optimizer"] = {{"type", "adam"}, {"step", optim->step_count()}};
  }
  const std::string meta_str = full.dump();
  if (meta_str.size() > 0xffffffffull) throw DataError("checkpoint metadata too large");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  write_exact(out, kMagic, sizeof(kMagic), path);
  const uint32_t meta_len = static_cast<uint32_t>(meta_str.size());
  const uint8_t len_bytes[4] = {
      static_cast<uint8_t>(meta_len & 0xff), static_cast<uint8_t>((meta_len >> 8) & 0xff),
      static_cast<uint8_t>((meta_len >> 16) & 0xff), static_cast<uint8_t>((meta_len >> 24) & 0xff)};
  write_exact(out, len_bytes, sizeof(len_bytes), path);
  write_exact(out, meta_str.data(), meta_str.size(), path);
  for (const auto& [name, p] : params) write_floats(out, p.data(), path);
  if (optim) {
    Adam* mut = const_cast<Adam*>(optim);
    for (const auto& [name, p] : params) write_floats(out, mut->moment1().at(name), path);
    for (const auto& [name, p] : params) write_floats(out, mut->moment2().at(name), path);
  }
  out.close();
  if (!out) throw DataError("checkpoint write failed: " + path);
}

nlohmann::json load_checkpoint(const std::string& path, ParamMap& params, Adam* optim) {
  std::ifstream in(path, std::ios::binary);
  nlohmann::json meta = open_and_read_meta(in, path);

  if (!meta.contains("params") || !meta["params"].is_array()) {
    throw DataError("checkpoint metadata missing parameter list: " + path);
  }
  const auto& plist = meta["params"];
  if (plist.size() != params.size()) {
    throw DataError("checkpoint " + path + " declares " + std::to_string(plist.size()) +
                    " parameters, model has " + std::to_string(params.size()));
  }
  std::vector<std::string> order;
  order.reserve(plist.size());
  for (const auto& entry : plist) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    auto it = params.find(name);
    if (it == params.end()) {
      throw DataError("checkpoint " + path + " contains unknown parameter '" + name + "'");
    }
    if (it->second.shape() != shape) {
      throw DataError("checkpoint " + path + ": parameter '" + name + "' has shape " +
                      shape_str(shape) + ", model expects " + shape_str(it->second.shape()));
    }
    order.push_back(name);
  }
  for (const auto& name : order) {
    auto& p = params.at(name);
    read_floats(in, p.data(), static_cast<size_t>(p.size()), path, "parameter '" + name + "'");
  }
  if (optim) {
    if (!meta.contains("optimizer")) {
      throw DataError("checkpoint " + path + " has no optimizer state but resume requires it");
    }
    for (const auto& name : order) {
      auto& m = optim->moment1().at(name);
      read_floats(in, m, m.size(), path, "adam moment1 '" + name + "'");
    }
    for (const auto& name : order) {
      auto& v = optim->moment2().at(name);
      read_floats(in, v, v.size(), path, "adam moment2 '" + name + "'");
    }
    optim->set_step_count(meta["optimizer"].at("step").get<int64_t>());
  } else if (meta.contains("optimizer")) {
    // Weights-only load from a resumable checkpoint: skip the moment blobs.
    size_t moment_bytes = 0;
    for (const auto& name : order) {
      moment_bytes += 2 * static_cast<size_t>(params.at(name).size()) * sizeof(float);
    }
    const std::streamoff pos = in.tellg();
    in.seekg(0, std::ios::end);
    const std::streamoff end = in.tellg();
    if (end - pos < static_cast<std::streamoff>(moment_bytes)) {
      throw DataError("truncated checkpoint " + path + ": short read in optimizer state");
    }
    in.seekg(pos + static_cast<std::streamoff>(moment_bytes));
  }
  char probe;
  in.read(&probe, 1);
  if (in.gcount() != 0) throw DataError("checkpoint " + path + " has trailing bytes");
  return meta;
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return open_and_read_meta(in, path);
}

}  // namespace vgdp::nn
