#include "vgdp/geometry.hpp"

#include <cmath>
#include <limits>

namespace vgdp::geo {

float dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

float norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

Vec3 normalized(const Vec3& v) {
  const float n = norm(v);
  if (n < 1e-12f) throw NumericalError("normalized: zero-length vector");
  return v * (1.0f / n);
}

Mat3 rot_z(float yaw) {
  const float c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r.m[0] = c;
  r.m[1] = -s;
  r.m[3] = s;
  r.m[4] = c;
  return r;
}

Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 fwd = normalized(target - eye);
  Vec3 up{0.0f, 0.0f, 1.0f};
  if (std::abs(dot(fwd, up)) > 0.999f) up = {0.0f, 1.0f, 0.0f};  // near-vertical view
  const Vec3 right = normalized(cross(fwd, up));
  const Vec3 down = cross(fwd, right);  // completes a right-handed frame, +y image-down
  Pose p;
  p.R.m[0] = right.x;
  p.R.m[3] = right.y;
  p.R.m[6] = right.z;
  p.R.m[1] = down.x;
  p.R.m[4] = down.y;
  p.R.m[7] = down.z;
  p.R.m[2] = fwd.x;
  p.R.m[5] = fwd.y;
  p.R.m[8] = fwd.z;
  p.t = eye;
  return p;
}

void validate_rotation(const Mat3& r) {
  // R^T R = I
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      float acc = 0.0f;
      for (int l = 0; l < 3; ++l) acc += r.m[l * 3 + i] * r.m[l * 3 + j];
      const float expect = (i == j) ? 1.0f : 0.0f;
      if (std::abs(acc - expect) > 1e-6f) {
        throw DataError("rotation is not orthonormal");
      }
    }
  }
  const float det = r.m[0] * (r.m[4] * r.m[8] - r.m[5] * r.m[7]) -
                    r.m[1] * (r.m[3] * r.m[8] - r.m[5] * r.m[6]) +
                    r.m[2] * (r.m[3] * r.m[7] - r.m[4] * r.m[6]);
  if (std::abs(det - 1.0f) > 1e-6f) {
    throw DataError("rotation determinant is not +1");
  }
}

PointCloud backproject(const DepthImage& depth, const RgbImage* rgb, const Intrinsics& k,
                       const Pose& cam_to_world) {
  validate_rotation(cam_to_world.R);
  if (depth.width != k.width || depth.height != k.height) {
    throw DataError("backproject: depth image " + std::to_string(depth.width) + "x" +
                    std::to_string(depth.height) + " does not match intrinsics " +
                    std::to_string(k.width) + "x" + std::to_string(k.height));
  }
  if (rgb && (rgb->width != depth.width || rgb->height != depth.height)) {
    throw DataError("backproject: rgb image size does not match depth image");
  }
  PointCloud cloud;
  cloud.xyz.reserve(depth.data.size());
  if (rgb) cloud.rgb.reserve(depth.data.size());
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const float z = depth.data[static_cast<size_t>(v) * k.width + u];
      if (z <= 0.0f) continue;
      const Vec3 dir = pixel_dir(k, u, v);
      cloud.xyz.push_back(cam_to_world.apply(dir * z));
      if (rgb) {
        const size_t base = (static_cast<size_t>(v) * k.width + u) * 3;
        cloud.rgb.push_back({static_cast<float>(rgb->data[base]) / 255.0f,
                             static_cast<float>(rgb->data[base + 1]) / 255.0f,
                             static_cast<float>(rgb->data[base + 2]) / 255.0f});
      }
    }
  }
  return cloud;
}

std::vector<int> farthest_point_indices(const std::vector<Vec3>& pts, int count, int seed_index) {
  const int n = static_cast<int>(pts.size());
  if (n == 0) throw UsageError("farthest_point_indices: empty point set");
  if (count < 1) throw UsageError("farthest_point_indices: count must be positive");
  if (seed_index < 0 || seed_index >= n) {
    throw UsageError("farthest_point_indices: seed index " + std::to_string(seed_index) +
                     " out of range for " + std::to_string(n) + " points");
  }
  const int rounds = std::min(count, n);
  std::vector<int> selected;
  selected.reserve(static_cast<size_t>(count));
  std::vector<double> min_d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<size_t>(n), 0);
  int current = seed_index;
  selected.push_back(current);
  taken[static_cast<size_t>(current)] = 1;
  for (int round = 1; round < rounds; ++round) {
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      const double d2 = dist2(pts[static_cast<size_t>(i)], pts[static_cast<size_t>(current)]);
      if (d2 < min_d2[static_cast<size_t>(i)]) min_d2[static_cast<size_t>(i)] = d2;
      if (!taken[static_cast<size_t>(i)] &&
          min_d2[static_cast<size_t>(i)] > best_d2) {  // strict: ties keep the lowest index
        best_d2 = min_d2[static_cast<size_t>(i)];
        best = i;
      }
    }
    selected.push_back(best);
    taken[static_cast<size_t>(best)] = 1;
    current = best;
  }
  // count > N: repeat the full selection cyclically.
  for (int i = rounds; i < count; ++i) {
    selected.push_back(selected[static_cast<size_t>(i % rounds)]);
  }
  return selected;
}

PointCloud crop_workspace(const PointCloud& cloud, const Box& box) {
  PointCloud out;
  for (size_t i = 0; i < cloud.xyz.size(); ++i) {
    const Vec3& p = cloud.xyz[i];
    if (p.x < box.lo.x || p.x > box.hi.x || p.y < box.lo.y || p.y > box.hi.y || p.z < box.lo.z ||
        p.z > box.hi.z) {
      continue;
    }
    out.xyz.push_back(p);
    if (cloud.has_rgb()) out.rgb.push_back(cloud.rgb[i]);
  }
  return out;
}

PointCloud resample(const PointCloud& in, int target, Rng& rng) {
  if (target < 1) throw UsageError("resample: target must be positive");
  if (in.size() == 0) throw DataError("resample: empty point cloud");
  if (in.has_rgb() && in.rgb.size() != in.xyz.size()) {
    throw DataError("resample: rgb/xyz length mismatch");
  }
  const int n = in.size();
  if (n == target) return in;

  PointCloud out;
  out.xyz.reserve(static_cast<size_t>(target));
  if (in.has_rgb()) out.rgb.reserve(static_cast<size_t>(target));
  auto push = [&](int idx) {
    out.xyz.push_back(in.xyz[static_cast<size_t>(idx)]);
    if (in.has_rgb()) out.rgb.push_back(in.rgb[static_cast<size_t>(idx)]);
  };
  if (n < target) {
    for (int i = 0; i < n; ++i) push(i);
    for (int i = n; i < target; ++i) push(rng.uniform_int(n));
  } else {
    const int seed_index = rng.uniform_int(n);
    for (int idx : farthest_point_indices(in.xyz, target, seed_index)) push(idx);
  }
  return out;
}

void normalize_cloud(PointCloud& cloud, const Box& workspace) {
  const Vec3 c = workspace.center();
  for (auto& p : cloud.xyz) p = p - c;
}

}  // namespace vgdp::geo
