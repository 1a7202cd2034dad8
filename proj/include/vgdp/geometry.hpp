#pragma once

#include <cstdint>
#include <vector>

#include "vgdp/common.hpp"

namespace vgdp::geo {

struct Vec3 {
  float x = 0.0f, y = 0.0f, z = 0.0f;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(float s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
};

float dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
float norm(const Vec3& v);
Vec3 normalized(const Vec3& v);

// Squared distance accumulated in double. Farthest-point sampling and its
// test oracle both rank candidates with this exact expression, so their
// comparisons agree bit for bit.
inline double dist2(const Vec3& a, const Vec3& b) {
  const double dx = static_cast<double>(a.x) - static_cast<double>(b.x);
  const double dy = static_cast<double>(a.y) - static_cast<double>(b.y);
  const double dz = static_cast<double>(a.z) - static_cast<double>(b.z);
  return dx * dx + dy * dy + dz * dz;
}

// Row-major 3x3 matrix.
struct Mat3 {
  float m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 transposed() const {
    Mat3 t;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.m[j * 3 + i] = m[i * 3 + j];
    return t;
  }
};

Mat3 rot_z(float yaw);

// Rigid transform, used camera-to-world: p_world = R * p_cam + t.
struct Pose {
  Mat3 R;
  Vec3 t;

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  Vec3 apply_inverse(const Vec3& p) const { return R.transposed() * (p - t); }
};

// Camera frame: +z forward (view direction), +x image-right, +y image-down.
Pose look_at(const Vec3& eye, const Vec3& target);

struct Intrinsics {
  float fx = 0.0f, fy = 0.0f, cx = 0.0f, cy = 0.0f;
  int width = 0, height = 0;
};

// Camera-frame direction through the center of pixel (u, v), z component 1.
// "Depth" throughout the project is the camera-z coordinate, which makes
// rendering and backprojection exact inverses of each other.
inline Vec3 pixel_dir(const Intrinsics& k, int u, int v) {
  return {(static_cast<float>(u) + 0.5f - k.cx) / k.fx,
          (static_cast<float>(v) + 0.5f - k.cy) / k.fy, 1.0f};
}

struct RgbImage {
  int width = 0, height = 0;
  std::vector<uint8_t> data;  // row-major H*W*3

  static RgbImage create(int w, int h) { return {w, h, std::vector<uint8_t>(static_cast<size_t>(w) * h * 3, 0)}; }
};

struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> data;  // row-major H*W, camera-z in metres, 0 = no hit

  static DepthImage create(int w, int h) { return {w, h, std::vector<float>(static_cast<size_t>(w) * h, 0.0f)}; }
};

// Positions in world frame; colors (normalized to [0,1]) are carried only
// when the caller needs them and stay index-aligned with xyz.
struct PointCloud {
  std::vector<Vec3> xyz;
  std::vector<Vec3> rgb;

  int size() const { return static_cast<int>(xyz.size()); }
  bool has_rgb() const { return !rgb.empty(); }
};

struct Box {
  Vec3 lo, hi;
  Vec3 center() const { return (lo + hi) * 0.5f; }
};

// Checks R^T R = I and det R = +1 to 1e-6; throws DataError otherwise.
void validate_rotation(const Mat3& r);

// Lifts every pixel with positive depth into the world frame. Pass the RGB
// image to attach per-point colors, or nullptr for geometry only.
PointCloud backproject(const DepthImage& depth, const RgbImage* rgb, const Intrinsics& k,
                       const Pose& cam_to_world);

// Keeps exactly the points inside the closed box, order preserved.
PointCloud crop_workspace(const PointCloud& cloud, const Box& box);

// Greedy farthest-point sampling. Starts at seed_index, then repeatedly takes
// the point with the largest minimum distance to the selected set; equal
// distances resolve to the lowest index. count > N cycles the length-N
// selection. Throws UsageError on empty input or bad seed/count.
std::vector<int> farthest_point_indices(const std::vector<Vec3>& pts, int count, int seed_index);

// Brings a cloud to exactly `target` points: identity when the size already
// matches, originals plus uniform with-replacement duplicates when short, and
// farthest-point selection (seed index drawn from rng) when over.
PointCloud resample(const PointCloud& in, int target, Rng& rng);

// Centers the cloud on the workspace box (subtracts the box center; no
// scaling).
void normalize_cloud(PointCloud& cloud, const Box& workspace);

}  // namespace vgdp::geo
