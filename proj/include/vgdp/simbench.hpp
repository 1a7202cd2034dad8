#pragma once

#include <array>
#include <string>
#include <vector>

#include "vgdp/common.hpp"
#include "vgdp/geometry.hpp"

namespace vgdp::sim {

enum class Level { L0, L1, L2 };
enum class Split { iid, ood };

Level parse_level(const std::string& name);
Split parse_split(const std::string& name);
std::string level_name(Level level);
std::string split_name(Split split);

struct Interval {
  double lo = 0.0, hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
  double mid() const { return 0.5 * (lo + hi); }
};

bool disjoint(const Interval& a, const Interval& b);

// Per-split randomization ranges. Hues are HSV hue in [0,1); table factors are
// magnitudes with the sign/direction drawn separately; the camera pool holds
// indices into the fixed five-pose rig.
struct FactorRanges {
  Interval background_hue, table_hue, target_hue, distractor_hue, goal_hue;
  Interval table_shift;  // meters
  Interval table_yaw;    // radians
  std::vector<int> camera_pool;
};

struct RandomizationSpec {
  Level level = Level::L0;
  Split split = Split::iid;
  FactorRanges iid, ood;

  static RandomizationSpec make(Level level, Split split);
  // IID and OOD ranges must be disjoint for every factor.
  void validate() const;
  const FactorRanges& active() const { return split == Split::iid ? iid : ood; }
};

struct TaskSpec {
  std::string name;
  double threshold = 0.0;  // meters, closed boundary
  int step_limit = 0;
  int action_dim = 4;  // (dx, dy, dz, dgrip)
  int state_dim = 4;   // (x, y, z, grip)

  static TaskSpec get(const std::string& name);
  static const std::vector<std::string>& names();
  void validate() const;
};

struct Sphere {
  geo::Vec3 center;
  float radius = 0.0f;
  geo::Vec3 albedo;
  bool is_target = false;
};

struct BoxObj {
  geo::Vec3 center;
  geo::Vec3 half;
  float yaw = 0.0f;
  geo::Vec3 albedo;
  bool is_target = false;
};

// Flat colored disk on the table top; visible to the RGB channel only (it has
// no height, so depth records the table surface).
struct Decal {
  geo::Vec3 center;  // z is the table-top height
  float radius = 0.0f;
  geo::Vec3 albedo;
};

struct CameraModel {
  geo::Intrinsics intrinsics;
  geo::Pose pose;  // camera-to-world
};

struct Scene {
  BoxObj table;
  std::vector<Sphere> spheres;
  std::vector<BoxObj> boxes;
  std::vector<Decal> decals;
  geo::Vec3 background;
  geo::Vec3 light_dir;  // unit vector, direction of travel of the light
  float light_intensity = 1.0f;
  CameraModel camera;
};

// The five-pose camera rig (all looking at the workspace center, elevations
// between 30 and 60 degrees). Poses 0-2 are the training pool, 3-4 held out.
CameraModel camera_rig(int index);
int camera_rig_size();

struct RenderOut {
  geo::RgbImage rgb;
  geo::DepthImage depth;
};

RenderOut render(const Scene& scene);

// Signed distance from p to the union of the scene's solid geometry (table,
// spheres, boxes) — the oracle for depth-map consistency checks.
float scene_sdf(const Scene& scene, const geo::Vec3& p);

struct SimState {
  TaskSpec task;
  Level level = Level::L0;
  Split split = Split::iid;
  Scene base;  // table, decals, camera, light, background; no dynamic bodies
  std::vector<Sphere> spheres;
  std::vector<BoxObj> boxes;
  int target_sphere = -1;
  int push_box = -1;
  geo::Vec3 goal;  // on the table plane where the task uses one
  geo::Vec3 effector;
  double grip = 0.0;
  bool attached = false;
  int step_count = 0;
  bool terminated = false;
  bool success = false;
};

// Factor draw order (training-split ranges unless noted): hues (background,
// table, target, distractor, goal), table shift magnitude + direction, table
// yaw magnitude + sign, camera pool pick (L2 only), then task layout. L0
// consumes no randomness at all.
SimState make_episode(const TaskSpec& task, const RandomizationSpec& rand, Rng& rng);

// Scene with the dynamic bodies and the effector marker merged in.
Scene assemble(const SimState& state);
RenderOut render_state(const SimState& state);

std::vector<float> observe_state(const SimState& state);

// Applies one control step: per-axis clamp to [-1,1], position delta
// action*max_delta, grip integration, contact handling, success bookkeeping.
void step(SimState& state, const std::vector<float>& action);

bool check_success(const SimState& state);

// Scripted demonstrator: proportional controller toward phase waypoints.
std::vector<float> expert_action(const SimState& state);
geo::Vec3 expert_waypoint(const SimState& state);

// Motion scale shared by the sim and the experts.
constexpr double kMaxDelta = 0.02;
constexpr double kGripRate = 0.25;
constexpr double kEffectorRadius = 0.02;
constexpr double kGraspRadius = 0.045;

}  // namespace vgdp::sim
