#include "vgdp/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vgdp::sim {

using geo::Vec3;

Level parse_level(const std::string& name) {
  if (name == "L0") return Level::L0;
  if (name == "L1") return Level::L1;
  if (name == "L2") return Level::L2;
  throw UsageError("unknown randomization level: " + name);
}

Split parse_split(const std::string& name) {
  if (name == "iid") return Split::iid;
  if (name == "ood") return Split::ood;
  throw UsageError("unknown split: " + name);
}

std::string level_name(Level level) {
  switch (level) {
    case Level::L0: return "L0";
    case Level::L1: return "L1";
    case Level::L2: return "L2";
  }
  throw UsageError("invalid level value");
}

std::string split_name(Split split) { return split == Split::iid ? "iid" : "ood"; }

bool disjoint(const Interval& a, const Interval& b) { return a.hi < b.lo || b.hi < a.lo; }

RandomizationSpec RandomizationSpec::make(Level level, Split split) {
  RandomizationSpec spec;
  spec.level = level;
  spec.split = split;
  spec.iid.background_hue = {0.55, 0.65};
  spec.iid.table_hue = {0.08, 0.14};
  spec.iid.target_hue = {0.95, 0.99};
  spec.iid.distractor_hue = {0.30, 0.42};
  spec.iid.goal_hue = {0.28, 0.36};
  spec.iid.table_shift = {0.00, 0.03};
  spec.iid.table_yaw = {0.00, 0.25};
  spec.iid.camera_pool = {0, 1, 2};
  spec.ood.background_hue = {0.05, 0.15};
  spec.ood.table_hue = {0.45, 0.55};
  spec.ood.target_hue = {0.90, 0.935};
  spec.ood.distractor_hue = {0.55, 0.68};
  spec.ood.goal_hue = {0.40, 0.48};
  spec.ood.table_shift = {0.05, 0.09};
  spec.ood.table_yaw = {0.50, 0.90};
  spec.ood.camera_pool = {3, 4};
  spec.validate();
  return spec;
}

void RandomizationSpec::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("randomization ranges: iid/ood overlap on ") + what);
  };
  need(disjoint(iid.background_hue, ood.background_hue), "background_hue");
  need(disjoint(iid.table_hue, ood.table_hue), "table_hue");
  need(disjoint(iid.target_hue, ood.target_hue), "target_hue");
  need(disjoint(iid.distractor_hue, ood.distractor_hue), "distractor_hue");
  need(disjoint(iid.goal_hue, ood.goal_hue), "goal_hue");
  need(disjoint(iid.table_shift, ood.table_shift), "table_shift");
  need(disjoint(iid.table_yaw, ood.table_yaw), "table_yaw");
  for (int i : iid.camera_pool) {
    for (int j : ood.camera_pool) {
      if (i == j) throw UsageError("randomization ranges: camera pools share pose " + std::to_string(i));
    }
  }
  if (iid.camera_pool.empty() || ood.camera_pool.empty()) {
    throw UsageError("randomization ranges: camera pools must be non-empty");
  }
}

void TaskSpec::validate() const {
  if (threshold <= 0.0) throw UsageError("task threshold must be positive");
  if (step_limit < 1) throw UsageError("task step limit must be at least 1");
  if (action_dim != 4 || state_dim != 4) throw UsageError("desk tasks use 4-d state and action");
}

const std::vector<std::string>& TaskSpec::names() {
  static const std::vector<std::string> n{"reach_target", "push_block", "pick_place"};
  return n;
}

TaskSpec TaskSpec::get(const std::string& name) {
  TaskSpec t;
  t.name = name;
  if (name == "reach_target") {
    t.threshold = 0.03;
    t.step_limit = 60;
  } else if (name == "push_block") {
    t.threshold = 0.05;
    t.step_limit = 80;
  } else if (name == "pick_place") {
    t.threshold = 0.05;
    t.step_limit = 100;
  } else {
    throw UsageError("unknown task: " + name);
  }
  t.validate();
  return t;
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr float kTableHalf = 0.4f;
constexpr float kTableThick = 0.02f;
constexpr double kHoverZ = 0.12;
constexpr double kGraspZ = 0.045;
constexpr double kPushZ = 0.03;
constexpr float kSphereR = 0.03f;
constexpr float kPickR = 0.025f;
constexpr float kBlockHalf = 0.03f;

Vec3 hsv_to_rgb(double h, double s, double v) {
  h -= std::floor(h);
  const double hh = h * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  double r, g, b;
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

struct Vec2 {
  double x = 0.0, y = 0.0;
};

Vec2 rot2(double yaw, const Vec2& p) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

double dist2d(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

struct TablePose {
  double tx = 0.0, ty = 0.0, yaw = 0.0;

  Vec2 to_world(const Vec2& p) const {
    Vec2 r = rot2(yaw, p);
    return {r.x + tx, r.y + ty};
  }
  Vec2 to_table(const Vec2& p) const { return rot2(-yaw, Vec2{p.x - tx, p.y - ty}); }
};

struct Factors {
  Vec3 background, table, target, distractor, goal;
  TablePose pose;
  int camera = 0;
};

Factors canonical_factors(const FactorRanges& iid) {
  Factors f;
  f.background = hsv_to_rgb(iid.background_hue.mid(), 0.35, 0.80);
  f.table = hsv_to_rgb(iid.table_hue.mid(), 0.50, 0.65);
  f.target = hsv_to_rgb(iid.target_hue.mid(), 0.85, 0.85);
  f.distractor = hsv_to_rgb(iid.distractor_hue.mid(), 0.70, 0.75);
  f.goal = hsv_to_rgb(iid.goal_hue.mid(), 0.80, 0.70);
  return f;
}

Factors draw_factors(const RandomizationSpec& spec, Rng& rng) {
  const FactorRanges& r = spec.active();
  Factors f;
  f.background = hsv_to_rgb(r.background_hue.sample(rng), 0.35, 0.80);
  f.table = hsv_to_rgb(r.table_hue.sample(rng), 0.50, 0.65);
  f.target = hsv_to_rgb(r.target_hue.sample(rng), 0.85, 0.85);
  f.distractor = hsv_to_rgb(r.distractor_hue.sample(rng), 0.70, 0.75);
  f.goal = hsv_to_rgb(r.goal_hue.sample(rng), 0.80, 0.70);
  const double mag = r.table_shift.sample(rng);
  const double ang = rng.uniform(0.0, 2.0 * kPi);
  f.pose.tx = mag * std::cos(ang);
  f.pose.ty = mag * std::sin(ang);
  const double yaw_mag = r.table_yaw.sample(rng);
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  f.pose.yaw = sign * yaw_mag;
  if (spec.level == Level::L2) {
    f.camera = r.camera_pool[static_cast<size_t>(rng.uniform_int(
        static_cast<int>(r.camera_pool.size())))];
  }
  return f;
}

}  // namespace

CameraModel camera_rig(int index) {
  struct AzEl {
    double az_deg, el_deg;
  };
  static const AzEl rig[5] = {{-90.0, 45.0}, {-55.0, 34.0}, {-125.0, 56.0},
                              {-40.0, 31.0}, {-140.0, 59.0}};
  if (index < 0 || index >= 5) throw UsageError("camera rig index out of range");
  const double az = rig[index].az_deg * kPi / 180.0;
  const double el = rig[index].el_deg * kPi / 180.0;
  const double d = 0.95;
  const Vec3 eye{static_cast<float>(d * std::cos(el) * std::cos(az)),
                 static_cast<float>(d * std::cos(el) * std::sin(az)),
                 static_cast<float>(d * std::sin(el))};
  CameraModel cam;
  cam.intrinsics = geo::Intrinsics{70.0f, 70.0f, 32.0f, 32.0f, 64, 64};
  cam.pose = geo::look_at(eye, Vec3{0.0f, 0.0f, 0.0f});
  return cam;
}

int camera_rig_size() { return 5; }

SimState make_episode(const TaskSpec& task, const RandomizationSpec& rand, Rng& rng) {
  task.validate();
  rand.validate();
  SimState s;
  s.task = task;
  s.level = rand.level;
  s.split = rand.split;

  const bool fixed = rand.level == Level::L0;
  Factors f = fixed ? canonical_factors(rand.iid) : draw_factors(rand, rng);

  s.base.table = BoxObj{Vec3{static_cast<float>(f.pose.tx), static_cast<float>(f.pose.ty),
                             -kTableThick},
                        Vec3{kTableHalf, kTableHalf, kTableThick},
                        static_cast<float>(f.pose.yaw), f.table, false};
  s.base.background = f.background;
  s.base.light_dir = geo::normalized(Vec3{0.35f, 0.25f, -0.9f});
  s.base.light_intensity = 1.0f;
  s.base.camera = camera_rig(f.camera);

  auto jitter = [&](Vec2 p) -> Vec2 {
    if (fixed) return p;
    return {p.x + rng.uniform(-0.04, 0.04), p.y + rng.uniform(-0.04, 0.04)};
  };
  auto on_table = [&](const Vec2& table_frame, float z) -> Vec3 {
    Vec2 w = f.pose.to_world(table_frame);
    return {static_cast<float>(w.x), static_cast<float>(w.y), z};
  };

  if (task.name == "reach_target") {
    const Vec2 slots[3] = {{0.15, 0.12}, {-0.18, 0.05}, {0.05, -0.16}};
    Vec2 placed[3];
    for (int i = 0; i < 3; ++i) placed[i] = jitter(slots[i]);
    const int target = fixed ? 0 : rng.uniform_int(3);
    for (int i = 0; i < 3; ++i) {
      Sphere ball{on_table(placed[i], kSphereR), kSphereR,
                  i == target ? f.target : f.distractor, i == target};
      s.spheres.push_back(ball);
    }
    s.target_sphere = target;
  } else if (task.name == "push_block") {
    const Vec2 block = jitter({-0.04, 0.06});
    const Vec2 goal = jitter({0.17, -0.13});
    s.boxes.push_back(BoxObj{on_table(block, kBlockHalf),
                             Vec3{kBlockHalf, kBlockHalf, kBlockHalf},
                             static_cast<float>(f.pose.yaw), f.table, true});
    s.push_box = 0;
    const Vec3 goal_world = on_table(goal, 0.0f);
    s.goal = goal_world;
    s.base.decals.push_back(Decal{goal_world, 0.05f, f.goal});
  } else if (task.name == "pick_place") {
    const Vec2 target = jitter({-0.12, 0.10});
    const Vec2 goal = jitter({0.15, -0.12});
    s.spheres.push_back(Sphere{on_table(target, kPickR), kPickR, f.target, true});
    s.target_sphere = 0;
    const Vec3 goal_world = on_table(goal, 0.0f);
    s.goal = goal_world;
    s.base.decals.push_back(Decal{goal_world, 0.05f, f.goal});
  } else {
    throw UsageError("unknown task: " + task.name);
  }

  s.effector = Vec3{0.0f, 0.25f, 0.10f};
  return s;
}

Scene assemble(const SimState& state) {
  Scene scene = state.base;
  scene.spheres = state.spheres;
  for (const BoxObj& b : state.boxes) scene.boxes.push_back(b);
  scene.spheres.push_back(Sphere{state.effector, static_cast<float>(kEffectorRadius),
                                 Vec3{0.75f, 0.75f, 0.78f}, false});
  return scene;
}

RenderOut render_state(const SimState& state) { return render(assemble(state)); }

namespace {

struct Hit {
  float t = std::numeric_limits<float>::infinity();
  Vec3 normal;
  Vec3 albedo;
  bool is_table = false;
};

bool hit_sphere(const Vec3& o, const Vec3& d, const Sphere& s, float& t, Vec3& n) {
  const Vec3 oc = o - s.center;
  const float a = geo::dot(d, d);
  const float b = 2.0f * geo::dot(d, oc);
  const float c = geo::dot(oc, oc) - s.radius * s.radius;
  const float disc = b * b - 4.0f * a * c;
  if (disc < 0.0f) return false;
  const float root = std::sqrt(disc);
  float tt = (-b - root) / (2.0f * a);
  if (tt < 1e-4f) tt = (-b + root) / (2.0f * a);
  if (tt < 1e-4f) return false;
  t = tt;
  const Vec3 p = o + d * tt;
  n = normalized(p - s.center);
  return true;
}

bool hit_box(const Vec3& o, const Vec3& d, const BoxObj& box, float& t, Vec3& n) {
  const geo::Mat3 to_local = geo::rot_z(-box.yaw);
  const Vec3 ol = to_local * (o - box.center);
  const Vec3 dl = to_local * d;
  float tnear = -std::numeric_limits<float>::infinity();
  float tfar = std::numeric_limits<float>::infinity();
  int axis = -1;
  float sign = 0.0f;
  const float omin[3] = {-box.half.x, -box.half.y, -box.half.z};
  const float oc[3] = {ol.x, ol.y, ol.z};
  const float dc[3] = {dl.x, dl.y, dl.z};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dc[i]) < 1e-12f) {
      if (oc[i] < omin[i] || oc[i] > -omin[i]) return false;
      continue;
    }
    float t0 = (omin[i] - oc[i]) / dc[i];
    float t1 = (-omin[i] - oc[i]) / dc[i];
    float s = -1.0f;
    if (t0 > t1) {
      std::swap(t0, t1);
      s = 1.0f;
    }
    if (t0 > tnear) {
      tnear = t0;
      axis = i;
      sign = s;
    }
    tfar = std::min(tfar, t1);
    if (tnear > tfar) return false;
  }
  if (tnear < 1e-4f || axis < 0) return false;
  t = tnear;
  Vec3 nl{0.0f, 0.0f, 0.0f};
  if (axis == 0) nl.x = sign;
  if (axis == 1) nl.y = sign;
  if (axis == 2) nl.z = sign;
  n = geo::rot_z(box.yaw) * nl;
  return true;
}

}  // namespace

RenderOut render(const Scene& scene) {
  const geo::Intrinsics& k = scene.camera.intrinsics;
  RenderOut out;
  out.rgb = geo::RgbImage::create(k.width, k.height);
  out.depth = geo::DepthImage::create(k.width, k.height);
  const Vec3 origin = scene.camera.pose.t;
  const float ambient = 0.35f;
  const float diffuse = 0.65f * scene.light_intensity;

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir = scene.camera.pose.R * geo::pixel_dir(k, u, v);
      Hit best;
      float t;
      Vec3 n;
      if (hit_box(origin, dir, scene.table, t, n) && t < best.t) {
        best = Hit{t, n, scene.table.albedo, true};
      }
      for (const BoxObj& b : scene.boxes) {
        if (hit_box(origin, dir, b, t, n) && t < best.t) best = Hit{t, n, b.albedo, false};
      }
      for (const Sphere& s : scene.spheres) {
        if (hit_sphere(origin, dir, s, t, n) && t < best.t) best = Hit{t, n, s.albedo, false};
      }

      Vec3 color = scene.background;
      float depth = 0.0f;
      if (std::isfinite(best.t)) {
        depth = best.t;
        Vec3 albedo = best.albedo;
        if (best.is_table) {
          const Vec3 p = origin + dir * best.t;
          const float top_z = scene.table.center.z + scene.table.half.z;
          if (std::abs(p.z - top_z) < 1e-4f) {
            for (const Decal& dcl : scene.decals) {
              const float dx = p.x - dcl.center.x;
              const float dy = p.y - dcl.center.y;
              if (dx * dx + dy * dy <= dcl.radius * dcl.radius) albedo = dcl.albedo;
            }
          }
        }
        const float lambert = std::max(0.0f, geo::dot(best.normal, -scene.light_dir));
        color = albedo * (ambient + diffuse * lambert);
      }
      const size_t px = static_cast<size_t>(v) * k.width + u;
      out.depth.data[px] = depth;
      const float c[3] = {color.x, color.y, color.z};
      for (int ch = 0; ch < 3; ++ch) {
        const float q = std::clamp(c[ch], 0.0f, 1.0f);
        out.rgb.data[px * 3 + static_cast<size_t>(ch)] =
            static_cast<uint8_t>(std::lround(q * 255.0f));
      }
    }
  }
  return out;
}

namespace {

float box_sdf(const BoxObj& box, const Vec3& p) {
  const Vec3 lp = geo::rot_z(-box.yaw) * (p - box.center);
  const float qx = std::abs(lp.x) - box.half.x;
  const float qy = std::abs(lp.y) - box.half.y;
  const float qz = std::abs(lp.z) - box.half.z;
  const float ox = std::max(qx, 0.0f), oy = std::max(qy, 0.0f), oz = std::max(qz, 0.0f);
  const float outside = std::sqrt(ox * ox + oy * oy + oz * oz);
  const float inside = std::min(std::max(qx, std::max(qy, qz)), 0.0f);
  return outside + inside;
}

}  // namespace

float scene_sdf(const Scene& scene, const Vec3& p) {
  float d = box_sdf(scene.table, p);
  for (const BoxObj& b : scene.boxes) d = std::min(d, box_sdf(b, p));
  for (const Sphere& s : scene.spheres) {
    d = std::min(d, geo::norm(p - s.center) - s.radius);
  }
  return d;
}

std::vector<float> observe_state(const SimState& state) {
  return {state.effector.x, state.effector.y, state.effector.z,
          static_cast<float>(state.grip)};
}

bool check_success(const SimState& state) {
  if (state.task.name == "reach_target") {
    const Sphere& tgt = state.spheres[static_cast<size_t>(state.target_sphere)];
    return geo::norm(state.effector - tgt.center) <= static_cast<float>(state.task.threshold);
  }
  if (state.task.name == "push_block") {
    const BoxObj& b = state.boxes[static_cast<size_t>(state.push_box)];
    return dist2d(b.center.x, b.center.y, state.goal.x, state.goal.y) <= state.task.threshold;
  }
  const Sphere& tgt = state.spheres[static_cast<size_t>(state.target_sphere)];
  return !state.attached &&
         dist2d(tgt.center.x, tgt.center.y, state.goal.x, state.goal.y) <= state.task.threshold;
}

namespace {

void resolve_push(SimState& s) {
  BoxObj& box = s.boxes[static_cast<size_t>(s.push_box)];
  // Contact needs vertical overlap between the effector ball and the block.
  if (s.effector.z - kEffectorRadius > box.center.z + box.half.z) return;
  const Vec2 rel = rot2(-box.yaw, Vec2{s.effector.x - box.center.x, s.effector.y - box.center.y});
  const Vec2 closest{std::clamp(rel.x, -static_cast<double>(box.half.x),
                                static_cast<double>(box.half.x)),
                     std::clamp(rel.y, -static_cast<double>(box.half.y),
                                static_cast<double>(box.half.y))};
  const double dx = rel.x - closest.x, dy = rel.y - closest.y;
  const double dist = std::hypot(dx, dy);
  Vec2 push{0.0, 0.0};
  if (dist >= kEffectorRadius) return;
  if (dist > 1e-9) {
    const double pen = kEffectorRadius - dist;
    push = {-dx / dist * pen, -dy / dist * pen};
  } else {
    // Effector center inside the block: shove it along the center line.
    const double cx = -rel.x, cy = -rel.y;
    const double n = std::hypot(cx, cy);
    const double mag = kEffectorRadius;
    push = n > 1e-9 ? Vec2{cx / n * mag, cy / n * mag} : Vec2{mag, 0.0};
  }
  const Vec2 world = rot2(box.yaw, push);
  box.center.x += static_cast<float>(world.x);
  box.center.y += static_cast<float>(world.y);
  // Keep the block on the table.
  const TablePose table{s.base.table.center.x, s.base.table.center.y, s.base.table.yaw};
  Vec2 local = table.to_table(Vec2{box.center.x, box.center.y});
  local.x = std::clamp(local.x, -0.34, 0.34);
  local.y = std::clamp(local.y, -0.34, 0.34);
  const Vec2 back = table.to_world(local);
  box.center.x = static_cast<float>(back.x);
  box.center.y = static_cast<float>(back.y);
}

}  // namespace

void step(SimState& s, const std::vector<float>& action) {
  if (s.terminated) throw UsageError("step after episode termination");
  if (static_cast<int>(action.size()) != s.task.action_dim) {
    throw ShapeError("action must have " + std::to_string(s.task.action_dim) + " components");
  }
  float a[4];
  for (int i = 0; i < 4; ++i) a[i] = std::clamp(action[static_cast<size_t>(i)], -1.0f, 1.0f);
  s.effector.x = std::clamp(s.effector.x + a[0] * static_cast<float>(kMaxDelta), -0.38f, 0.38f);
  s.effector.y = std::clamp(s.effector.y + a[1] * static_cast<float>(kMaxDelta), -0.38f, 0.38f);
  s.effector.z = std::clamp(s.effector.z + a[2] * static_cast<float>(kMaxDelta),
                            static_cast<float>(kEffectorRadius), 0.30f);
  s.grip = std::clamp(s.grip + a[3] * kGripRate, 0.0, 1.0);

  if (s.task.name == "pick_place") {
    Sphere& tgt = s.spheres[static_cast<size_t>(s.target_sphere)];
    if (!s.attached && s.grip > 0.5 && geo::norm(s.effector - tgt.center) <= kGraspRadius) {
      s.attached = true;
    }
    if (s.attached && s.grip < 0.5) {
      s.attached = false;
      tgt.center = Vec3{s.effector.x, s.effector.y, tgt.radius};
    }
    if (s.attached) {
      tgt.center = Vec3{s.effector.x, s.effector.y,
                        std::max(s.effector.z - 0.04f, tgt.radius)};
    }
  } else if (s.task.name == "push_block") {
    resolve_push(s);
  }

  ++s.step_count;
  s.success = check_success(s);
  if (s.success || s.step_count >= s.task.step_limit) s.terminated = true;
}

namespace {

struct ExpertPlan {
  Vec3 waypoint;
  float grip_cmd = 0.0f;
};

ExpertPlan plan_reach(const SimState& s) {
  const Sphere& tgt = s.spheres[static_cast<size_t>(s.target_sphere)];
  return {tgt.center, 0.0f};
}

ExpertPlan plan_push(const SimState& s) {
  const BoxObj& box = s.boxes[static_cast<size_t>(s.push_box)];
  if (check_success(s)) return {s.effector, 0.0f};
  const double bx = box.center.x, by = box.center.y;
  const double gx = s.goal.x, gy = s.goal.y;
  const double len = std::max(dist2d(bx, by, gx, gy), 1e-9);
  const double px = (gx - bx) / len, py = (gy - by) / len;
  const double stand_off = kBlockHalf * 1.45 + kEffectorRadius + 0.005;
  const Vec2 behind{bx - px * stand_off, by - py * stand_off};
  const double horiz = dist2d(s.effector.x, s.effector.y, behind.x, behind.y);
  const bool goal_side =
      (s.effector.x - bx) * px + (s.effector.y - by) * py > 0.0 && horiz > 0.025;
  if (s.effector.z > kPushZ + 0.005) {
    if (horiz > 0.01) {
      return {Vec3{static_cast<float>(behind.x), static_cast<float>(behind.y),
                   static_cast<float>(kHoverZ)},
              0.0f};
    }
    return {Vec3{static_cast<float>(behind.x), static_cast<float>(behind.y),
                 static_cast<float>(kPushZ)},
            0.0f};
  }
  if (goal_side) {
    // Wrong side at pushing height: climb back up and swing around.
    return {Vec3{static_cast<float>(behind.x), static_cast<float>(behind.y),
                 static_cast<float>(kHoverZ)},
            0.0f};
  }
  if (horiz > 0.02) {
    return {Vec3{static_cast<float>(behind.x), static_cast<float>(behind.y),
                 static_cast<float>(kPushZ)},
            0.0f};
  }
  return {Vec3{static_cast<float>(bx), static_cast<float>(by), static_cast<float>(kPushZ)}, 0.0f};
}

ExpertPlan plan_pick(const SimState& s) {
  const Sphere& tgt = s.spheres[static_cast<size_t>(s.target_sphere)];
  if (check_success(s)) return {s.effector, 0.0f};
  if (!s.attached) {
    const double horiz = dist2d(s.effector.x, s.effector.y, tgt.center.x, tgt.center.y);
    if (horiz > 0.008) {
      return {Vec3{tgt.center.x, tgt.center.y, static_cast<float>(kHoverZ)}, -1.0f};
    }
    if (s.effector.z > kGraspZ + 0.004) {
      return {Vec3{tgt.center.x, tgt.center.y, static_cast<float>(kGraspZ)}, -1.0f};
    }
    return {s.effector, 1.0f};  // close the gripper in place
  }
  const double to_goal = dist2d(s.effector.x, s.effector.y, s.goal.x, s.goal.y);
  if (s.effector.z < kHoverZ - 0.005 && to_goal > 0.01) {
    return {Vec3{s.effector.x, s.effector.y, static_cast<float>(kHoverZ)}, 1.0f};
  }
  if (to_goal > 0.008) {
    return {Vec3{s.goal.x, s.goal.y, static_cast<float>(kHoverZ)}, 1.0f};
  }
  return {s.effector, -1.0f};  // release over the goal
}

ExpertPlan plan(const SimState& s) {
  if (s.task.name == "reach_target") return plan_reach(s);
  if (s.task.name == "push_block") return plan_push(s);
  return plan_pick(s);
}

}  // namespace

geo::Vec3 expert_waypoint(const SimState& state) { return plan(state).waypoint; }

std::vector<float> expert_action(const SimState& state) {
  if (state.terminated) return std::vector<float>(4, 0.0f);
  const ExpertPlan p = plan(state);
  auto toward = [](float from, float to) {
    return std::clamp((to - from) / static_cast<float>(kMaxDelta), -1.0f, 1.0f);
  };
  return {toward(state.effector.x, p.waypoint.x), toward(state.effector.y, p.waypoint.y),
          toward(state.effector.z, p.waypoint.z), p.grip_cmd};
}

}  // namespace vgdp::sim
