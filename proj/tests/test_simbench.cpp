#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include "vgdp/geometry.hpp"
#include "vgdp/simbench.hpp"

using namespace vgdp;
using geo::Vec3;

namespace {

bool vec_eq(const Vec3& a, const Vec3& b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

bool pose_eq(const geo::Pose& a, const geo::Pose& b) {
  for (int i = 0; i < 9; ++i) {
    if (a.R.m[i] != b.R.m[i]) return false;
  }
  return vec_eq(a.t, b.t);
}

bool scene_eq(const sim::Scene& a, const sim::Scene& b) {
  if (!vec_eq(a.table.center, b.table.center) || a.table.yaw != b.table.yaw ||
      !vec_eq(a.table.albedo, b.table.albedo))
    return false;
  if (!vec_eq(a.background, b.background)) return false;
  if (!pose_eq(a.camera.pose, b.camera.pose)) return false;
  if (a.spheres.size() != b.spheres.size() || a.boxes.size() != b.boxes.size() ||
      a.decals.size() != b.decals.size())
    return false;
  for (size_t i = 0; i < a.spheres.size(); ++i) {
    if (!vec_eq(a.spheres[i].center, b.spheres[i].center) ||
        a.spheres[i].radius != b.spheres[i].radius ||
        !vec_eq(a.spheres[i].albedo, b.spheres[i].albedo))
      return false;
  }
  for (size_t i = 0; i < a.boxes.size(); ++i) {
    if (!vec_eq(a.boxes[i].center, b.boxes[i].center) || a.boxes[i].yaw != b.boxes[i].yaw ||
        !vec_eq(a.boxes[i].albedo, b.boxes[i].albedo))
      return false;
  }
  for (size_t i = 0; i < a.decals.size(); ++i) {
    if (!vec_eq(a.decals[i].center, b.decals[i].center) ||
        a.decals[i].radius != b.decals[i].radius || !vec_eq(a.decals[i].albedo, b.decals[i].albedo))
      return false;
  }
  return true;
}

sim::SimState spawn(const std::string& task, sim::Level lvl, sim::Split sp, uint64_t seed) {
  Rng rng(seed);
  return sim::make_episode(sim::TaskSpec::get(task), sim::RandomizationSpec::make(lvl, sp), rng);
}

sim::SimState rollout_expert(sim::SimState st) {
  while (!st.terminated) sim::step(st, sim::expert_action(st));
  return st;
}

double table_frame_yaw(const sim::SimState& s) { return s.base.table.yaw; }

}  // namespace

TEST_CASE("level and split parsing round-trips and rejects junk") {
  for (auto lvl : {sim::Level::L0, sim::Level::L1, sim::Level::L2}) {
    CHECK(sim::parse_level(sim::level_name(lvl)) == lvl);
  }
  for (auto sp : {sim::Split::iid, sim::Split::ood}) {
    CHECK(sim::parse_split(sim::split_name(sp)) == sp);
  }
  CHECK_THROWS_AS(sim::parse_level("L3"), UsageError);
  CHECK_THROWS_AS(sim::parse_split("holdout"), UsageError);
}

TEST_CASE("task catalogue exposes three tasks with sane limits") {
  CHECK(sim::TaskSpec::names().size() == 3);
  for (const auto& name : sim::TaskSpec::names()) {
    const auto t = sim::TaskSpec::get(name);
    CHECK(t.name == name);
    CHECK(t.threshold > 0.0);
    CHECK(t.step_limit >= 60);
    CHECK(t.action_dim == 4);
    CHECK(t.state_dim == 4);
  }
  CHECK(sim::TaskSpec::get("reach_target").threshold == doctest::Approx(0.03));
  CHECK(sim::TaskSpec::get("push_block").step_limit == 80);
  CHECK_THROWS_AS(sim::TaskSpec::get("stack_towers"), UsageError);
  sim::TaskSpec bad = sim::TaskSpec::get("reach_target");
  bad.threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = sim::TaskSpec::get("reach_target");
  bad.step_limit = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("factor ranges are pairwise disjoint and overlap is rejected at load") {
  auto spec = sim::RandomizationSpec::make(sim::Level::L2, sim::Split::iid);
  CHECK_NOTHROW(spec.validate());

  auto broken = spec;
  broken.ood.table_hue = broken.iid.table_hue;
  CHECK_THROWS_AS(broken.validate(), UsageError);

  broken = spec;
  broken.ood.table_shift = {0.02, 0.06};  // overlaps iid [0, 0.03]
  CHECK_THROWS_AS(broken.validate(), UsageError);

  broken = spec;
  broken.ood.camera_pool = {2, 4};  // pose 2 is in the training pool
  CHECK_THROWS_AS(broken.validate(), UsageError);

  broken = spec;
  broken.iid.camera_pool.clear();
  CHECK_THROWS_AS(broken.validate(), UsageError);
}

TEST_CASE("L0 is byte-identical across seeds and consumes no randomness") {
  for (const auto& task : sim::TaskSpec::names()) {
    auto a = spawn(task, sim::Level::L0, sim::Split::iid, 1);
    auto b = spawn(task, sim::Level::L0, sim::Split::iid, 999);
    CHECK(scene_eq(sim::assemble(a), sim::assemble(b)));
    const auto ra = sim::render_state(a);
    const auto rb = sim::render_state(b);
    CHECK(ra.rgb.data == rb.rgb.data);
    CHECK(ra.depth.data == rb.depth.data);
  }
  // The generator must not touch the stream at L0: the next draw equals a
  // fresh generator's first draw.
  Rng used(42);
  auto st = sim::make_episode(sim::TaskSpec::get("pick_place"),
                              sim::RandomizationSpec::make(sim::Level::L0, sim::Split::ood), used);
  Rng fresh(42);
  CHECK(used.uniform() == fresh.uniform());
  // ood at L0 is the same canonical scene as iid.
  auto iid0 = spawn("push_block", sim::Level::L0, sim::Split::iid, 3);
  auto ood0 = spawn("push_block", sim::Level::L0, sim::Split::ood, 4);
  CHECK(scene_eq(sim::assemble(iid0), sim::assemble(ood0)));
}

TEST_CASE("L1 varies materials and table pose but keeps the canonical camera") {
  const auto cam0 = sim::camera_rig(0);
  bool background_varied = false, table_hue_varied = false, yaw_varied = false;
  auto ref = spawn("reach_target", sim::Level::L1, sim::Split::iid, 100);
  for (uint64_t seed = 101; seed < 120; ++seed) {
    auto s = spawn("reach_target", sim::Level::L1, sim::Split::iid, seed);
    CHECK(pose_eq(s.base.camera.pose, cam0.pose));
    if (!vec_eq(s.base.background, ref.base.background)) background_varied = true;
    if (!vec_eq(s.base.table.albedo, ref.base.table.albedo)) table_hue_varied = true;
    if (table_frame_yaw(s) != table_frame_yaw(ref)) yaw_varied = true;
  }
  CHECK(background_varied);
  CHECK(table_hue_varied);
  CHECK(yaw_varied);
}

TEST_CASE("L2 draws cameras from the split pool") {
  std::set<int> iid_hits, ood_hits;
  auto match_rig = [](const geo::Pose& p) {
    for (int i = 0; i < sim::camera_rig_size(); ++i) {
      if (pose_eq(p, sim::camera_rig(i).pose)) return i;
    }
    return -1;
  };
  for (uint64_t seed = 0; seed < 40; ++seed) {
    auto si = spawn("reach_target", sim::Level::L2, sim::Split::iid, seed);
    auto so = spawn("reach_target", sim::Level::L2, sim::Split::ood, seed);
    const int ci = match_rig(si.base.camera.pose);
    const int co = match_rig(so.base.camera.pose);
    REQUIRE(ci >= 0);
    REQUIRE(co >= 0);
    CHECK(ci <= 2);
    CHECK(co >= 3);
    iid_hits.insert(ci);
    ood_hits.insert(co);
  }
  CHECK(iid_hits.size() == 3);  // all training poses exercised
  CHECK(ood_hits.size() == 2);
}

TEST_CASE("ood factor draws always land outside the iid interval") {
  const auto spec = sim::RandomizationSpec::make(sim::Level::L2, sim::Split::ood);
  Rng rng(7);
  const sim::Interval* pairs[][2] = {
      {&spec.iid.background_hue, &spec.ood.background_hue},
      {&spec.iid.table_hue, &spec.ood.table_hue},
      {&spec.iid.target_hue, &spec.ood.target_hue},
      {&spec.iid.distractor_hue, &spec.ood.distractor_hue},
      {&spec.iid.goal_hue, &spec.ood.goal_hue},
      {&spec.iid.table_shift, &spec.ood.table_shift},
      {&spec.iid.table_yaw, &spec.ood.table_yaw},
  };
  for (const auto& pair : pairs) {
    for (int i = 0; i < 100; ++i) {
      const double v = pair[1]->sample(rng);
      CHECK_FALSE(pair[0]->contains(v));
      CHECK(pair[1]->contains(v));
    }
  }
  // Values recoverable from generated scenes obey the same exclusion.
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto s = spawn("push_block", sim::Level::L2, sim::Split::ood, seed);
    const double shift = std::hypot(static_cast<double>(s.base.table.center.x),
                                    static_cast<double>(s.base.table.center.y));
    const double yaw = std::abs(table_frame_yaw(s));
    CHECK(spec.ood.table_shift.contains(shift));
    CHECK_FALSE(spec.iid.table_shift.contains(shift));
    CHECK(spec.ood.table_yaw.contains(yaw));
    CHECK_FALSE(spec.iid.table_yaw.contains(yaw));
  }
}

TEST_CASE("empty scene renders the flat background with zero depth") {
  sim::Scene scene;
  scene.table.half = Vec3{0.0f, 0.0f, 0.0f};
  scene.table.center = Vec3{0.0f, 0.0f, -10.0f};  // degenerate, never hit
  scene.background = Vec3{0.25f, 0.5f, 0.75f};
  scene.light_dir = geo::normalized(Vec3{0.0f, 0.0f, -1.0f});
  scene.camera = sim::camera_rig(0);
  const auto out = sim::render(scene);
  for (int px = 0; px < 64 * 64; ++px) {
    REQUIRE(out.depth.data[static_cast<size_t>(px)] == 0.0f);
    REQUIRE(out.rgb.data[static_cast<size_t>(px) * 3 + 0] == 64);   // round(0.25*255)
    REQUIRE(out.rgb.data[static_cast<size_t>(px) * 3 + 1] == 128);  // round(0.5*255)
    REQUIRE(out.rgb.data[static_cast<size_t>(px) * 3 + 2] == 191);  // round(0.75*255)
  }
}

TEST_CASE("sphere on the optical axis reports depth d - r at the principal pixel") {
  sim::Scene scene;
  scene.table.half = Vec3{0.0f, 0.0f, 0.0f};
  scene.table.center = Vec3{0.0f, 0.0f, -100.0f};
  scene.background = Vec3{0.0f, 0.0f, 0.0f};
  scene.light_dir = geo::normalized(Vec3{0.0f, 0.0f, 1.0f});
  // Odd resolution puts a pixel center exactly on the optical axis.
  scene.camera.intrinsics = geo::Intrinsics{70.0f, 70.0f, 32.5f, 32.5f, 65, 65};
  scene.camera.pose = geo::Pose{};  // identity: camera at origin looking down +z
  const double d = 3.0;
  scene.spheres.push_back(
      sim::Sphere{Vec3{0.0f, 0.0f, static_cast<float>(d)}, 1.0f, Vec3{1.0f, 0.0f, 0.0f}, true});
  const auto out = sim::render(scene);
  const float depth = out.depth.data[32 * 65 + 32];
  CHECK(std::abs(depth - (d - 1.0)) < 1e-4);
}

TEST_CASE("rendered depth backprojects onto the scene surface") {
  int total = 0, close = 0;
  int scenes = 0;
  for (const auto& task : sim::TaskSpec::names()) {
    for (auto split : {sim::Split::iid, sim::Split::ood}) {
      for (uint64_t seed = 0; seed < 4; ++seed) {
        auto st = spawn(task, sim::Level::L2, split, seed);
        const auto scene = sim::assemble(st);
        const auto out = sim::render(scene);
        const auto cloud = geo::backproject(out.depth, &out.rgb, scene.camera.intrinsics,
                                            scene.camera.pose);
        for (const auto& p : cloud.xyz) {
          ++total;
          if (std::abs(sim::scene_sdf(scene, p)) <= 1e-3f) ++close;
        }
        ++scenes;
      }
    }
  }
  CHECK(scenes == 24);
  REQUIRE(total > 10000);
  const double frac = static_cast<double>(close) / static_cast<double>(total);
  CHECK(frac >= 0.99);
}

TEST_CASE("goal decal changes RGB only and leaves no geometry") {
  auto st = spawn("push_block", sim::Level::L0, sim::Split::iid, 0);
  auto with = sim::assemble(st);
  auto without = with;
  without.decals.clear();
  const auto a = sim::render(with);
  const auto b = sim::render(without);
  CHECK(a.depth.data == b.depth.data);  // depth blind to the decal
  CHECK(a.rgb.data != b.rgb.data);      // color is not
  // The block is painted exactly like the table: RGB alone cannot separate
  // them by albedo.
  CHECK(vec_eq(st.boxes[0].albedo, st.base.table.albedo));
}

TEST_CASE("reach distractors share the target geometry but not its color") {
  auto st = spawn("reach_target", sim::Level::L2, sim::Split::iid, 11);
  REQUIRE(st.spheres.size() == 3);
  const auto& tgt = st.spheres[static_cast<size_t>(st.target_sphere)];
  int distractors = 0;
  for (int i = 0; i < 3; ++i) {
    if (i == st.target_sphere) continue;
    ++distractors;
    CHECK(st.spheres[static_cast<size_t>(i)].radius == tgt.radius);
    CHECK_FALSE(vec_eq(st.spheres[static_cast<size_t>(i)].albedo, tgt.albedo));
    CHECK_FALSE(st.spheres[static_cast<size_t>(i)].is_target);
  }
  CHECK(distractors == 2);
  // Across seeds the winning slot moves around.
  std::set<int> slots;
  for (uint64_t seed = 0; seed < 30; ++seed) {
    slots.insert(spawn("reach_target", sim::Level::L2, sim::Split::iid, seed).target_sphere);
  }
  CHECK(slots.size() == 3);
}

TEST_CASE("zero action leaves the state unchanged") {
  auto st = spawn("push_block", sim::Level::L1, sim::Split::iid, 5);
  const auto eff = st.effector;
  const auto block = st.boxes[0].center;
  const double grip = st.grip;
  sim::step(st, {0.0f, 0.0f, 0.0f, 0.0f});
  CHECK(vec_eq(st.effector, eff));
  CHECK(vec_eq(st.boxes[0].center, block));
  CHECK(st.grip == grip);
  CHECK(st.step_count == 1);
  CHECK_FALSE(st.terminated);
}

TEST_CASE("actions are clamped componentwise and the workspace is bounded") {
  auto a = spawn("reach_target", sim::Level::L0, sim::Split::iid, 0);
  auto b = spawn("reach_target", sim::Level::L0, sim::Split::iid, 0);
  sim::step(a, {10.0f, -42.0f, 3.0f, 9.0f});
  sim::step(b, {1.0f, -1.0f, 1.0f, 1.0f});
  CHECK(vec_eq(a.effector, b.effector));
  CHECK(a.grip == b.grip);

  auto c = spawn("reach_target", sim::Level::L0, sim::Split::iid, 0);
  for (int i = 0; i < 100 && !c.terminated; ++i) sim::step(c, {1.0f, 1.0f, 1.0f, 1.0f});
  CHECK(c.effector.x <= 0.38f);
  CHECK(c.effector.y <= 0.38f);
  CHECK(c.effector.z <= 0.30f);
  CHECK(c.grip == 1.0);
  auto d = spawn("reach_target", sim::Level::L0, sim::Split::iid, 0);
  for (int i = 0; i < 100 && !d.terminated; ++i) sim::step(d, {-1.0f, -1.0f, -1.0f, -1.0f});
  CHECK(d.effector.x >= -0.38f);
  CHECK(d.effector.z >= static_cast<float>(sim::kEffectorRadius));
  CHECK(d.grip == 0.0);
}

TEST_CASE("stepping a terminated episode is a usage error") {
  auto st = rollout_expert(spawn("reach_target", sim::Level::L0, sim::Split::iid, 0));
  CHECK(st.terminated);
  CHECK_THROWS_AS(sim::step(st, {0.0f, 0.0f, 0.0f, 0.0f}), UsageError);
  auto fresh = spawn("reach_target", sim::Level::L0, sim::Split::iid, 0);
  CHECK_THROWS_AS(sim::step(fresh, {0.0f, 0.0f}), ShapeError);
}

TEST_CASE("expert solves every task at L0, 50 seeds each") {
  for (const auto& task : sim::TaskSpec::names()) {
    int wins = 0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
      auto st = rollout_expert(spawn(task, sim::Level::L0, sim::Split::iid, seed));
      if (st.success) ++wins;
    }
    CHECK(wins == 50);
  }
}

TEST_CASE("expert stays at 100% under full randomization") {
  for (const auto& task : sim::TaskSpec::names()) {
    for (auto lvl : {sim::Level::L1, sim::Level::L2}) {
      for (auto split : {sim::Split::iid, sim::Split::ood}) {
        int wins = 0;
        for (uint64_t seed = 0; seed < 25; ++seed) {
          auto st = rollout_expert(spawn(task, lvl, split, seed * 31 + 7));
          if (st.success) ++wins;
        }
        CHECK(wins == 25);
      }
    }
  }
}

TEST_CASE("expert is nearly idle once the waypoint is reached") {
  auto st = spawn("reach_target", sim::Level::L0, sim::Split::iid, 0);
  // Park the effector exactly at the target: the proportional law returns a
  // zero move and no grip command.
  st.effector = st.spheres[static_cast<size_t>(st.target_sphere)].center;
  const auto act = sim::expert_action(st);
  CHECK(act[0] == 0.0f);
  CHECK(act[1] == 0.0f);
  CHECK(act[2] == 0.0f);
  CHECK(act[3] == 0.0f);
}

TEST_CASE("distance to an unchanged waypoint never increases under the expert") {
  auto st = spawn("reach_target", sim::Level::L2, sim::Split::iid, 9);
  int checked = 0;
  while (!st.terminated) {
    const Vec3 wp = sim::expert_waypoint(st);
    const double before = std::sqrt(geo::dist2(st.effector, wp));
    sim::step(st, sim::expert_action(st));
    const Vec3 wp_after = st.terminated ? wp : sim::expert_waypoint(st);
    if (vec_eq(wp, wp_after)) {
      const double after = std::sqrt(geo::dist2(st.effector, wp));
      CHECK(after <= before + 1e-9);
      ++checked;
    }
  }
  CHECK(checked > 5);
  CHECK(st.success);
}

TEST_CASE("success thresholds are closed boundaries") {
  auto st = spawn("reach_target", sim::Level::L0, sim::Split::iid, 0);
  auto& tgt = st.spheres[static_cast<size_t>(st.target_sphere)];
  tgt.center = Vec3{0.0f, 0.0f, 0.025f};
  st.effector = Vec3{0.03f, 0.0f, 0.025f};  // exactly the threshold away
  CHECK(sim::check_success(st));
  st.effector = Vec3{std::nextafter(0.03f, 1.0f), 0.0f, 0.025f};
  CHECK_FALSE(sim::check_success(st));
  st.effector = tgt.center;  // distance zero
  CHECK(sim::check_success(st));

  auto push = spawn("push_block", sim::Level::L0, sim::Split::iid, 0);
  push.boxes[0].center = Vec3{push.goal.x + 0.049f, push.goal.y, push.boxes[0].center.z};
  CHECK(sim::check_success(push));
  push.boxes[0].center = Vec3{push.goal.x + 0.051f, push.goal.y, push.boxes[0].center.z};
  CHECK_FALSE(sim::check_success(push));
}

TEST_CASE("pick attach and release follow grip crossings of one half") {
  auto st = spawn("pick_place", sim::Level::L0, sim::Split::iid, 0);
  auto& tgt = st.spheres[0];
  // Teleport next to the ball, inside grasp range.
  st.effector = Vec3{tgt.center.x, tgt.center.y, tgt.center.z + 0.02f};
  sim::step(st, {0.0f, 0.0f, 0.0f, 1.0f});  // grip 0.25
  CHECK_FALSE(st.attached);
  sim::step(st, {0.0f, 0.0f, 0.0f, 1.0f});  // grip 0.50, not above half yet
  CHECK_FALSE(st.attached);
  sim::step(st, {0.0f, 0.0f, 0.0f, 1.0f});  // grip 0.75
  CHECK(st.attached);
  // Carried ball tracks the effector.
  sim::step(st, {1.0f, 0.0f, 1.0f, 0.0f});
  CHECK(tgt.center.x == st.effector.x);
  CHECK(tgt.center.y == st.effector.y);
  // Opening past one half drops it at the current spot, resting on the table.
  sim::step(st, {0.0f, 0.0f, 0.0f, -1.0f});  // 0.50
  CHECK(st.attached);
  sim::step(st, {0.0f, 0.0f, 0.0f, -1.0f});  // 0.25
  CHECK_FALSE(st.attached);
  CHECK(tgt.center.z == tgt.radius);
}

TEST_CASE("nothing sinks below the table during expert rollouts") {
  for (const auto& task : sim::TaskSpec::names()) {
    auto st = spawn(task, sim::Level::L2, sim::Split::ood, 17);
    while (!st.terminated) {
      for (const auto& s : st.spheres) CHECK(s.center.z >= s.radius - 1e-6f);
      for (const auto& b : st.boxes) CHECK(b.center.z >= b.half.z - 1e-6f);
      CHECK(st.effector.z >= static_cast<float>(sim::kEffectorRadius) - 1e-6f);
      sim::step(st, sim::expert_action(st));
    }
  }
}

TEST_CASE("a random policy almost never pushes the block home") {
  Rng rng(123);
  int wins = 0;
  for (int ep = 0; ep < 100; ++ep) {
    auto st = spawn("push_block", sim::Level::L1, sim::Split::iid, static_cast<uint64_t>(ep));
    while (!st.terminated) {
      std::vector<float> a(4);
      for (auto& v : a) v = rng.uniformf(-1.0f, 1.0f);
      sim::step(st, a);
    }
    if (st.success) ++wins;
  }
  CHECK(wins < 5);
}

TEST_CASE("full episodes are reproducible from the seed") {
  for (const auto& task : sim::TaskSpec::names()) {
    auto a = spawn(task, sim::Level::L2, sim::Split::iid, 77);
    auto b = spawn(task, sim::Level::L2, sim::Split::iid, 77);
    CHECK(scene_eq(sim::assemble(a), sim::assemble(b)));
    int step_idx = 0;
    while (!a.terminated && !b.terminated) {
      if (step_idx == 0 || step_idx == 10) {
        const auto ra = sim::render_state(a);
        const auto rb = sim::render_state(b);
        REQUIRE(ra.rgb.data == rb.rgb.data);
        REQUIRE(ra.depth.data == rb.depth.data);
      }
      CHECK(sim::observe_state(a) == sim::observe_state(b));
      sim::step(a, sim::expert_action(a));
      sim::step(b, sim::expert_action(b));
      ++step_idx;
    }
    CHECK(a.terminated == b.terminated);
    CHECK(a.success == b.success);
    CHECK(a.success);
  }
}
