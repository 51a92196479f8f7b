#ifndef V2VQA_SYNTHETIC_HPP
#define V2VQA_SYNTHETIC_HPP

// Seeded synthetic scene logs: CAVs driving along a gently weaving road
// among other traffic, with per-CAV noisy detections, dropped objects (FN)
// and spurious boxes (FP).

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "v2vqa/geometry.hpp"
#include "v2vqa/scene.hpp"

namespace v2vqa::synthetic {

struct Config {
  std::string scene_id = "synthetic_000";
  int n_frames = 100;
  int n_cavs = 2;
  int n_objects = 8;
  bool infrastructure = false;  // adds one static roadside node
  double detection_range = 60.0;
  double fn_rate = 0.1;
  double fp_per_frame = 0.3;  // expected spurious boxes per CAV per frame
  double center_noise = 0.3;  // meters, std-dev
  std::uint64_t seed = 7;
};

namespace detail {

struct Mover {
  std::string id;
  Point2 start;
  double speed = 0.0;   // along world +x
  double sway = 0.0;    // lateral amplitude
  double phase = 0.0;
  double length = 4.5;
  double width = 1.9;

  Point2 at(double t) const {
    return {start.x + speed * t, start.y + sway * std::sin(0.3 * t + phase)};
  }
  double yaw_at(double t) const {
    const Point2 v{speed, sway * 0.3 * std::cos(0.3 * t + phase)};
    return norm(v) > 1e-9 ? yaw_of(v) : 0.0;
  }
};

}  // namespace detail

inline SceneLog make_scene_log(const Config& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.center_noise);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<detail::Mover> cavs;
  for (int i = 0; i < cfg.n_cavs; ++i) {
    detail::Mover m;
    m.id = i == 0 ? "cav_ego" : "cav_" + std::to_string(i);
    m.start = {-20.0 * i, 3.5 * (i % 2)};
    m.speed = uni(7.0, 12.0);
    m.sway = uni(0.0, 1.5);
    m.phase = uni(0.0, 2.0 * kPi);
    cavs.push_back(m);
  }
  std::vector<detail::Mover> objects;
  const double lanes[] = {-7.0, -3.5, 0.0, 3.5, 7.0, 10.5};
  for (int i = 0; i < cfg.n_objects; ++i) {
    detail::Mover m;
    m.id = "obj_" + std::to_string(i);
    m.start = {uni(-30.0, 120.0), lanes[i % 6] + uni(-0.4, 0.4)};
    m.speed = uni(0.0, 12.0);
    m.sway = uni(0.0, 0.8);
    m.phase = uni(0.0, 2.0 * kPi);
    m.length = uni(3.8, 5.2);
    m.width = uni(1.7, 2.1);
    objects.push_back(m);
  }
  const Pose2 rsu{{40.0, -12.0}, deg2rad(-90.0)};

  SceneLog log;
  auto& frames = log.scenes[cfg.scene_id];
  for (int k = 0; k < cfg.n_frames; ++k) {
    const double t = k * kFrameInterval;
    Frame f;
    f.scene_id = cfg.scene_id;
    f.frame_idx = k;
    f.timestamp = t;

    for (const auto& o : objects) {
      GtObject g;
      g.object_id = o.id;
      g.class_label = "car";
      g.box.center = o.at(t);
      g.box.yaw = o.yaw_at(t);
      g.box.length = o.length;
      g.box.width = o.width;
      f.gt_objects.push_back(g);
    }

    auto observe = [&](CavState& c) {
      for (const auto& g : f.gt_objects) {
        if (distance(g.box.center, c.pose.position) > cfg.detection_range) continue;
        if (unit(rng) < cfg.fn_rate) continue;
        Detection d;
        d.box = g.box;
        d.box.center = g.box.center + Point2{noise(rng), noise(rng)};
        d.box.yaw = normalize_angle(g.box.yaw + 0.02 * noise(rng));
        d.score = uni(0.5, 1.0);
        d.source_cav = c.cav_id;
        c.detections.push_back(d);
      }
      // Spurious boxes, Bernoulli-thinned to the configured mean.
      for (int n = 0; n < 3; ++n) {
        if (unit(rng) >= cfg.fp_per_frame / 3.0) continue;
        Detection d;
        const double r = uni(5.0, cfg.detection_range * 0.8);
        const double a = uni(-kPi, kPi);
        d.box.center = c.pose.position + Point2{r * std::cos(a), r * std::sin(a)};
        d.box.yaw = uni(-kPi, kPi);
        d.box.length = uni(3.5, 5.0);
        d.box.width = uni(1.6, 2.2);
        d.score = uni(0.2, 0.6);
        d.source_cav = c.cav_id;
        c.detections.push_back(d);
      }
    };

    for (const auto& m : cavs) {
      CavState c;
      c.cav_id = m.id;
      c.pose = {m.at(t), m.yaw_at(t)};
      observe(c);
      f.cavs.push_back(std::move(c));
    }
    if (cfg.infrastructure) {
      CavState c;
      c.cav_id = "rsu_0";
      c.is_infrastructure = true;
      c.pose = rsu;
      observe(c);
      f.cavs.push_back(std::move(c));
    }
    frames.push_back(std::move(f));
  }
  return log;
}

struct OcclusionFixture {
  SceneLog log;
  std::string ego = "cav_ego";
  std::string helper = "cav_1";
  int planted = 0;  // objects seen only by the helper
};

/// One frame: the ego and a helper CAV both see `visible` objects exactly;
/// `planted` further objects are detected by the helper alone.
inline OcclusionFixture make_occlusion_fixture(int visible = 4, int planted = 2) {
  OcclusionFixture fx;
  fx.planted = planted;
  Frame f;
  f.scene_id = "occlusion";
  f.frame_idx = 0;
  f.timestamp = 0.0;

  CavState ego{fx.ego, {{0.0, 0.0}, 0.0}, {}, false};
  CavState helper{fx.helper, {{30.0, 7.0}, kPi}, {}, false};

  auto add = [&](const std::string& id, Point2 c, bool ego_sees) {
    GtObject g;
    g.object_id = id;
    g.box.center = c;
    f.gt_objects.push_back(g);
    helper.detections.push_back({g.box, 0.9, helper.cav_id});
    if (ego_sees) ego.detections.push_back({g.box, 0.9, ego.cav_id});
  };
  for (int i = 0; i < visible; ++i) add("vis_" + std::to_string(i), {10.0 + 12.0 * i, -3.5}, true);
  for (int i = 0; i < planted; ++i) add("occ_" + std::to_string(i), {25.0 + 12.0 * i, 10.5}, false);

  f.cavs = {ego, helper};
  fx.log.scenes[f.scene_id].push_back(std::move(f));
  return fx;
}

}  // namespace v2vqa::synthetic

#endif  // V2VQA_SYNTHETIC_HPP
