// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "v2vqa/cli.hpp"
#include "v2vqa/comms.hpp"
#include "v2vqa/eval.hpp"
#include "v2vqa/geometry.hpp"
#include "v2vqa/qagen.hpp"
#include "v2vqa/responders.hpp"
#include "v2vqa/synthetic.hpp"

using namespace v2vqa;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome oracle_identity() {
  cli::SelftestOptions o;
  o.frames = 100;
  o.objects = 8;
  o.jobs = 1;

  synthetic::Config sc;
  sc.n_frames = o.frames;
  sc.n_objects = o.objects;
  sc.seed = o.seed;
  const SceneLog log = synthetic::make_scene_log(sc);
  std::size_t gt = 0, dets = 0, cavs = 0;
  for (const auto& f : log.scenes.begin()->second) {
    gt += f.gt_objects.size();
    cavs = f.cavs.size();
    for (const auto& c : f.cavs) dets += c.detections.size();
  }
  const std::size_t per_frame_gt = gt / log.frame_count();
  // Per CAV the detection count differs from the GT count when FN/FP are injected.
  const bool noisy = dets != gt * cavs;

  const auto r = cli::run_selftest(o);
  const auto& a = r.report.all();
  bool exact = r.passed;
  for (auto t : {QaType::Q1, QaType::Q2, QaType::Q3, QaType::Q4})
    exact = exact && a.grounding.at(t).metrics.f1 == 1.0;
  const bool ok = exact && cavs == 2 && per_frame_gt >= 5 && noisy && r.seconds < 10.0;
  return {ok, fmt("%zu pairs, %zu CAVs, %zu GT/frame, L2 avg %.1f, %.2f s", r.n_pairs, cavs,
                  per_frame_gt, a.planning.l2_avg, r.seconds)};
}

Outcome comm_table() {
  using namespace comms;
  const CommScenario s{2, 1};
  const double nf = strategy_cost(Strategy::no_fusion, s);
  const double early = strategy_cost(Strategy::early, s);
  const double inter = strategy_cost(Strategy::intermediate, s);
  const double llm = strategy_cost(Strategy::llm_fusion, s);
  bool ok = nf == 0.0 && std::abs(early - 1.9208) < 1e-12 && std::abs(inter - 0.4008) < 1e-12 &&
            std::abs(llm - 0.4068) < 1e-12;
  double worst = 0.0;
  for (int v = 1; v <= 64; ++v)
    for (int q = 0; q <= 100; ++q) {
      worst = std::max(worst, std::abs(per_cav_cost({v, q, Setting::centralized}) -
                                       (0.203 + 0.0004 * q)));
      worst = std::max(worst, std::abs(hub_cost({v, q}) - (0.203 * v + 0.0004 * q * v)));
    }
  ok = ok && worst <= 1e-12;
  return {ok, fmt("%.4f / %.4f / %.4f / %.4f MB, max formula error %.1e", nf, early, inter, llm,
                  worst)};
}

Outcome matching_threshold() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(-80.0, 80.0), ang(-kPi, kPi);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const Point2 g{pos(rng), pos(rng)};
    const double a = ang(rng);
    const Point2 dir{std::cos(a), std::sin(a)};
    const std::vector<Point2> gts{g};
    const std::vector<Point2> near{g + dir * 3.99}, far{g + dir * 4.01};
    const auto m1 = match_predictions(near, gts);
    const auto m2 = match_predictions(far, gts);
    if (!(m1.tp == 1 && m1.fp == 0 && m1.fn == 0)) ++bad;
    if (!(m2.tp == 0 && m2.fp == 1 && m2.fn == 1)) ++bad;
  }
  return {bad == 0, fmt("1000 pairs, %d mismatches", bad)};
}

Outcome collision_oracle() {
  std::mt19937_64 rng(77);
  int disagree_outside_band = 0, disagree_in_band = 0, collisions = 0;
  for (int i = 0; i < 1000; ++i) {
    const OrientedBox a = oracle::random_box(rng, 3.5);
    const OrientedBox b = oracle::random_box(rng, 3.5);
    const double mc = oracle::mc_intersection_area(a, b, 1'000'000, rng);
    const bool lib = boxes_collide(a, b);
    collisions += lib ? 1 : 0;
    if (lib != (mc > 0.0)) {
      if (mc < 1e-2 && intersection_area(a, b) < 1e-2) ++disagree_in_band;
      else ++disagree_outside_band;
    }
  }

  // Corner contact: boxes share exactly one corner, under a common rigid motion.
  int touching_collide = 0;
  std::uniform_real_distribution<double> ang(-kPi, kPi), sz(1.0, 5.0), off(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    OrientedBox a, b;
    a.length = sz(rng), a.width = sz(rng), b.length = sz(rng), b.width = sz(rng);
    const double yaw = ang(rng);
    const Point2 origin{off(rng), off(rng)};
    // In the shared frame: a occupies [-la, 0] x [-wa, 0], b occupies [0, lb] x [0, wb].
    const Pose2 frame{origin, yaw};
    a.center = from_ego({-a.length / 2, -a.width / 2}, frame);
    b.center = from_ego({b.length / 2, b.width / 2}, frame);
    a.yaw = b.yaw = yaw;
    if (boxes_collide(a, b)) ++touching_collide;
  }
  const bool ok = disagree_outside_band == 0 && touching_collide == 0;
  return {ok, fmt("%d colliding pairs, %d band disagreements, %d outside band, %d/200 corner "
                  "contacts flagged",
                  collisions, disagree_in_band, disagree_outside_band, touching_collide)};
}

Frame random_frame(std::mt19937_64& rng, int idx) {
  std::uniform_real_distribution<double> pos(-40.0, 40.0), ang(-kPi, kPi);
  std::uniform_int_distribution<int> n_gt(0, 14), n_det(0, 8);
  Frame f;
  f.scene_id = "rand";
  f.frame_idx = idx;
  CavState me{"ego", {{pos(rng) / 4, pos(rng) / 4}, ang(rng)}, {}, false};
  const int g = n_gt(rng);
  for (int i = 0; i < g; ++i) {
    GtObject o;
    o.object_id = "g" + std::to_string(i);
    o.box = oracle::random_box(rng, 40.0);
    f.gt_objects.push_back(o);
  }
  const int d = n_det(rng);
  for (int i = 0; i < d; ++i) {
    Detection det;
    // Half the references sit on a GT object, half anywhere.
    if (g > 0 && i % 2 == 0) det.box = f.gt_objects[rng() % g].box;
    else det.box = oracle::random_box(rng, 40.0);
    det.source_cav = me.cav_id;
    me.detections.push_back(det);
  }
  f.cavs.push_back(me);
  return f;
}

Outcome q2_bruteforce() {
  std::mt19937_64 rng(555);
  const GenConfig cfg;
  int mismatches = 0, positives = 0, pairs = 0;
  for (int i = 0; i < 1000; ++i) {
    const Frame f = random_frame(rng, i);
    const CavState& me = f.cavs[0];
    const auto got = gen_q2(f, "ego", cfg);

    std::vector<std::optional<Point2>> want;
    for (const auto& det : me.detections) {
      const Point2 ref = det.box.center;
      const Point2 axis = ref - me.pose.position;
      const double len = std::hypot(axis.x, axis.y);
      if (len <= 1e-9) continue;
      const Sector s{ref, axis * (1.0 / len), cfg.sector_half_angle, cfg.sector_range};
      const GtObject* best = nullptr;
      double best_d = 0.0;
      for (const auto& g : f.gt_objects) {
        if (oracle::inside_box(ref, g.box)) continue;
        if (!sector_contains(s, g.box.center)) continue;
        const double d = std::hypot(g.box.center.x - ref.x, g.box.center.y - ref.y);
        if (!best || d < best_d || (d == best_d && g.object_id < best->object_id)) {
          best = &g;
          best_d = d;
        }
      }
      if (best) {
        want.push_back(templates::quantize(
            oracle::to_ego_basis(best->box.center, me.pose.position, me.pose.yaw)));
      } else {
        want.push_back(std::nullopt);
      }
    }

    if (got.size() != want.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t k = 0; k < got.size(); ++k) {
      ++pairs;
      const bool same = want[k] ? (got[k].answer.size() == 1 && got[k].answer[0] == *want[k])
                                : got[k].answer.empty();
      positives += want[k] ? 1 : 0;
      if (!same) ++mismatches;
    }
  }
  return {mismatches == 0,
          fmt("1000 frames, %d pairs (%d positive), %d mismatches", pairs, positives, mismatches)};
}

Outcome counting_law() {
  int violations = 0, checked = 0;
  std::size_t q4 = 0, q5 = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    synthetic::Config sc;
    sc.seed = seed;
    sc.n_frames = 35 + static_cast<int>(seed % 10);
    sc.n_cavs = 1 + static_cast<int>(seed % 4);
    sc.n_objects = 3 + static_cast<int>(seed % 9);
    sc.infrastructure = seed % 3 == 0;
    const SceneLog log = synthetic::make_scene_log(sc);
    const QaDataset ds = generate_all(log, {}, 2);
    std::map<std::pair<int, std::string>, std::map<QaType, std::size_t>> per;
    for (const auto& p : ds.pairs) ++per[{p.frame_idx, p.asker}][p.qa_type];
    for (const auto& f : log.scenes.begin()->second) {
      std::size_t dets = 0;
      for (const auto& c : f.cavs) dets += c.detections.size();
      for (const auto& c : f.cavs) {
        if (c.is_infrastructure) {
          if (per.count({f.frame_idx, c.cav_id})) ++violations;
          continue;
        }
        auto& m = per[{f.frame_idx, c.cav_id}];
        ++checked;
        if (m[QaType::Q1] != f.gt_objects.size() + dets) ++violations;
        if (m[QaType::Q3] > 6) ++violations;
        if (m[QaType::Q4] != m[QaType::Q5]) ++violations;
        q4 += m[QaType::Q4];
        q5 += m[QaType::Q5];
      }
    }
  }
  return {violations == 0 && q4 == q5 && q4 > 0,
          fmt("20 fixtures, %d (frame, asker) cells, %d violations, Q4 %zu = Q5 %zu", checked,
              violations, q4, q5)};
}

Outcome recall_gap() {
  const auto fx = synthetic::make_occlusion_fixture(4, 2);
  const QaDataset ds = generate_all(fx.log, {});
  QaDataset ego;
  for (const auto& p : ds.pairs)
    if (p.asker == fx.ego && p.qa_type == QaType::Q1) ego.pairs.push_back(p);
  const auto o = aggregate_report(ego, run_responder(OracleResponder(ds), ego, fx.log));
  const auto n = aggregate_report(ego, run_responder(NoFusionResponder(), ego, fx.log));
  const auto& oc = o.all().grounding.at(QaType::Q1);
  const auto& nc = n.all().grounding.at(QaType::Q1);
  // Each planted object yields two positive queries (its GT center and the
  // helper's detection of it) that only fusion can answer.
  const std::size_t expected_fn = 2 * static_cast<std::size_t>(fx.planted);
  const bool ok = nc.metrics.recall < oc.metrics.recall && nc.counts.fn - oc.counts.fn == expected_fn;
  return {ok, fmt("recall oracle %.4f vs no-fusion %.4f, FN gap %zu (planted %d -> expected %zu)",
                  oc.metrics.recall, nc.metrics.recall, nc.counts.fn - oc.counts.fn, fx.planted,
                  expected_fn)};
}

Outcome round_trip() {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> pos(-150.0, 150.0);
  std::uniform_int_distribution<int> type(0, 4);
  double worst = 0.0;
  int failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const QaType t = kAllQaTypes[type(rng)];
    std::size_t n = 0;
    switch (t) {
      case QaType::Q1:
      case QaType::Q2:
      case QaType::Q3: n = rng() % 2; break;
      case QaType::Q4: n = rng() % 4; break;
      case QaType::Q5: n = 6; break;
    }
    std::vector<Point2> a(n);
    for (auto& p : a) p = {pos(rng), pos(rng)};
    const std::string text = render_answer_for(t, a);
    std::vector<Point2> back;
    try {
      back = t == QaType::Q5 ? parse_waypoints(text) : parse_locations(text);
    } catch (const LocationParseError&) {
      ++failures;
      continue;
    }
    if (back.size() != a.size()) {
      ++failures;
      continue;
    }
    for (std::size_t k = 0; k < a.size(); ++k)
      worst = std::max({worst, std::abs(back[k].x - a[k].x), std::abs(back[k].y - a[k].y)});
  }
  return {failures == 0 && worst <= 0.05 + 1e-9,
          fmt("10000 pairs, %d failures, max coordinate error %.6f m", failures, worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle identity", oracle_identity},
      {"comm table reproduction", comm_table},
      {"matching threshold", matching_threshold},
      {"collision oracle equivalence", collision_oracle},
      {"sector/Q2 brute-force equivalence", q2_bruteforce},
      {"counting law", counting_law},
      {"recall-gap demonstration", recall_gap},
      {"answer text round-trip", round_trip},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %-36s %s  [%.2f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
