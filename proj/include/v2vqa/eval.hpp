#ifndef V2VQA_EVAL_HPP
#define V2VQA_EVAL_HPP

// Scoring of responder answers.
//
// Grounding (Q1-Q3) and notable-object (Q4) answers are sets of object
// centers matched one-to-one against the ground truth with a 4 m center
// distance threshold; counts are summed per type (micro P/R/F1).
// Planning (Q5) answers are six waypoints scored by L2 at 1/2/3 s and by
// collision of a 4 x 2 x 1.5 m ego box against future ground truth.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "v2vqa/geometry.hpp"
#include "v2vqa/qagen.hpp"
#include "v2vqa/scene.hpp"

namespace v2vqa {

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Answer parsing

struct LocationParseError : std::runtime_error {
  LocationParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view text, std::size_t offset) {
  std::string_view s = trim(text);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    throw LocationParseError("malformed number '" + std::string(trim(text)) + "'", offset);
  return v;
}

}  // namespace detail

/// Every "(x, y)" pair in `text`, in order. Text without parentheses
/// (including every negative template) yields an empty list.
inline std::vector<Point2> parse_locations(std::string_view text) {
  std::vector<Point2> out;
  std::size_t pos = 0;
  while ((pos = text.find('(', pos)) != std::string_view::npos) {
    const std::size_t close = text.find(')', pos + 1);
    if (close == std::string_view::npos) throw LocationParseError("unclosed '('", pos);
    const std::string_view body = text.substr(pos + 1, close - pos - 1);
    const std::size_t comma = body.find(',');
    if (comma == std::string_view::npos || body.find(',', comma + 1) != std::string_view::npos ||
        body.find('(') != std::string_view::npos)
      throw LocationParseError("expected '(x, y)'", pos);
    const double x = detail::parse_number(body.substr(0, comma), pos + 1);
    const double y = detail::parse_number(body.substr(comma + 1), pos + 2 + comma);
    out.push_back({x, y});
    pos = close + 1;
  }
  return out;
}

/// Planning answers use the same "(x, y)" vocabulary as grounding answers.
inline std::vector<Point2> parse_waypoints(std::string_view text) { return parse_locations(text); }

// ---------------------------------------------------------------------------
// Matching

struct MatchedPair {
  Point2 pred;
  Point2 gt;
  double distance = 0.0;
};

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<MatchedPair> matched_pairs;
};

inline constexpr double kMatchThreshold = 4.0;

/// Greedy one-to-one assignment in ascending center distance; a pair is a
/// true positive when its distance is strictly below `threshold`. Ties are
/// broken on coordinates so the result does not depend on input order.
inline MatchResult match_predictions(std::span<const Point2> preds, std::span<const Point2> gts,
                                     double threshold = kMatchThreshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be > 0");
  struct Cand {
    double d;
    std::size_t p, g;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t k = 0; k < gts.size(); ++k) {
      const double d = distance(preds[i], gts[k]);
      if (d < threshold) cands.push_back({d, i, k});
    }
  auto key = [&](const Cand& c) {
    return std::make_tuple(c.d, preds[c.p].x, preds[c.p].y, gts[c.g].x, gts[c.g].y);
  };
  std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) { return key(a) < key(b); });

  std::vector<bool> pred_used(preds.size()), gt_used(gts.size());
  MatchResult r;
  for (const Cand& c : cands) {
    if (pred_used[c.p] || gt_used[c.g]) continue;
    pred_used[c.p] = gt_used[c.g] = true;
    r.matched_pairs.push_back({preds[c.p], gts[c.g], c.d});
  }
  r.tp = r.matched_pairs.size();
  r.fp = preds.size() - r.tp;
  r.fn = gts.size() - r.tp;
  return r;
}

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Micro precision/recall/F1; every 0/0 is 0.
inline Prf prf(const Counts& c) {
  Prf m;
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// ---------------------------------------------------------------------------
// Planning

struct EvalConfig {
  double match_threshold = kMatchThreshold;
  double horizon = 3.0;
  int waypoint_count = 6;
  std::array<double, 3> horizons{1.0, 2.0, 3.0};
  double ego_length = 4.0;
  double ego_width = 2.0;
  double ego_height = 1.5;

  /// 1-based waypoint index reached at time `h`.
  int waypoint_at(double h) const {
    return static_cast<int>(std::lround(h / horizon * waypoint_count));
  }

  /// Frames between consecutive waypoints at 10 Hz.
  int frames_per_waypoint() const {
    return static_cast<int>(std::lround(horizon / waypoint_count / kFrameInterval));
  }

  std::string digest() const {
    Fnv1a h;
    for (double v : {match_threshold, horizon, ego_length, ego_width, ego_height})
      h.field(std::to_string(v));
    for (double v : horizons) h.field(std::to_string(v));
    return h.field(std::to_string(waypoint_count)).hex();
  }
};

using HorizonValues = std::array<double, 3>;

/// `pred` padded or truncated to `count`: missing entries repeat the last
/// available waypoint, an empty prediction stays at the ego origin.
inline std::vector<Point2> pad_waypoints(std::span<const Point2> pred, std::size_t count) {
  std::vector<Point2> out(pred.begin(), pred.begin() + std::min(pred.size(), count));
  const Point2 fill = out.empty() ? Point2{0.0, 0.0} : out.back();
  out.resize(count, fill);
  return out;
}

/// L2 error at the waypoint reached at each horizon.
inline HorizonValues planning_l2(std::span<const Point2> pred, std::span<const Point2> gt,
                                 const EvalConfig& cfg = {}) {
  if (gt.size() != static_cast<std::size_t>(cfg.waypoint_count))
    throw std::invalid_argument("ground-truth plan must have waypoint_count points");
  const auto p = pad_waypoints(pred, gt.size());
  HorizonValues out{};
  for (std::size_t h = 0; h < 3; ++h) {
    const auto idx = static_cast<std::size_t>(cfg.waypoint_at(cfg.horizons[h]) - 1);
    out[h] = distance(p[idx], gt[idx]);
  }
  return out;
}

inline double mean3(const HorizonValues& v) { return (v[0] + v[1] + v[2]) / 3.0; }

struct CollisionSample {
  /// Per horizon: collided or not; nullopt when a needed future frame is
  /// past the end of the log.
  std::array<std::optional<bool>, 3> collided;
  int skipped_frames = 0;
};

/// Ego boxes placed on predicted waypoints (ego frame of the asker at
/// `frame_idx`) and tested against the ground truth of the matching future
/// frames. GT entries whose id equals the asker's cav_id are the asker itself
/// and are ignored.
inline CollisionSample collision_rate(std::span<const Point2> pred, const std::string& asker,
                                       const SceneLog& log, const std::string& scene_id,
                                       int frame_idx, const EvalConfig& cfg = {}) {
  const auto& frames = scene_frames(log, scene_id);
  const Frame& now = frames[frame_position(log, scene_id, frame_idx)];
  const CavState* me = now.find_cav(asker);
  if (!me) throw SceneLogError("unknown cav_id " + asker);

  const auto wps = pad_waypoints(pred, static_cast<std::size_t>(cfg.waypoint_count));
  const auto yaws = headings_along({0.0, 0.0}, 0.0, wps);
  const int step = cfg.frames_per_waypoint();

  std::vector<std::optional<bool>> per_wp(wps.size());
  CollisionSample s;
  for (std::size_t k = 0; k < wps.size(); ++k) {
    const Frame* fut = future_frame(log, scene_id, frame_idx, step * static_cast<int>(k + 1));
    if (!fut) {
      ++s.skipped_frames;
      continue;
    }
    OrientedBox ego;
    ego.center = from_ego(wps[k], me->pose);
    ego.yaw = yaw_from_ego(yaws[k], me->pose);
    ego.length = cfg.ego_length;
    ego.width = cfg.ego_width;
    ego.height = cfg.ego_height;
    ego.z_center = cfg.ego_height / 2.0;
    bool hit = false;
    for (const auto& g : fut->gt_objects)
      if (g.object_id != asker && boxes_collide(ego, g.box)) {
        hit = true;
        break;
      }
    per_wp[k] = hit;
  }

  for (std::size_t h = 0; h < 3; ++h) {
    const auto last = static_cast<std::size_t>(cfg.waypoint_at(cfg.horizons[h]));
    bool complete = true, hit = false;
    for (std::size_t k = 0; k < last && k < per_wp.size(); ++k) {
      if (!per_wp[k]) complete = false;
      else hit = hit || *per_wp[k];
    }
    if (complete) s.collided[h] = hit;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Responses

struct Response {
  std::string qa_id;
  std::string answer_text;
  bool transport_failure = false;  // reply never arrived; scored as empty
  bool malformed = false;          // reply arrived but was not a valid answer object
};

using ResponseMap = std::map<std::string, Response>;

struct ResponseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// JSON Lines of {"qa_id": str, "answer": str}; duplicate ids are rejected.
inline ResponseMap read_responses(std::istream& in) {
  ResponseMap out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      Response r;
      r.qa_id = j.at("qa_id").get<std::string>();
      r.answer_text = j.at("answer").get<std::string>();
      r.transport_failure = j.value("transport_failure", false);
      r.malformed = j.value("malformed", false);
      if (out.contains(r.qa_id))
        throw ResponseError("line " + std::to_string(line) + ": duplicate qa_id " + r.qa_id);
      out.emplace(r.qa_id, std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ResponseError("line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

inline ResponseMap load_responses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ResponseError("cannot open " + path);
  return read_responses(in);
}

inline void write_responses(std::ostream& out, const ResponseMap& responses) {
  for (const auto& [id, r] : responses) {
    nlohmann::ordered_json j;
    j["qa_id"] = id;
    j["answer"] = r.answer_text;
    if (r.transport_failure) j["transport_failure"] = true;
    if (r.malformed) j["malformed"] = true;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Per-pair scoring and aggregation

enum class ReplyStatus { ok, missing, unparseable, transport_failure };

inline std::string_view to_string(ReplyStatus s) {
  switch (s) {
    case ReplyStatus::ok: return "ok";
    case ReplyStatus::missing: return "missing";
    case ReplyStatus::unparseable: return "unparseable";
    case ReplyStatus::transport_failure: return "transport_failure";
  }
  return "ok";
}

struct PairScore {
  QaType type = QaType::Q1;
  ReplyStatus status = ReplyStatus::ok;
  Counts counts;                       // Q1-Q4
  std::optional<HorizonValues> l2;     // Q5
  std::optional<CollisionSample> collision;  // Q5 with a scene log
};

inline PairScore score_pair(const QaPair& pair, const Response* reply, const SceneLog* log,
                            const EvalConfig& cfg) {
  PairScore s;
  s.type = pair.qa_type;
  std::vector<Point2> preds;
  if (!reply) {
    s.status = ReplyStatus::missing;
  } else if (reply->transport_failure) {
    s.status = ReplyStatus::transport_failure;
  } else if (reply->malformed) {
    s.status = ReplyStatus::unparseable;
  } else {
    try {
      preds = parse_locations(reply->answer_text);
    } catch (const LocationParseError&) {
      s.status = ReplyStatus::unparseable;
    }
  }

  if (pair.qa_type == QaType::Q5) {
    s.l2 = planning_l2(preds, pair.answer, cfg);
    if (log) s.collision = collision_rate(preds, pair.asker, *log, pair.scene_id, pair.frame_idx, cfg);
  } else {
    const MatchResult m = match_predictions(preds, pair.answer, cfg.match_threshold);
    s.counts = {m.tp, m.fp, m.fn};
  }
  return s;
}

struct PlanningScore {
  HorizonValues l2_by_horizon{};
  double l2_avg = 0.0;
  HorizonValues cr_by_horizon{};  // percent
  double cr_avg = 0.0;
  std::size_t n_samples = 0;
  std::array<std::size_t, 3> cr_samples{};  // denominators per horizon
  std::size_t n_skipped_frames = 0;
};

struct TypeScore {
  Counts counts;
  Prf metrics;
  std::size_t n_pairs = 0;
};

struct SplitReport {
  std::map<QaType, TypeScore> grounding;  // Q1..Q4
  double q_gr_f1 = 0.0;                  // mean F1 of Q1..Q3
  PlanningScore planning;
  std::size_t n_pairs = 0;
  std::size_t n_missing = 0;
  std::size_t n_unparseable = 0;
  std::size_t n_transport_failures = 0;
  bool collisions_evaluated = false;
};

struct EvalReport {
  std::string dataset_digest;
  std::string config_digest;
  std::map<std::string, SplitReport> splits;  // always contains "all"

  const SplitReport& all() const { return splits.at("all"); }
  bool degraded() const { return all().n_unparseable > 0 || all().n_transport_failures > 0; }
};

class SplitAccumulator {
 public:
  void add(const PairScore& s) {
    ++r_.n_pairs;
    switch (s.status) {
      case ReplyStatus::missing: ++r_.n_missing; break;
      case ReplyStatus::unparseable: ++r_.n_unparseable; break;
      case ReplyStatus::transport_failure: ++r_.n_transport_failures; break;
      case ReplyStatus::ok: break;
    }
    if (s.type == QaType::Q5) {
      ++r_.planning.n_samples;
      for (std::size_t h = 0; h < 3; ++h) l2_sum_[h] += (*s.l2)[h];
      if (s.collision) {
        r_.collisions_evaluated = true;
        r_.planning.n_skipped_frames += static_cast<std::size_t>(s.collision->skipped_frames);
        for (std::size_t h = 0; h < 3; ++h)
          if (s.collision->collided[h]) {
            ++r_.planning.cr_samples[h];
            if (*s.collision->collided[h]) ++hits_[h];
          }
      }
    } else {
      auto& t = r_.grounding[s.type];
      t.counts += s.counts;
      ++t.n_pairs;
    }
  }

  SplitReport finish() const {
    SplitReport r = r_;
    for (auto t : {QaType::Q1, QaType::Q2, QaType::Q3, QaType::Q4}) {
      auto& ts = r.grounding[t];
      ts.metrics = prf(ts.counts);
    }
    r.q_gr_f1 = (r.grounding[QaType::Q1].metrics.f1 + r.grounding[QaType::Q2].metrics.f1 +
                 r.grounding[QaType::Q3].metrics.f1) / 3.0;
    auto& p = r.planning;
    for (std::size_t h = 0; h < 3; ++h) {
      p.l2_by_horizon[h] = p.n_samples ? l2_sum_[h] / static_cast<double>(p.n_samples) : 0.0;
      p.cr_by_horizon[h] = p.cr_samples[h] ? 100.0 * static_cast<double>(hits_[h]) /
                                                 static_cast<double>(p.cr_samples[h])
                                           : 0.0;
    }
    p.l2_avg = mean3(p.l2_by_horizon);
    p.cr_avg = mean3(p.cr_by_horizon);
    return r;
  }

 private:
  SplitReport r_;
  HorizonValues l2_sum_{};
  std::array<std::size_t, 3> hits_{};
};

/// Scores every pair of `ds` against `responses`. Missing and unparseable
/// replies count as empty predictions. `log` enables collision rates;
/// `split_of` maps scene ids to split names for per-split sections.
inline EvalReport aggregate_report(const QaDataset& ds, const ResponseMap& responses,
                                   const SceneLog* log = nullptr, const EvalConfig& cfg = {},
                                   const std::map<std::string, std::string>& split_of = {},
                                   unsigned jobs = 1) {
  std::vector<PairScore> scores(ds.pairs.size());
  auto work = [&](std::size_t i) {
    const QaPair& p = ds.pairs[i];
    auto it = responses.find(p.qa_id);
    scores[i] = score_pair(p, it == responses.end() ? nullptr : &it->second, log, cfg);
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(ds.pairs.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < scores.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < scores.size();) work(i);
      });
  }

  std::map<std::string, SplitAccumulator> acc;
  acc["all"];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    acc["all"].add(scores[i]);
    if (auto it = split_of.find(ds.pairs[i].scene_id); it != split_of.end())
      acc[it->second].add(scores[i]);
  }

  EvalReport rep;
  rep.dataset_digest = dataset_digest(ds);
  rep.config_digest = cfg.digest();
  for (const auto& [name, a] : acc) rep.splits[name] = a.finish();
  return rep;
}

/// Counts-only grounding metrics for a subset of types.
inline std::map<QaType, Prf> grounding_metrics(const QaDataset& ds, const ResponseMap& responses,
                                               std::span<const QaType> types,
                                               const EvalConfig& cfg = {}) {
  std::map<QaType, Counts> counts;
  for (auto t : types) {
    if (t == QaType::Q5) throw std::invalid_argument("grounding_metrics: Q5 is a planning type");
    counts[t];
  }
  for (const auto& p : ds.pairs) {
    auto c = counts.find(p.qa_type);
    if (c == counts.end()) continue;
    auto it = responses.find(p.qa_id);
    c->second += score_pair(p, it == responses.end() ? nullptr : &it->second, nullptr, cfg).counts;
  }
  std::map<QaType, Prf> out;
  for (const auto& [t, c] : counts) out[t] = prf(c);
  return out;
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::ordered_json split_to_json(const SplitReport& r) {
  nlohmann::ordered_json j;
  for (auto t : {QaType::Q1, QaType::Q2, QaType::Q3, QaType::Q4}) {
    const auto& ts = r.grounding.at(t);
    j[std::string(to_string(t))] = {{"f1", ts.metrics.f1},        {"precision", ts.metrics.precision},
                                    {"recall", ts.metrics.recall}, {"tp", ts.counts.tp},
                                    {"fp", ts.counts.fp},          {"fn", ts.counts.fn},
                                    {"n_pairs", ts.n_pairs}};
  }
  j["Q_Gr"] = {{"f1", r.q_gr_f1}};
  const auto& p = r.planning;
  nlohmann::ordered_json q5;
  q5["l2_m"] = {{"1s", p.l2_by_horizon[0]}, {"2s", p.l2_by_horizon[1]},
                {"3s", p.l2_by_horizon[2]}, {"average", p.l2_avg}};
  if (r.collisions_evaluated)
    q5["cr_percent"] = {{"1s", p.cr_by_horizon[0]}, {"2s", p.cr_by_horizon[1]},
                        {"3s", p.cr_by_horizon[2]}, {"average", p.cr_avg}};
  else
    q5["cr_percent"] = nullptr;
  q5["n_samples"] = p.n_samples;
  q5["cr_samples"] = p.cr_samples;
  q5["n_skipped_frames"] = p.n_skipped_frames;
  j["Q5"] = std::move(q5);
  j["n_pairs"] = r.n_pairs;
  j["n_missing"] = r.n_missing;
  j["n_unparseable"] = r.n_unparseable;
  j["n_transport_failures"] = r.n_transport_failures;
  return j;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& rep) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["provenance"] = {{"dataset_digest", rep.dataset_digest}, {"config_digest", rep.config_digest}};
  j["degraded"] = rep.degraded();
  j["splits"] = nlohmann::ordered_json::object();
  for (const auto& [name, r] : rep.splits) j["splits"][name] = split_to_json(r);
  return j;
}

/// One CSV row per pair: id, type, status, match counts, L2 and collision flags.
inline void write_pair_csv(std::ostream& out, const QaDataset& ds, const ResponseMap& responses,
                           const SceneLog* log, const EvalConfig& cfg = {}) {
  out << "qa_id,qa_type,status,tp,fp,fn,l2_1s,l2_2s,l2_3s,collide_1s,collide_2s,collide_3s\n";
  auto flag = [](const std::optional<bool>& b) -> std::string {
    return b ? (*b ? "1" : "0") : "";
  };
  for (const auto& p : ds.pairs) {
    auto it = responses.find(p.qa_id);
    const PairScore s = score_pair(p, it == responses.end() ? nullptr : &it->second, log, cfg);
    out << p.qa_id << ',' << to_string(p.qa_type) << ',' << to_string(s.status) << ','
        << s.counts.tp << ',' << s.counts.fp << ',' << s.counts.fn;
    if (s.l2) {
      char buf[96];
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f", (*s.l2)[0], (*s.l2)[1], (*s.l2)[2]);
      out << buf;
    } else {
      out << ",,,";
    }
    if (s.collision)
      out << ',' << flag(s.collision->collided[0]) << ',' << flag(s.collision->collided[1]) << ','
          << flag(s.collision->collided[2]);
    else
      out << ",,,";
    out << '\n';
  }
}

}  // namespace v2vqa

#endif  // V2VQA_EVAL_HPP
