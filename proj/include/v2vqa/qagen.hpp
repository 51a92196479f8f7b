#ifndef V2VQA_QAGEN_HPP
#define V2VQA_QAGEN_HPP

// Rule-based generation of the five cooperative-driving QA types.
//
//   Q1  grounding at a query location (GT and detection centers as queries)
//   Q2  grounding behind a detected reference object at a location
//   Q3  grounding behind the closest detected object in one of six directions
//   Q4  notable objects within 10 m of the asker's next 3 s of waypoints
//   Q5  planning: the asker's six future waypoints over 3 s
//
// Geometry is evaluated in the world frame; everything stored in a QaPair is
// in the asker's ego frame (x forward, y right) and snapped to the rendering
// precision so that structured and text fields agree exactly.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "v2vqa/geometry.hpp"
#include "v2vqa/hash.hpp"
#include "v2vqa/scene.hpp"
#include "v2vqa/templates.hpp"

namespace v2vqa {

enum class QaType { Q1, Q2, Q3, Q4, Q5 };

inline constexpr std::array<QaType, 5> kAllQaTypes{QaType::Q1, QaType::Q2, QaType::Q3, QaType::Q4,
                                                   QaType::Q5};

inline std::string_view to_string(QaType t) {
  switch (t) {
    case QaType::Q1: return "Q1";
    case QaType::Q2: return "Q2";
    case QaType::Q3: return "Q3";
    case QaType::Q4: return "Q4";
    case QaType::Q5: return "Q5";
  }
  return "Q1";
}

inline std::optional<QaType> qa_type_from_string(std::string_view s) {
  for (auto t : kAllQaTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

inline bool is_grounding(QaType t) { return t == QaType::Q1 || t == QaType::Q2 || t == QaType::Q3; }

struct GenConfig {
  double sector_half_angle = deg2rad(15.0);
  double sector_range = 30.0;
  double notable_radius = 10.0;
  double horizon = 3.0;
  int waypoint_count = 6;
  int max_notable = 3;
  double coordinate_precision = 0.1;

  void validate() const {
    if (!(sector_half_angle > 0.0 && sector_half_angle < kPi / 2.0))
      throw std::invalid_argument("sector_half_angle must be in (0, pi/2)");
    if (!(sector_range > 0.0)) throw std::invalid_argument("sector_range must be > 0");
    if (!(notable_radius > 0.0)) throw std::invalid_argument("notable_radius must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (waypoint_count < 1) throw std::invalid_argument("waypoint_count must be >= 1");
    if (max_notable < 1) throw std::invalid_argument("max_notable must be >= 1");
    const double lg = std::log10(coordinate_precision);
    if (!(coordinate_precision > 0.0) || std::abs(lg - std::round(lg)) > 1e-9 || lg > 0.0)
      throw std::invalid_argument("coordinate_precision must be 1, 0.1, 0.01, ...");
  }

  std::string digest() const {
    Fnv1a h;
    for (double v : {sector_half_angle, sector_range, notable_radius, horizon,
                     coordinate_precision})
      h.field(std::to_string(v));
    h.field(std::to_string(waypoint_count)).field(std::to_string(max_notable));
    return h.hex();
  }
};

/// Structured question parameters; which fields are set depends on the type.
struct QaQuery {
  std::optional<Point2> point;  // Q1 query location, Q2/Q3 reference center
  std::optional<DirectionLabel> direction;  // Q3
  std::vector<Point2> waypoints;            // Q4
};

struct QaPair {
  std::string qa_id;
  QaType qa_type = QaType::Q1;
  std::string scene_id;
  int frame_idx = 0;
  std::string asker;
  int index = 0;  // position among pairs of this (scene, frame, asker, type)
  QaQuery query;
  std::string question_text;
  std::vector<Point2> answer;  // ego-frame locations or waypoints
  std::string answer_text;
  bool is_positive = false;
};

struct QaDataset {
  std::vector<QaPair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

inline std::string make_qa_id(const std::string& scene, int frame_idx, const std::string& asker,
                              QaType type, int index) {
  return Fnv1a()
      .field(scene)
      .field(std::to_string(frame_idx))
      .field(asker)
      .field(to_string(type))
      .field(std::to_string(index))
      .hex();
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render_question(const QaPair& p, double precision = 0.1) {
  using namespace templates;
  switch (p.qa_type) {
    case QaType::Q1:
      return fill(kQ1Question, "{loc}", format_location(p.query.point.value(), precision));
    case QaType::Q2:
      return fill(kQ2Question, "{loc}", format_location(p.query.point.value(), precision));
    case QaType::Q3:
      return fill(kQ3Question, "{dir}", direction_phrase(p.query.direction.value()));
    case QaType::Q4:
      return fill(kQ4Question, "{locs}", format_locations(p.query.waypoints, precision));
    case QaType::Q5:
      return std::string(kQ5Question);
  }
  return {};
}

/// Answer text for `answer` locations of a given type; shared by the dataset
/// renderer and every responder so that all answers use one vocabulary.
inline std::string render_answer_for(QaType type, std::span<const Point2> answer,
                                     double precision = 0.1) {
  using namespace templates;
  switch (type) {
    case QaType::Q1:
      return answer.empty() ? std::string(kQ1Negative)
                            : fill(kQ1Positive, "{loc}", format_location(answer.front(), precision));
    case QaType::Q2:
    case QaType::Q3:
      return answer.empty()
                 ? std::string(kBehindNegative)
                 : fill(kBehindPositive, "{loc}", format_location(answer.front(), precision));
    case QaType::Q4:
      return answer.empty() ? std::string(kQ4Negative)
                            : fill(kQ4Positive, "{locs}", format_locations(answer, precision));
    case QaType::Q5:
      return fill(kQ5Answer, "{locs}", format_locations(answer, precision));
  }
  return {};
}

inline std::string render_answer(const QaPair& p, double precision = 0.1) {
  return render_answer_for(p.qa_type, p.answer, precision);
}

// ---------------------------------------------------------------------------
// Generation rules

namespace detail {

inline const CavState& require_asker(const Frame& frame, const std::string& asker) {
  const CavState* c = frame.find_cav(asker);
  if (!c) throw std::invalid_argument("asker " + asker + " not in frame");
  if (c->is_infrastructure)
    throw std::invalid_argument("infrastructure node " + asker + " cannot ask questions");
  return *c;
}

inline QaPair start_pair(const Frame& frame, const std::string& asker, QaType type, int index) {
  QaPair p;
  p.qa_type = type;
  p.scene_id = frame.scene_id;
  p.frame_idx = frame.frame_idx;
  p.asker = asker;
  p.index = index;
  p.qa_id = make_qa_id(frame.scene_id, frame.frame_idx, asker, type, index);
  return p;
}

inline void finish_pair(QaPair& p, const GenConfig& cfg) {
  p.is_positive = !p.answer.empty();
  p.question_text = render_question(p, cfg.coordinate_precision);
  p.answer_text = render_answer(p, cfg.coordinate_precision);
}

inline Point2 ego_snap(Point2 world, const Pose2& pose, const GenConfig& cfg) {
  return templates::quantize(to_ego(world, pose), cfg.coordinate_precision);
}

/// Closer first, then lexicographic id.
template <class Candidate>
bool closer(double da, const Candidate& a, double db, const Candidate& b) {
  return da < db || (da == db && a.object_id < b.object_id);
}

}  // namespace detail

/// GT box whose footprint holds `p`; nearest center wins, then lowest id.
inline const GtObject* occupying_object(const Frame& frame, Point2 p) {
  const GtObject* best = nullptr;
  double best_d = 0.0;
  for (const auto& g : frame.gt_objects) {
    if (!point_in_box(p, g.box)) continue;
    const double d = distance(p, g.box.center);
    if (!best || detail::closer(d, g, best_d, *best)) {
      best = &g;
      best_d = d;
    }
  }
  return best;
}

/// Sector behind `reference` as seen from `observer`; nullopt when they coincide.
inline std::optional<Sector> behind_sector(Point2 observer, Point2 reference,
                                           const GenConfig& cfg) {
  const Point2 d = reference - observer;
  const double n = norm(d);
  if (!(n > 1e-9)) return std::nullopt;
  return Sector{reference, d * (1.0 / n), cfg.sector_half_angle, cfg.sector_range};
}

/// Closest GT center inside `sector` (distance to apex), skipping any object
/// whose box holds the reference point itself.
inline const GtObject* closest_behind(const Frame& frame, const Sector& sector) {
  const GtObject* best = nullptr;
  double best_d = 0.0;
  for (const auto& g : frame.gt_objects) {
    if (point_in_box(sector.apex, g.box)) continue;
    if (!sector_contains(sector, g.box.center)) continue;
    const double d = distance(g.box.center, sector.apex);
    if (!best || detail::closer(d, g, best_d, *best)) {
      best = &g;
      best_d = d;
    }
  }
  return best;
}

inline std::vector<QaPair> gen_q1(const Frame& frame, const std::string& asker,
                                  const GenConfig& cfg) {
  const CavState& me = detail::require_asker(frame, asker);
  std::vector<Point2> queries;
  for (const auto& g : frame.gt_objects) queries.push_back(g.box.center);
  for (const auto& c : frame.cavs)
    for (const auto& d : c.detections) queries.push_back(d.box.center);

  std::vector<QaPair> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    QaPair p = detail::start_pair(frame, asker, QaType::Q1, static_cast<int>(i));
    p.query.point = detail::ego_snap(queries[i], me.pose, cfg);
    if (const GtObject* g = occupying_object(frame, queries[i]))
      p.answer.push_back(detail::ego_snap(g->box.center, me.pose, cfg));
    detail::finish_pair(p, cfg);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<QaPair> gen_q2(const Frame& frame, const std::string& asker,
                                  const GenConfig& cfg) {
  const CavState& me = detail::require_asker(frame, asker);
  std::vector<QaPair> out;
  int index = 0;
  for (const auto& det : me.detections) {
    const auto sector = behind_sector(me.pose.position, det.box.center, cfg);
    if (!sector) continue;
    QaPair p = detail::start_pair(frame, asker, QaType::Q2, index++);
    p.query.point = detail::ego_snap(det.box.center, me.pose, cfg);
    if (const GtObject* g = closest_behind(frame, *sector))
      p.answer.push_back(detail::ego_snap(g->box.center, me.pose, cfg));
    detail::finish_pair(p, cfg);
    out.push_back(std::move(p));
  }
  return out;
}

/// The asker's own detection nearest to it in each direction wedge.
inline std::map<DirectionLabel, const Detection*> closest_per_direction(const CavState& me) {
  std::map<DirectionLabel, std::pair<double, const Detection*>> best;
  for (const auto& det : me.detections) {
    const Point2 e = to_ego(det.box.center, me.pose);
    if (e.x == 0.0 && e.y == 0.0) continue;
    const DirectionLabel label = direction_of(e);
    const double d = norm(e);
    auto it = best.find(label);
    if (it == best.end() || d < it->second.first) best[label] = {d, &det};
  }
  std::map<DirectionLabel, const Detection*> out;
  for (const auto& [label, entry] : best) out[label] = entry.second;
  return out;
}

inline std::vector<QaPair> gen_q3(const Frame& frame, const std::string& asker,
                                  const GenConfig& cfg) {
  const CavState& me = detail::require_asker(frame, asker);
  const auto refs = closest_per_direction(me);
  std::vector<QaPair> out;
  int index = 0;
  for (DirectionLabel label : kAllDirections) {
    auto it = refs.find(label);
    if (it == refs.end()) continue;
    const auto sector = behind_sector(me.pose.position, it->second->box.center, cfg);
    if (!sector) continue;
    QaPair p = detail::start_pair(frame, asker, QaType::Q3, index++);
    p.query.direction = label;
    p.query.point = detail::ego_snap(it->second->box.center, me.pose, cfg);
    if (const GtObject* g = closest_behind(frame, *sector))
      p.answer.push_back(detail::ego_snap(g->box.center, me.pose, cfg));
    detail::finish_pair(p, cfg);
    out.push_back(std::move(p));
  }
  return out;
}

/// Asker's future waypoints (world frame) or nullopt when the log ends too soon.
inline std::optional<std::vector<Point2>> future_waypoints(const SceneLog& log, const Frame& frame,
                                                           const std::string& asker,
                                                           const GenConfig& cfg) {
  const auto traj = cav_trajectory(log, frame.scene_id, asker);
  try {
    return interpolate_waypoints(traj, frame.timestamp, cfg.horizon, cfg.waypoint_count);
  } catch (const HorizonExceedsLog&) {
    return std::nullopt;
  }
}

inline std::vector<QaPair> gen_q4(const Frame& frame, const std::string& asker,
                                  const SceneLog& log, const GenConfig& cfg) {
  const CavState& me = detail::require_asker(frame, asker);
  const auto world_wps = future_waypoints(log, frame, asker, cfg);
  if (!world_wps) return {};

  QaPair p = detail::start_pair(frame, asker, QaType::Q4, 0);
  for (Point2 w : *world_wps) p.query.waypoints.push_back(detail::ego_snap(w, me.pose, cfg));

  struct Near {
    double d;
    const GtObject* g;
  };
  std::vector<Near> near;
  for (const auto& g : frame.gt_objects) {
    const double d = polyline_distance(to_ego(g.box.center, me.pose), p.query.waypoints);
    if (d <= cfg.notable_radius) near.push_back({d, &g});
  }
  std::sort(near.begin(), near.end(), [](const Near& a, const Near& b) {
    return detail::closer(a.d, *a.g, b.d, *b.g);
  });
  if (near.size() > static_cast<std::size_t>(cfg.max_notable)) near.resize(cfg.max_notable);
  for (const Near& n : near) p.answer.push_back(detail::ego_snap(n.g->box.center, me.pose, cfg));
  detail::finish_pair(p, cfg);
  return {std::move(p)};
}

inline std::vector<QaPair> gen_q5(const Frame& frame, const std::string& asker,
                                  const SceneLog& log, const GenConfig& cfg) {
  const CavState& me = detail::require_asker(frame, asker);
  const auto world_wps = future_waypoints(log, frame, asker, cfg);
  if (!world_wps) return {};
  QaPair p = detail::start_pair(frame, asker, QaType::Q5, 0);
  for (Point2 w : *world_wps) p.answer.push_back(detail::ego_snap(w, me.pose, cfg));
  detail::finish_pair(p, cfg);
  p.is_positive = true;
  return {std::move(p)};
}

/// All five types for one (frame, asker), in type order.
inline std::vector<QaPair> generate_for(const Frame& frame, const std::string& asker,
                                        const SceneLog& log, const GenConfig& cfg) {
  std::vector<QaPair> out = gen_q1(frame, asker, cfg);
  for (auto&& part : {gen_q2(frame, asker, cfg), gen_q3(frame, asker, cfg),
                      gen_q4(frame, asker, log, cfg), gen_q5(frame, asker, log, cfg)})
    out.insert(out.end(), part.begin(), part.end());
  return out;
}

inline bool canonical_less(const QaPair& a, const QaPair& b) {
  return std::tie(a.scene_id, a.frame_idx, a.asker, a.qa_type, a.index) <
         std::tie(b.scene_id, b.frame_idx, b.asker, b.qa_type, b.index);
}

/// Every (scene, frame, non-infrastructure CAV, type). Output order is
/// canonical and independent of `jobs`.
inline QaDataset generate_all(const SceneLog& log, const GenConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  std::vector<const Frame*> frames;
  for (const auto& [_, fs] : log.scenes)
    for (const auto& f : fs) frames.push_back(&f);

  std::vector<std::vector<QaPair>> per_frame(frames.size());
  auto work = [&](std::size_t i) {
    const Frame& f = *frames[i];
    for (const auto& c : f.cavs) {
      if (c.is_infrastructure) continue;
      auto pairs = generate_for(f, c.cav_id, log, cfg);
      per_frame[i].insert(per_frame[i].end(), std::make_move_iterator(pairs.begin()),
                          std::make_move_iterator(pairs.end()));
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(frames.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < frames.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < frames.size();) work(i);
      });
  }

  QaDataset ds;
  for (auto& v : per_frame)
    ds.pairs.insert(ds.pairs.end(), std::make_move_iterator(v.begin()),
                    std::make_move_iterator(v.end()));
  std::stable_sort(ds.pairs.begin(), ds.pairs.end(), canonical_less);
  return ds;
}

// ---------------------------------------------------------------------------
// Summary counts

struct TypeCounts {
  std::size_t total = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

inline std::map<QaType, TypeCounts> count_by_type(const QaDataset& ds) {
  std::map<QaType, TypeCounts> out;
  for (auto t : kAllQaTypes) out[t] = {};
  for (const auto& p : ds.pairs) {
    auto& c = out[p.qa_type];
    ++c.total;
    (p.is_positive ? c.positive : c.negative) += 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON Lines

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline nlohmann::ordered_json point_json(Point2 p) {
  return nlohmann::ordered_json::array({round6(p.x), round6(p.y)});
}

inline Point2 point_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw DatasetError(what + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<Point2> points_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw DatasetError(what + ": expected array");
  std::vector<Point2> out;
  for (const auto& e : j) out.push_back(point_from_json(e, what));
  return out;
}

}  // namespace detail

inline nlohmann::ordered_json pair_to_json(const QaPair& p) {
  nlohmann::ordered_json j;
  j["qa_id"] = p.qa_id;
  j["qa_type"] = to_string(p.qa_type);
  j["scene_id"] = p.scene_id;
  j["frame_idx"] = p.frame_idx;
  j["asker"] = p.asker;
  j["index"] = p.index;
  nlohmann::ordered_json q = nlohmann::ordered_json::object();
  if (p.query.point) q["point"] = detail::point_json(*p.query.point);
  if (p.query.direction) q["direction"] = to_string(*p.query.direction);
  if (!p.query.waypoints.empty()) {
    q["waypoints"] = nlohmann::ordered_json::array();
    for (Point2 w : p.query.waypoints) q["waypoints"].push_back(detail::point_json(w));
  }
  j["query"] = std::move(q);
  j["question"] = p.question_text;
  j["answer"] = nlohmann::ordered_json::array();
  for (Point2 a : p.answer) j["answer"].push_back(detail::point_json(a));
  j["answer_text"] = p.answer_text;
  j["positive"] = p.is_positive;
  return j;
}

inline QaPair pair_from_json(const nlohmann::json& j, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  try {
    QaPair p;
    p.qa_id = j.at("qa_id").get<std::string>();
    const auto type = qa_type_from_string(j.at("qa_type").get<std::string>());
    if (!type) throw DatasetError(where + ": qa_type: unknown type");
    p.qa_type = *type;
    p.scene_id = j.at("scene_id").get<std::string>();
    p.frame_idx = j.at("frame_idx").get<int>();
    p.asker = j.at("asker").get<std::string>();
    p.index = j.at("index").get<int>();
    const auto& q = j.at("query");
    if (q.contains("point")) p.query.point = detail::point_from_json(q["point"], where + ": query.point");
    if (q.contains("direction"))
      p.query.direction = direction_from_string(q["direction"].get<std::string>());
    if (q.contains("waypoints"))
      p.query.waypoints = detail::points_from_json(q["waypoints"], where + ": query.waypoints");
    p.question_text = j.at("question").get<std::string>();
    p.answer = detail::points_from_json(j.at("answer"), where + ": answer");
    p.answer_text = j.at("answer_text").get<std::string>();
    p.is_positive = j.at("positive").get<bool>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(where + ": " + e.what());
  } catch (const GeometryError& e) {
    throw DatasetError(where + ": " + e.what());
  }
}

inline void write_dataset(std::ostream& out, const QaDataset& ds) {
  for (const auto& p : ds.pairs) out << pair_to_json(p).dump() << '\n';
}

inline void save_dataset(const std::string& path, const QaDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  write_dataset(out, ds);
}

inline QaDataset read_dataset(std::istream& in) {
  QaDataset ds;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError("line " + std::to_string(line) + ": parse error: " + e.what());
    }
    QaPair p = pair_from_json(j, line);
    if (!ids.insert(p.qa_id).second)
      throw DatasetError("line " + std::to_string(line) + ": duplicate qa_id " + p.qa_id);
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

inline QaDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path);
  return read_dataset(in);
}

/// Digest of the canonical JSONL bytes.
inline std::string dataset_digest(const QaDataset& ds) {
  Fnv1a h;
  for (const auto& p : ds.pairs) h.update(pair_to_json(p).dump()).update("\n");
  return h.hex();
}

}  // namespace v2vqa

#endif  // V2VQA_QAGEN_HPP
