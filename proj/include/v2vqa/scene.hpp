#ifndef V2VQA_SCENE_HPP
#define V2VQA_SCENE_HPP

// Scene-log data model and its JSON Lines representation.
//
// One line per frame:
//   {"scene_id": str, "frame_idx": int, "timestamp": float,
//    "cavs": [{"cav_id": str, "infrastructure": bool,
//              "pose": {"x", "y", "yaw"},
//              "detections": [{"cx","cy","cz","l","w","h","yaw","score"}]}],
//    "gt": [{"id": str, "class": str, "cx","cy","cz","l","w","h","yaw"}]}
//
// "cz" and "h" are optional on read (default 0.75 m and 1.5 m). Floats are
// written with at most six decimal places.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "v2vqa/geometry.hpp"

namespace v2vqa {

inline constexpr double kFrameInterval = 0.1;  // 10 Hz
inline constexpr double kDefaultZCenter = 0.75;
inline constexpr double kDefaultHeight = 1.5;

struct GtObject {
  std::string object_id;
  OrientedBox box;
  std::string class_label = "car";
};

struct Detection {
  OrientedBox box;
  double score = 1.0;
  std::string source_cav;
};

struct CavState {
  std::string cav_id;
  Pose2 pose;
  std::vector<Detection> detections;
  bool is_infrastructure = false;
};

struct Frame {
  std::string scene_id;
  int frame_idx = 0;
  double timestamp = 0.0;
  std::vector<CavState> cavs;
  std::vector<GtObject> gt_objects;

  const CavState* find_cav(std::string_view id) const {
    for (const auto& c : cavs)
      if (c.cav_id == id) return &c;
    return nullptr;
  }
};

struct SceneLog {
  std::map<std::string, std::vector<Frame>> scenes;

  bool empty() const { return scenes.empty(); }
  std::size_t frame_count() const {
    std::size_t n = 0;
    for (const auto& [_, frames] : scenes) n += frames.size();
    return n;
  }
};

/// Thrown for any ingestion failure; `what()` names the line and field.
struct SceneLogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double round6(double v) {
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;
}

class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string path, std::size_t line)
      : j_(j), path_(std::move(path)), line_(line) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    std::ostringstream os;
    os << "line " << line_ << ": " << join(field) << ": " << what;
    throw SceneLogError(os.str());
  }

  const nlohmann::json& member(const std::string& key) const {
    if (!j_.is_object()) fail("", "expected object");
    auto it = j_.find(key);
    if (it == j_.end()) fail(key, "missing field");
    return *it;
  }

  double number(const std::string& key) const {
    const auto& v = member(key);
    if (!v.is_number()) fail(key, "expected number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "non-finite number");
    return d;
  }

  double number_or(const std::string& key, double fallback) const {
    if (!j_.is_object() || !j_.contains(key)) return fallback;
    return number(key);
  }

  std::string string(const std::string& key) const {
    const auto& v = member(key);
    if (!v.is_string()) fail(key, "expected string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key) const {
    const auto& v = member(key);
    if (!v.is_boolean()) fail(key, "expected bool");
    return v.get<bool>();
  }

  long long integer(const std::string& key) const {
    const auto& v = member(key);
    if (!v.is_number_integer()) fail(key, "expected integer");
    return v.get<long long>();
  }

  const nlohmann::json& array(const std::string& key) const {
    const auto& v = member(key);
    if (!v.is_array()) fail(key, "expected array");
    return v;
  }

  FieldReader child(const nlohmann::json& j, const std::string& suffix) const {
    return FieldReader(j, join(suffix), line_);
  }

  std::string join(const std::string& field) const {
    if (field.empty()) return path_.empty() ? "<root>" : path_;
    if (path_.empty()) return field;
    if (field.front() == '[') return path_ + field;
    return path_ + "." + field;
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::size_t line_;
};

inline OrientedBox read_box(const FieldReader& r) {
  OrientedBox b;
  b.center = {r.number("cx"), r.number("cy")};
  b.z_center = r.number_or("cz", kDefaultZCenter);
  b.length = r.number("l");
  b.width = r.number("w");
  b.height = r.number_or("h", kDefaultHeight);
  b.yaw = r.number("yaw");
  if (!(b.length > 0.0)) r.fail("l", "must be > 0");
  if (!(b.width > 0.0)) r.fail("w", "must be > 0");
  if (!(b.height > 0.0)) r.fail("h", "must be > 0");
  return b;
}

inline void write_box(nlohmann::ordered_json& j, const OrientedBox& b) {
  j["cx"] = round6(b.center.x);
  j["cy"] = round6(b.center.y);
  j["cz"] = round6(b.z_center);
  j["l"] = round6(b.length);
  j["w"] = round6(b.width);
  j["h"] = round6(b.height);
  j["yaw"] = round6(b.yaw);
}

}  // namespace detail

/// Parses one frame line. Field-level schema errors only; cross-frame
/// invariants are checked by validate().
inline Frame parse_frame(const nlohmann::json& j, std::size_t line) {
  detail::FieldReader r(j, "", line);
  Frame f;
  f.scene_id = r.string("scene_id");
  const long long idx = r.integer("frame_idx");
  if (idx < 0 || idx > std::numeric_limits<int>::max()) r.fail("frame_idx", "out of range");
  f.frame_idx = static_cast<int>(idx);
  f.timestamp = r.number("timestamp");

  const auto& cavs = r.array("cavs");
  for (std::size_t i = 0; i < cavs.size(); ++i) {
    auto cr = r.child(cavs[i], "cavs[" + std::to_string(i) + "]");
    CavState c;
    c.cav_id = cr.string("cav_id");
    c.is_infrastructure = cr.boolean("infrastructure");
    auto pr = cr.child(cr.member("pose"), "pose");
    c.pose.position = {pr.number("x"), pr.number("y")};
    c.pose.yaw = normalize_angle(pr.number("yaw"));
    const auto& dets = cr.array("detections");
    for (std::size_t k = 0; k < dets.size(); ++k) {
      auto dr = cr.child(dets[k], "detections[" + std::to_string(k) + "]");
      Detection d;
      d.box = detail::read_box(dr);
      d.score = dr.number("score");
      if (d.score < 0.0 || d.score > 1.0) dr.fail("score", "must be in [0, 1]");
      d.source_cav = c.cav_id;
      c.detections.push_back(std::move(d));
    }
    f.cavs.push_back(std::move(c));
  }

  const auto& gts = r.array("gt");
  for (std::size_t i = 0; i < gts.size(); ++i) {
    auto gr = r.child(gts[i], "gt[" + std::to_string(i) + "]");
    GtObject g;
    g.object_id = gr.string("id");
    g.class_label = gr.string("class");
    g.box = detail::read_box(gr);
    f.gt_objects.push_back(std::move(g));
  }
  return f;
}

inline nlohmann::ordered_json frame_to_json(const Frame& f) {
  using detail::round6;
  nlohmann::ordered_json j;
  j["scene_id"] = f.scene_id;
  j["frame_idx"] = f.frame_idx;
  j["timestamp"] = round6(f.timestamp);
  j["cavs"] = nlohmann::ordered_json::array();
  for (const auto& c : f.cavs) {
    nlohmann::ordered_json cj;
    cj["cav_id"] = c.cav_id;
    cj["infrastructure"] = c.is_infrastructure;
    cj["pose"] = {{"x", round6(c.pose.position.x)},
                  {"y", round6(c.pose.position.y)},
                  {"yaw", round6(c.pose.yaw)}};
    cj["detections"] = nlohmann::ordered_json::array();
    for (const auto& d : c.detections) {
      nlohmann::ordered_json dj;
      detail::write_box(dj, d.box);
      dj["score"] = round6(d.score);
      cj["detections"].push_back(std::move(dj));
    }
    j["cavs"].push_back(std::move(cj));
  }
  j["gt"] = nlohmann::ordered_json::array();
  for (const auto& g : f.gt_objects) {
    nlohmann::ordered_json gj;
    gj["id"] = g.object_id;
    gj["class"] = g.class_label;
    detail::write_box(gj, g.box);
    j["gt"].push_back(std::move(gj));
  }
  return j;
}

/// Cross-frame invariants. Throws SceneLogError naming the scene and frame.
inline void validate(const SceneLog& log) {
  if (log.empty()) throw SceneLogError("no scenes");
  for (const auto& [scene_id, frames] : log.scenes) {
    if (frames.empty()) throw SceneLogError("scene " + scene_id + ": no frames");
    auto where = [&](const Frame& f) {
      return "scene " + scene_id + " frame " + std::to_string(f.frame_idx) + ": ";
    };

    std::set<std::string> cav_ids;
    bool has_vehicle = false;
    for (const auto& c : frames.front().cavs) {
      cav_ids.insert(c.cav_id);
      has_vehicle = has_vehicle || !c.is_infrastructure;
    }
    if (!has_vehicle) throw SceneLogError("scene " + scene_id + ": no non-infrastructure CAV");

    for (std::size_t i = 0; i < frames.size(); ++i) {
      const Frame& f = frames[i];
      if (i > 0) {
        const Frame& prev = frames[i - 1];
        if (f.frame_idx <= prev.frame_idx)
          throw SceneLogError(where(f) + "frame_idx not strictly increasing");
        if (std::abs(f.timestamp - prev.timestamp - kFrameInterval) > 1e-6)
          throw SceneLogError(where(f) + "timestamp spacing is not 0.1 s");
      }
      std::set<std::string> seen;
      for (const auto& c : f.cavs) {
        if (!seen.insert(c.cav_id).second)
          throw SceneLogError(where(f) + "duplicate cav_id " + c.cav_id);
        if (!cav_ids.contains(c.cav_id))
          throw SceneLogError(where(f) + "cav_id " + c.cav_id + " not present in every frame");
        if (c.is_infrastructure) {
          const CavState* first = frames.front().find_cav(c.cav_id);
          if (!first->is_infrastructure ||
              distance(first->pose.position, c.pose.position) > 1e-6 ||
              std::abs(normalize_angle(first->pose.yaw - c.pose.yaw)) > 1e-6)
            throw SceneLogError(where(f) + "infrastructure node " + c.cav_id + " is not static");
        } else if (const CavState* first = frames.front().find_cav(c.cav_id);
                   first->is_infrastructure) {
          throw SceneLogError(where(f) + "cav_id " + c.cav_id + " changes infrastructure flag");
        }
      }
      if (seen.size() != cav_ids.size())
        throw SceneLogError(where(f) + "missing CAV present elsewhere in the scene");
      std::set<std::string> ids;
      for (const auto& g : f.gt_objects)
        if (!ids.insert(g.object_id).second)
          throw SceneLogError(where(f) + "duplicate object_id " + g.object_id);
    }
  }
}

/// Reads JSON Lines, rejecting on the first violation. Blank lines are skipped.
inline SceneLog read_scene_log(std::istream& in) {
  SceneLog log;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw SceneLogError("line " + std::to_string(line) + ": parse error: " + e.what());
    }
    Frame f = parse_frame(j, line);
    log.scenes[f.scene_id].push_back(std::move(f));
  }
  validate(log);
  return log;
}

inline SceneLog load_scene_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneLogError("cannot open " + path);
  return read_scene_log(in);
}

inline void write_scene_log(std::ostream& out, const SceneLog& log) {
  for (const auto& [_, frames] : log.scenes)
    for (const auto& f : frames) out << frame_to_json(f).dump() << '\n';
}

inline void save_scene_log(const std::string& path, const SceneLog& log) {
  std::ofstream out(path);
  if (!out) throw SceneLogError("cannot write " + path);
  write_scene_log(out, log);
}

// ---------------------------------------------------------------------------
// Lookups

inline const std::vector<Frame>& scene_frames(const SceneLog& log, const std::string& scene_id) {
  auto it = log.scenes.find(scene_id);
  if (it == log.scenes.end()) throw SceneLogError("unknown scene " + scene_id);
  return it->second;
}

/// Position of `frame_idx` within its scene.
inline std::size_t frame_position(const SceneLog& log, const std::string& scene_id,
                                  int frame_idx) {
  const auto& frames = scene_frames(log, scene_id);
  auto it = std::lower_bound(frames.begin(), frames.end(), frame_idx,
                             [](const Frame& f, int idx) { return f.frame_idx < idx; });
  if (it == frames.end() || it->frame_idx != frame_idx)
    throw SceneLogError("scene " + scene_id + ": unknown frame " + std::to_string(frame_idx));
  return static_cast<std::size_t>(it - frames.begin());
}

/// Frame `offset_frames` steps (0.1 s each) after `frame_idx`; nullptr past the log end.
inline const Frame* future_frame(const SceneLog& log, const std::string& scene_id, int frame_idx,
                                 int offset_frames) {
  const auto& frames = scene_frames(log, scene_id);
  const std::size_t pos = frame_position(log, scene_id, frame_idx);
  const long long target = static_cast<long long>(pos) + offset_frames;
  if (target < 0 || target >= static_cast<long long>(frames.size())) return nullptr;
  return &frames[static_cast<std::size_t>(target)];
}

inline std::optional<std::vector<GtObject>> future_gt(const SceneLog& log,
                                                      const std::string& scene_id, int frame_idx,
                                                      int offset_frames) {
  const Frame* f = future_frame(log, scene_id, frame_idx, offset_frames);
  if (!f) return std::nullopt;
  return f->gt_objects;
}

/// Time-ordered poses of one CAV over its scene.
inline std::vector<TimedPose> cav_trajectory(const SceneLog& log, const std::string& scene_id,
                                             const std::string& cav_id) {
  std::vector<TimedPose> traj;
  for (const auto& f : scene_frames(log, scene_id))
    if (const CavState* c = f.find_cav(cav_id)) traj.push_back({f.timestamp, c->pose});
  return traj;
}

// ---------------------------------------------------------------------------
// Ego view

struct EgoObject {
  std::string id;  // object_id for GT, source cav for detections
  Point2 center;
  double yaw = 0.0;
};

struct EgoView {
  std::string asker;
  Pose2 asker_pose;  // world
  std::vector<EgoObject> cavs;
  std::vector<EgoObject> gt;
  std::vector<EgoObject> detections;

  Point2 to_world(Point2 ego) const { return from_ego(ego, asker_pose); }
};

inline EgoView ego_view(const Frame& frame, const std::string& cav_id) {
  const CavState* asker = frame.find_cav(cav_id);
  if (!asker) throw SceneLogError("unknown cav_id " + cav_id);
  EgoView v;
  v.asker = cav_id;
  v.asker_pose = asker->pose;
  for (const auto& c : frame.cavs) {
    v.cavs.push_back({c.cav_id, to_ego(c.pose.position, asker->pose),
                      yaw_to_ego(c.pose.yaw, asker->pose)});
    for (const auto& d : c.detections)
      v.detections.push_back({d.source_cav, to_ego(d.box.center, asker->pose),
                              yaw_to_ego(d.box.yaw, asker->pose)});
  }
  for (const auto& g : frame.gt_objects)
    v.gt.push_back({g.object_id, to_ego(g.box.center, asker->pose),
                    yaw_to_ego(g.box.yaw, asker->pose)});
  return v;
}

}  // namespace v2vqa

#endif  // V2VQA_SCENE_HPP
