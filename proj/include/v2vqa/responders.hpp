#ifndef V2VQA_RESPONDERS_HPP
#define V2VQA_RESPONDERS_HPP

// Answer providers scored by the evaluation suite.
//
//   OracleResponder     replays the dataset's own ground-truth answer text
//   NoFusionResponder   geometric single-vehicle baseline working only from
//                       the question text and the asker's own detections
//   ExternalResponder   JSON-over-HTTP client for a model server
//
// Wire format (POST body / reply):
//   {"qa_id", "qa_type", "question",
//    "context": {"ego_pose": {"x","y","yaw"},
//                "detections": [{"cx","cy","cz","l","w","h","yaw","score"}],
//                "shared_detections": [...],
//                "history": [{"t","x","y","yaw"}]}}
//   -> {"qa_id", "answer"}
// Detection and history coordinates are in the asker's ego frame; history
// times are relative to the question's frame (<= 0).

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "v2vqa/eval.hpp"
#include "v2vqa/geometry.hpp"
#include "v2vqa/qagen.hpp"
#include "v2vqa/scene.hpp"
#include "v2vqa/templates.hpp"

namespace v2vqa {

enum class Provenance { oracle, no_fusion_heuristic, external };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::oracle: return "oracle";
    case Provenance::no_fusion_heuristic: return "no_fusion_heuristic";
    case Provenance::external: return "external";
  }
  return "oracle";
}

struct EgoDetection {
  OrientedBox box;  // ego frame
  double score = 1.0;
  std::string source_cav;
};

struct ResponderRequest {
  std::string qa_id;
  std::optional<QaType> qa_type;
  std::string question_text;
  Pose2 ego_pose;                               // world
  std::vector<EgoDetection> detections;         // asker's own
  std::vector<EgoDetection> shared_detections;  // other CAVs', when shared
  std::vector<TimedPose> history;               // ego frame, t <= 0, ascending
};

enum class ReplyOutcome { ok, transport_failure, malformed };

struct ResponderReply {
  std::string qa_id;
  std::string answer_text;
  double latency = 0.0;  // seconds
  Provenance provenance = Provenance::oracle;
  ReplyOutcome outcome = ReplyOutcome::ok;
};

struct ResponderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kHistoryFrames = 10;

/// Context for one pair. `share_all` adds every other CAV's detections.
inline ResponderRequest build_request(const QaPair& pair, const SceneLog& log, bool share_all) {
  const auto& frames = scene_frames(log, pair.scene_id);
  const std::size_t pos = frame_position(log, pair.scene_id, pair.frame_idx);
  const Frame& frame = frames[pos];
  const CavState* me = frame.find_cav(pair.asker);
  if (!me) throw ResponderError("asker " + pair.asker + " not in frame");

  ResponderRequest r;
  r.qa_id = pair.qa_id;
  r.qa_type = pair.qa_type;
  r.question_text = pair.question_text;
  r.ego_pose = me->pose;
  auto to_ego_det = [&](const Detection& d) {
    EgoDetection e{d.box, d.score, d.source_cav};
    e.box.center = to_ego(d.box.center, me->pose);
    e.box.yaw = yaw_to_ego(d.box.yaw, me->pose);
    return e;
  };
  for (const auto& c : frame.cavs)
    for (const auto& d : c.detections) {
      if (c.cav_id == pair.asker) r.detections.push_back(to_ego_det(d));
      else if (share_all) r.shared_detections.push_back(to_ego_det(d));
    }
  const std::size_t first = pos >= kHistoryFrames ? pos - kHistoryFrames : 0;
  for (std::size_t i = first; i <= pos; ++i)
    if (const CavState* c = frames[i].find_cav(pair.asker))
      r.history.push_back({frames[i].timestamp - frame.timestamp,
                           {to_ego(c->pose.position, me->pose), yaw_to_ego(c->pose.yaw, me->pose)}});
  return r;
}

// ---------------------------------------------------------------------------
// Wire format

inline nlohmann::ordered_json request_to_json(const ResponderRequest& r) {
  using detail::round6;
  auto det_json = [](const EgoDetection& d) {
    nlohmann::ordered_json j;
    detail::write_box(j, d.box);
    j["score"] = round6(d.score);
    return j;
  };
  nlohmann::ordered_json j;
  j["qa_id"] = r.qa_id;
  if (r.qa_type) j["qa_type"] = to_string(*r.qa_type);
  j["question"] = r.question_text;
  nlohmann::ordered_json ctx;
  ctx["ego_pose"] = {{"x", round6(r.ego_pose.position.x)},
                     {"y", round6(r.ego_pose.position.y)},
                     {"yaw", round6(r.ego_pose.yaw)}};
  ctx["detections"] = nlohmann::ordered_json::array();
  for (const auto& d : r.detections) ctx["detections"].push_back(det_json(d));
  ctx["shared_detections"] = nlohmann::ordered_json::array();
  for (const auto& d : r.shared_detections) ctx["shared_detections"].push_back(det_json(d));
  ctx["history"] = nlohmann::ordered_json::array();
  for (const auto& h : r.history)
    ctx["history"].push_back({{"t", round6(h.t)},
                              {"x", round6(h.pose.position.x)},
                              {"y", round6(h.pose.position.y)},
                              {"yaw", round6(h.pose.yaw)}});
  j["context"] = std::move(ctx);
  return j;
}

inline ResponderRequest request_from_json(const nlohmann::json& j) {
  ResponderRequest r;
  try {
    r.qa_id = j.at("qa_id").get<std::string>();
    if (j.contains("qa_type")) r.qa_type = qa_type_from_string(j["qa_type"].get<std::string>());
    r.question_text = j.at("question").get<std::string>();
    const auto& ctx = j.at("context");
    const auto& pose = ctx.at("ego_pose");
    r.ego_pose = {{pose.at("x").get<double>(), pose.at("y").get<double>()},
                  pose.at("yaw").get<double>()};
    auto read_dets = [&](const char* key, std::vector<EgoDetection>& out) {
      if (!ctx.contains(key)) return;
      for (std::size_t i = 0; i < ctx[key].size(); ++i) {
        detail::FieldReader fr(ctx[key][i], std::string("context.") + key, 0);
        out.push_back({detail::read_box(fr), fr.number("score"), ""});
      }
    };
    read_dets("detections", r.detections);
    read_dets("shared_detections", r.shared_detections);
    if (ctx.contains("history"))
      for (const auto& h : ctx["history"])
        r.history.push_back({h.at("t").get<double>(),
                             {{h.at("x").get<double>(), h.at("y").get<double>()},
                              h.at("yaw").get<double>()}});
  } catch (const nlohmann::json::exception& e) {
    throw ResponderError(std::string("malformed request: ") + e.what());
  } catch (const SceneLogError& e) {
    throw ResponderError(std::string("malformed request: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------

class Responder {
 public:
  virtual ~Responder() = default;
  virtual ResponderReply answer(const ResponderRequest& request) const = 0;
  virtual Provenance provenance() const = 0;
  /// Whether requests should carry other CAVs' detections.
  virtual bool wants_shared_detections() const { return true; }
};

class OracleResponder final : public Responder {
 public:
  explicit OracleResponder(const QaDataset& ds) {
    for (const auto& p : ds.pairs) answers_.emplace(p.qa_id, p.answer_text);
  }

  ResponderReply answer(const ResponderRequest& request) const override {
    auto it = answers_.find(request.qa_id);
    if (it == answers_.end()) throw ResponderError("unknown qa_id " + request.qa_id);
    return {request.qa_id, it->second, 0.0, Provenance::oracle, ReplyOutcome::ok};
  }

  Provenance provenance() const override { return Provenance::oracle; }

 private:
  std::map<std::string, std::string> answers_;
};

inline ResponderReply oracle_answer(const ResponderRequest& request, const QaDataset& ds) {
  return OracleResponder(ds).answer(request);
}

/// Type of a question from its text alone (requests may omit qa_type).
inline std::optional<QaType> infer_qa_type(std::string_view question) {
  using namespace templates;
  auto prefix = [](std::string_view tmpl) { return tmpl.substr(0, tmpl.find('{')); };
  if (question == kQ5Question) return QaType::Q5;
  if (question.starts_with(prefix(kQ4Question))) return QaType::Q4;
  if (question.starts_with(prefix(kQ3Question))) return QaType::Q3;
  if (question.starts_with(prefix(kQ2Question))) return QaType::Q2;
  if (question.starts_with(prefix(kQ1Question))) return QaType::Q1;
  return std::nullopt;
}

/// Direction named in a Q3 question.
inline std::optional<DirectionLabel> parse_direction(std::string_view question) {
  const std::string_view tmpl = templates::kQ3Question;
  const auto slot = tmpl.find("{dir}");
  const std::string_view head = tmpl.substr(0, slot);
  const std::string_view tail = tmpl.substr(slot + 5);
  if (!question.starts_with(head) || !question.ends_with(tail)) return std::nullopt;
  const std::string_view phrase =
      question.substr(head.size(), question.size() - head.size() - tail.size());
  try {
    return templates::direction_from_phrase(phrase);
  } catch (const GeometryError&) {
    return std::nullopt;
  }
}

/// Single-vehicle baseline: the same geometric rules as the generator, run
/// over the asker's own detections instead of the ground truth.
class NoFusionResponder final : public Responder {
 public:
  explicit NoFusionResponder(GenConfig cfg = {}) : cfg_(cfg) {}

  ResponderReply answer(const ResponderRequest& r) const override {
    const auto start = std::chrono::steady_clock::now();
    const auto type = r.qa_type ? r.qa_type : infer_qa_type(r.question_text);
    ResponderReply reply{r.qa_id, "", 0.0, Provenance::no_fusion_heuristic, ReplyOutcome::ok};
    if (!type) {
      reply.answer_text = "I cannot answer this question.";
    } else {
      std::vector<Point2> quoted;
      try {
        quoted = parse_locations(r.question_text);
      } catch (const LocationParseError&) {
      }
      const auto answer = solve(*type, r, quoted);
      reply.answer_text = render_answer_for(*type, answer, cfg_.coordinate_precision);
    }
    reply.latency =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return reply;
  }

  Provenance provenance() const override { return Provenance::no_fusion_heuristic; }
  bool wants_shared_detections() const override { return false; }

 private:
  const EgoDetection* occupying(Point2 p, const std::vector<EgoDetection>& dets) const {
    const EgoDetection* best = nullptr;
    double best_d = 0.0;
    for (const auto& d : dets) {
      if (!point_in_box(p, d.box)) continue;
      const double dist = distance(p, d.box.center);
      if (!best || dist < best_d) {
        best = &d;
        best_d = dist;
      }
    }
    return best;
  }

  std::vector<Point2> behind(Point2 reference, const std::vector<EgoDetection>& dets) const {
    const auto sector = behind_sector({0.0, 0.0}, reference, cfg_);
    if (!sector) return {};
    const EgoDetection* best = nullptr;
    double best_d = 0.0;
    for (const auto& d : dets) {
      if (point_in_box(reference, d.box) || !sector_contains(*sector, d.box.center)) continue;
      const double dist = distance(d.box.center, reference);
      if (!best || dist < best_d) {
        best = &d;
        best_d = dist;
      }
    }
    if (!best) return {};
    return {best->box.center};
  }

  std::vector<Point2> solve(QaType type, const ResponderRequest& r,
                            const std::vector<Point2>& quoted) const {
    const auto& own = r.detections;
    switch (type) {
      case QaType::Q1: {
        if (quoted.empty()) return {};
        const EgoDetection* d = occupying(quoted.front(), own);
        if (!d) return {};
        return {d->box.center};
      }
      case QaType::Q2:
        if (quoted.empty()) return {};
        return behind(quoted.front(), own);
      case QaType::Q3: {
        const auto dir = parse_direction(r.question_text);
        if (!dir) return {};
        const EgoDetection* ref = nullptr;
        double ref_d = 0.0;
        for (const auto& d : own) {
          if (d.box.center.x == 0.0 && d.box.center.y == 0.0) continue;
          if (direction_of(d.box.center) != *dir) continue;
          const double dist = norm(d.box.center);
          if (!ref || dist < ref_d) {
            ref = &d;
            ref_d = dist;
          }
        }
        if (!ref) return {};
        return behind(ref->box.center, own);
      }
      case QaType::Q4: {
        if (quoted.empty()) return {};
        std::vector<std::pair<double, Point2>> near;
        for (const auto& d : own) {
          const double dist = polyline_distance(d.box.center, quoted);
          if (dist <= cfg_.notable_radius) near.push_back({dist, d.box.center});
        }
        std::stable_sort(near.begin(), near.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<Point2> out;
        for (std::size_t i = 0; i < near.size() && i < static_cast<std::size_t>(cfg_.max_notable); ++i)
          out.push_back(near[i].second);
        return out;
      }
      case QaType::Q5: return extrapolate(r.history);
    }
    return {};
  }

  /// Constant velocity from the last two history samples.
  std::vector<Point2> extrapolate(const std::vector<TimedPose>& history) const {
    Point2 v{0.0, 0.0};
    if (history.size() >= 2) {
      const TimedPose& a = history[history.size() - 2];
      const TimedPose& b = history.back();
      if (b.t - a.t > 0.0) v = (b.pose.position - a.pose.position) * (1.0 / (b.t - a.t));
    }
    const Point2 now = history.empty() ? Point2{0.0, 0.0} : history.back().pose.position;
    std::vector<Point2> out;
    for (int k = 1; k <= cfg_.waypoint_count; ++k)
      out.push_back(now + v * (cfg_.horizon * k / cfg_.waypoint_count));
    return out;
  }

  GenConfig cfg_;
};

inline ResponderReply no_fusion_answer(const ResponderRequest& request, const GenConfig& cfg = {}) {
  return NoFusionResponder(cfg).answer(request);
}

// ---------------------------------------------------------------------------
// External service

struct EndpointConfig {
  std::string url = "http://127.0.0.1:8080/answer";
  double timeout_s = 10.0;
  int max_in_flight = 4;
  int retries = 1;  // extra attempts after the first
};

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ResponderError("endpoint url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

class ExternalResponder final : public Responder {
 public:
  explicit ExternalResponder(EndpointConfig cfg) : cfg_(std::move(cfg)), url_(detail::split_url(cfg_.url)) {}

  ResponderReply answer(const ResponderRequest& r) const override {
    const auto start = std::chrono::steady_clock::now();
    ResponderReply reply{r.qa_id, "", 0.0, Provenance::external, ReplyOutcome::transport_failure};
    const std::string body = request_to_json(r).dump();
    for (int attempt = 0; attempt <= std::max(0, cfg_.retries); ++attempt) {
      httplib::Client cli(url_.origin);
      const auto secs = static_cast<time_t>(cfg_.timeout_s);
      const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      auto res = cli.Post(url_.path, body, "application/json");
      if (!res || res->status != 200) {
        reply.outcome = ReplyOutcome::transport_failure;
        continue;
      }
      try {
        const auto j = nlohmann::json::parse(res->body);
        if (j.at("qa_id").get<std::string>() != r.qa_id) throw ResponderError("qa_id mismatch");
        reply.answer_text = j.at("answer").get<std::string>();
        reply.outcome = ReplyOutcome::ok;
      } catch (const std::exception&) {
        reply.outcome = ReplyOutcome::malformed;
      }
      break;
    }
    reply.latency =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return reply;
  }

  Provenance provenance() const override { return Provenance::external; }
  int max_in_flight() const { return std::max(1, cfg_.max_in_flight); }

 private:
  EndpointConfig cfg_;
  detail::ParsedUrl url_;
};

inline ResponderReply external_answer(const ResponderRequest& request, const EndpointConfig& cfg) {
  return ExternalResponder(cfg).answer(request);
}

// ---------------------------------------------------------------------------
// Batch runs

struct RunStats {
  std::size_t n_requests = 0;
  std::size_t n_failed = 0;  // transport failures and malformed replies
  double total_latency = 0.0;
};

/// Asks `responder` every question of `ds` with up to `jobs` requests in
/// flight. Failed and malformed replies are flagged on the response and
/// never abort the run. The result is keyed by qa_id, so it does not depend on
/// completion order.
inline ResponseMap run_responder(const Responder& responder, const QaDataset& ds,
                                 const SceneLog& log, unsigned jobs = 1,
                                 RunStats* stats = nullptr) {
  std::vector<ResponderReply> replies(ds.pairs.size());
  const bool share = responder.wants_shared_detections();
  auto work = [&](std::size_t i) {
    replies[i] = responder.answer(build_request(ds.pairs[i], log, share));
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(ds.pairs.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < replies.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
          for (std::size_t i; (i = next.fetch_add(1)) < replies.size();) {
            try {
              work(i);
            } catch (...) {
              std::lock_guard lock(err_mu);
              if (!err) err = std::current_exception();
            }
          }
        });
    }
    if (err) std::rethrow_exception(err);
  }

  ResponseMap out;
  RunStats st;
  for (const auto& r : replies) {
    ++st.n_requests;
    st.total_latency += r.latency;
    st.n_failed += r.outcome != ReplyOutcome::ok ? 1 : 0;
    out[r.qa_id] = {r.qa_id, r.answer_text, r.outcome == ReplyOutcome::transport_failure,
                    r.outcome == ReplyOutcome::malformed};
  }
  if (stats) *stats = st;
  return out;
}

}  // namespace v2vqa

#endif  // V2VQA_RESPONDERS_HPP
