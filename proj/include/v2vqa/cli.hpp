#ifndef V2VQA_CLI_HPP
#define V2VQA_CLI_HPP

// Subcommand bodies for the v2vqa tool. Each returns the process exit code:
// 0 success, 1 degraded run (failed or unparseable replies), 2 invalid input.

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"
#include "v2vqa/comms.hpp"
#include "v2vqa/eval.hpp"
#include "v2vqa/qagen.hpp"
#include "v2vqa/responders.hpp"
#include "v2vqa/scene.hpp"
#include "v2vqa/stats.hpp"
#include "v2vqa/synthetic.hpp"

namespace v2vqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDegraded = 1;
inline constexpr int kExitInvalid = 2;

struct GenerateOptions {
  std::string log_path;
  std::string out_path;
  std::string counts_csv;
  GenConfig gen;
  unsigned jobs = 1;
};

struct EvalOptions {
  std::string dataset_path;
  std::string responses_path;
  std::string responder;  // oracle | no-fusion | external
  std::string log_path;
  std::string out_path;
  std::string pairs_csv;
  std::string splits_path;
  std::string save_responses;
  EvalConfig eval;
  GenConfig gen;  // no-fusion heuristic parameters
  EndpointConfig endpoint;
  unsigned jobs = 1;
};

struct StatsOptions {
  std::string dataset_path;
  std::string hist_csv;
};

struct CommsOptions {
  std::string nv = "1:8";
  std::string nq = "0:4";
  std::string format = "csv";
  std::string out_path;
};

struct ValidateOptions {
  std::string log_path;
  std::string dataset_path;
  std::string responses_path;
};

struct SelftestOptions {
  int frames = 100;
  int objects = 8;
  std::uint64_t seed = 7;
  unsigned jobs = 1;
};

namespace detail {

inline void print_counts(std::ostream& out, const QaDataset& ds) {
  out << "type   total  positive  negative\n";
  std::size_t total = 0;
  for (const auto& [t, c] : count_by_type(ds)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-5s %6zu %9zu %9zu\n", std::string(to_string(t)).c_str(),
                  c.total, c.positive, c.negative);
    out << buf;
    total += c.total;
  }
  out << "all   " << total << '\n';
}

/// "a:b" inclusive or a single "a"; "" is empty.
inline comms::Range parse_range(const std::string& s) {
  if (s.empty()) return {};
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) {
      const int v = std::stoi(s);
      return {v, v};
    }
    return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw std::invalid_argument("bad range '" + s + "', expected LO:HI");
  }
}

inline std::map<std::string, std::string> load_splits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  try {
    return nlohmann::json::parse(in).get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": expected {\"scene_id\": \"split\"}: " + e.what());
  }
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const SceneLogError& e) {
    err << "invalid scene log: " << e.what() << '\n';
  } catch (const DatasetError& e) {
    err << "invalid dataset: " << e.what() << '\n';
  } catch (const ResponseError& e) {
    err << "invalid responses: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
  }
  return kExitInvalid;
}

}  // namespace detail

inline int cmd_generate(const GenerateOptions& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    o.gen.validate();
    std::ifstream in(o.log_path);
    if (!in) throw SceneLogError("cannot open " + o.log_path);
    // An empty log is a valid input that yields an empty dataset.
    std::stringstream buf;
    buf << in.rdbuf();
    QaDataset ds;
    if (buf.str().find_first_not_of(" \t\r\n") != std::string::npos) {
      const SceneLog log = read_scene_log(buf);
      ds = generate_all(log, o.gen, o.jobs);
    }
    save_dataset(o.out_path, ds);
    if (!o.counts_csv.empty()) {
      std::ofstream c(o.counts_csv);
      write_counts_csv(c, compute_stats(ds));
    }
    out << "wrote " << ds.size() << " QA pairs to " << o.out_path << '\n';
    detail::print_counts(out, ds);
    return kExitOk;
  });
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&]() -> int {
    const QaDataset ds = load_dataset(o.dataset_path);
    std::optional<SceneLog> log;
    if (!o.log_path.empty()) log = load_scene_log(o.log_path);

    ResponseMap responses;
    RunStats run;
    if (!o.responses_path.empty()) {
      if (!o.responder.empty()) throw std::invalid_argument("use either --responses or --responder");
      responses = load_responses(o.responses_path);
    } else if (o.responder == "oracle") {
      const OracleResponder oracle(ds);
      if (log) {
        responses = run_responder(oracle, ds, *log, o.jobs, &run);
      } else {
        for (const auto& p : ds.pairs) {
          ResponderRequest r;
          r.qa_id = p.qa_id;
          responses[p.qa_id] = {p.qa_id, oracle.answer(r).answer_text, false};
        }
      }
    } else if (o.responder == "no-fusion") {
      if (!log) throw std::invalid_argument("--responder no-fusion needs --log");
      responses = run_responder(NoFusionResponder(o.gen), ds, *log, o.jobs, &run);
    } else if (o.responder == "external") {
      if (!log) throw std::invalid_argument("--responder external needs --log");
      const ExternalResponder ext(o.endpoint);
      responses = run_responder(ext, ds, *log,
                                static_cast<unsigned>(ext.max_in_flight()), &run);
    } else {
      throw std::invalid_argument("need --responses FILE or --responder oracle|no-fusion|external");
    }

    if (!o.save_responses.empty()) {
      std::ofstream f(o.save_responses);
      write_responses(f, responses);
    }
    const auto splits = o.splits_path.empty() ? std::map<std::string, std::string>{}
                                              : detail::load_splits(o.splits_path);
    const EvalReport rep =
        aggregate_report(ds, responses, log ? &*log : nullptr, o.eval, splits, o.jobs);
    const std::string text = report_to_json(rep).dump(2);
    if (o.out_path.empty()) {
      out << text << '\n';
    } else {
      std::ofstream f(o.out_path);
      f << text << '\n';
      const auto& a = rep.all();
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "F1 Q1 %.4f  Q2 %.4f  Q3 %.4f  Q4 %.4f  | L2 avg %.4f m | pairs %zu\n",
                    a.grounding.at(QaType::Q1).metrics.f1, a.grounding.at(QaType::Q2).metrics.f1,
                    a.grounding.at(QaType::Q3).metrics.f1, a.grounding.at(QaType::Q4).metrics.f1,
                    a.planning.l2_avg, a.n_pairs);
      out << buf;
    }
    if (!o.pairs_csv.empty()) {
      std::ofstream f(o.pairs_csv);
      write_pair_csv(f, ds, responses, log ? &*log : nullptr, o.eval);
    }
    if (rep.degraded()) {
      err << "degraded run: " << rep.all().n_unparseable << " unparseable, "
          << rep.all().n_transport_failures << " failed replies\n";
      return kExitDegraded;
    }
    return kExitOk;
  });
}

inline int cmd_stats(const StatsOptions& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const AnswerStats s = compute_stats(load_dataset(o.dataset_path));
    write_counts_csv(out, s);
    if (o.hist_csv.empty()) {
      out << '\n';
      write_histogram_csv(out, s);
    } else {
      std::ofstream f(o.hist_csv);
      write_histogram_csv(f, s);
    }
    return kExitOk;
  });
}

inline int cmd_comms(const CommsOptions& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto nv = detail::parse_range(o.nv), nq = detail::parse_range(o.nq);
    if (!nv.empty() && nv.lo < 1) throw std::invalid_argument("n_v must be >= 1");
    if (!nq.empty() && nq.lo < 0) throw std::invalid_argument("n_q must be >= 0");
    const auto rows = comms::scaling_report(nv, nq);
    std::ostringstream text;
    if (o.format == "csv") comms::write_csv(text, rows);
    else if (o.format == "json") text << comms::to_json(rows, {}).dump(2) << '\n';
    else throw std::invalid_argument("--format must be csv or json");
    if (o.out_path.empty()) {
      out << text.str();
    } else {
      std::ofstream f(o.out_path);
      f << text.str();
    }
    return kExitOk;
  });
}

inline int cmd_validate(const ValidateOptions& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (o.log_path.empty() && o.dataset_path.empty() && o.responses_path.empty())
      throw std::invalid_argument("nothing to validate");
    if (!o.log_path.empty()) {
      const SceneLog log = load_scene_log(o.log_path);
      out << o.log_path << ": ok (" << log.scenes.size() << " scenes, " << log.frame_count()
          << " frames)\n";
    }
    if (!o.dataset_path.empty()) {
      const QaDataset ds = load_dataset(o.dataset_path);
      out << o.dataset_path << ": ok (" << ds.size() << " QA pairs)\n";
    }
    if (!o.responses_path.empty()) {
      const ResponseMap r = load_responses(o.responses_path);
      out << o.responses_path << ": ok (" << r.size() << " responses)\n";
    }
    return kExitOk;
  });
}

struct SelftestResult {
  bool passed = false;
  EvalReport report;
  std::size_t n_pairs = 0;
  double seconds = 0.0;
};

/// Synthetic log -> dataset -> JSONL round trip -> oracle -> report.
inline SelftestResult run_selftest(const SelftestOptions& o) {
  // Every question type needs at least one frame with a full planning future.
  const GenConfig gen{};
  const int need = static_cast<int>(std::lround(gen.horizon / 0.1)) + 1;
  if (o.frames < need)
    throw std::invalid_argument("selftest needs --frames >= " + std::to_string(need));
  if (o.objects < 1) throw std::invalid_argument("selftest needs --objects >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  synthetic::Config sc;
  sc.n_frames = o.frames;
  sc.n_objects = o.objects;
  sc.seed = o.seed;
  std::stringstream log_text;
  write_scene_log(log_text, synthetic::make_scene_log(sc));
  const SceneLog log = read_scene_log(log_text);

  std::stringstream ds_text;
  write_dataset(ds_text, generate_all(log, GenConfig{}, o.jobs));
  const QaDataset ds = read_dataset(ds_text);

  const ResponseMap responses = run_responder(OracleResponder(ds), ds, log, o.jobs);
  SelftestResult r;
  r.report = aggregate_report(ds, responses, &log, EvalConfig{}, {}, o.jobs);
  r.n_pairs = ds.size();
  const auto& a = r.report.all();
  bool ok = true;
  for (auto t : {QaType::Q1, QaType::Q2, QaType::Q3, QaType::Q4}) {
    const auto& m = a.grounding.at(t).metrics;
    ok = ok && m.f1 == 1.0 && m.precision == 1.0 && m.recall == 1.0;
  }
  for (double v : a.planning.l2_by_horizon) ok = ok && v == 0.0;
  ok = ok && a.planning.n_samples > 0 && !r.report.degraded();
  r.passed = ok;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline int cmd_selftest(const SelftestOptions& o, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const SelftestResult r = run_selftest(o);
    const auto& a = r.report.all();
    char buf[128];
    for (auto t : {QaType::Q1, QaType::Q2, QaType::Q3, QaType::Q4}) {
      const auto& ts = a.grounding.at(t);
      std::snprintf(buf, sizeof buf, "%s  P %.6f  R %.6f  F1 %.6f  (%zu pairs)\n",
                    std::string(to_string(t)).c_str(), ts.metrics.precision, ts.metrics.recall,
                    ts.metrics.f1, ts.n_pairs);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "Q5  L2 1s %.6f  2s %.6f  3s %.6f  (%zu samples)\n",
                  a.planning.l2_by_horizon[0], a.planning.l2_by_horizon[1],
                  a.planning.l2_by_horizon[2], a.planning.n_samples);
    out << buf;
    std::snprintf(buf, sizeof buf, "%zu pairs in %.3f s\n", r.n_pairs, r.seconds);
    out << buf << (r.passed ? "selftest PASSED\n" : "selftest FAILED\n");
    return r.passed ? kExitOk : kExitDegraded;
  });
}

}  // namespace v2vqa::cli

#endif  // V2VQA_CLI_HPP
