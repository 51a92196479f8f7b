#ifndef V2VQA_COMMS_HPP
#define V2VQA_COMMS_HPP

// Closed-form per-timestep communication cost (MB) of sharing perception
// with an answering node.
//
// Centralized: every CAV uploads one scene feature map and one set of
// detection parameters, then exchanges one question and one answer per
// question asked; the hub receives all of it.
// Decentralized: one answering model per CAV, each receiving the features
// of every other CAV and exchanging no questions.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace v2vqa::comms {

struct PayloadProfile {
  double scene_feature_mb = 0.2;
  double det_params_mb = 0.003;
  double question_mb = 0.0002;
  double answer_mb = 0.0002;
  // Two-CAV, one-question totals of the fusion baselines.
  double early_fusion_total_mb = 1.9208;
  double intermediate_total_mb = 0.4008;
  double llm_fusion_total_mb = 0.4068;

  double shared_mb() const { return scene_feature_mb + det_params_mb; }
  double exchange_mb() const { return question_mb + answer_mb; }
};

enum class Setting { centralized, decentralized };
enum class Strategy { no_fusion, early, intermediate, llm_fusion };

inline std::string_view to_string(Setting s) {
  return s == Setting::centralized ? "centralized" : "decentralized";
}

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::no_fusion: return "no_fusion";
    case Strategy::early: return "early";
    case Strategy::intermediate: return "intermediate";
    case Strategy::llm_fusion: return "llm_fusion";
  }
  return "no_fusion";
}

struct CommScenario {
  int n_v = 2;  // CAVs
  int n_q = 1;  // questions per CAV per timestep
  Setting setting = Setting::centralized;
};

struct CommError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void check(const CommScenario& s) {
  if (s.n_v < 1) throw CommError("n_v must be >= 1");
  if (s.n_q < 0) throw CommError("n_q must be >= 0");
}

/// MB sent and received by one CAV per timestep.
inline double per_cav_cost(const CommScenario& s, const PayloadProfile& p = {}) {
  check(s);
  if (s.setting == Setting::centralized) return p.shared_mb() + p.exchange_mb() * s.n_q;
  return p.shared_mb() * (s.n_v - 1);
}

/// MB handled by the central node per timestep.
inline double hub_cost(const CommScenario& s, const PayloadProfile& p = {}) {
  check(s);
  if (s.setting != Setting::centralized) throw CommError("decentralized setting has no hub");
  return s.n_v * per_cav_cost(s, p);
}

/// Total MB per timestep for a fusion strategy. Raw-data and feature fusion
/// totals are only known for two CAVs and are scaled by the number of peers
/// (n_v - 1); answering-model fusion is the centralized hub cost.
inline double strategy_cost(Strategy strategy, const CommScenario& s, const PayloadProfile& p = {}) {
  check(s);
  switch (strategy) {
    case Strategy::no_fusion: return 0.0;
    case Strategy::early: return p.early_fusion_total_mb * (s.n_v - 1);
    case Strategy::intermediate: return p.intermediate_total_mb * (s.n_v - 1);
    case Strategy::llm_fusion:
      return hub_cost({s.n_v, s.n_q, Setting::centralized}, p);
  }
  return 0.0;
}

/// Smallest CAV count at which a decentralized CAV moves at least as much
/// data as a centralized one asking `n_q` questions.
inline int crossover_nv(int n_q, const PayloadProfile& p = {}) {
  const double centralized = per_cav_cost({1, n_q, Setting::centralized}, p);
  return 1 + static_cast<int>(std::ceil(centralized / p.shared_mb() - 1e-12));
}

struct ScalingRow {
  int n_v = 0;
  int n_q = 0;
  double centralized_per_cav = 0.0;
  double hub = 0.0;
  double decentralized_per_cav = 0.0;
  bool decentralized_exceeds = false;  // decentralized >= centralized per CAV
  int crossover_nv = 0;
};

struct Range {
  int lo = 0;
  int hi = -1;  // inclusive; hi < lo is empty
  bool empty() const { return hi < lo; }
};

/// Cartesian product of the two ranges, n_v-major.
inline std::vector<ScalingRow> scaling_report(Range nv, Range nq, const PayloadProfile& p = {}) {
  std::vector<ScalingRow> rows;
  if (nv.empty() || nq.empty()) return rows;
  for (int v = nv.lo; v <= nv.hi; ++v)
    for (int q = nq.lo; q <= nq.hi; ++q) {
      ScalingRow r;
      r.n_v = v;
      r.n_q = q;
      r.centralized_per_cav = per_cav_cost({v, q, Setting::centralized}, p);
      r.hub = hub_cost({v, q, Setting::centralized}, p);
      r.decentralized_per_cav = per_cav_cost({v, q, Setting::decentralized}, p);
      r.crossover_nv = crossover_nv(q, p);
      r.decentralized_exceeds = v >= r.crossover_nv;
      rows.push_back(r);
    }
  return rows;
}

inline std::string format_mb(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "n_v,n_q,centralized_per_cav_mb,hub_mb,decentralized_per_cav_mb,"
         "decentralized_exceeds,crossover_n_v\n";
  for (const auto& r : rows)
    out << r.n_v << ',' << r.n_q << ',' << format_mb(r.centralized_per_cav) << ','
        << format_mb(r.hub) << ',' << format_mb(r.decentralized_per_cav) << ','
        << (r.decentralized_exceeds ? 1 : 0) << ',' << r.crossover_nv << '\n';
}

inline nlohmann::ordered_json to_json(const std::vector<ScalingRow>& rows, const PayloadProfile& p) {
  nlohmann::ordered_json j;
  j["assumptions"] =
      "early and intermediate fusion totals scale linearly in (n_v - 1) from the two-CAV figures";
  j["profile_mb"] = {{"scene_feature", p.scene_feature_mb}, {"det_params", p.det_params_mb},
                     {"question", p.question_mb},           {"answer", p.answer_mb}};
  nlohmann::ordered_json strategies;
  for (auto s : {Strategy::no_fusion, Strategy::early, Strategy::intermediate, Strategy::llm_fusion})
    strategies[std::string(to_string(s))] = strategy_cost(s, {2, 1, Setting::centralized}, p);
  j["strategies_at_nv2_nq1_mb"] = std::move(strategies);
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"n_v", r.n_v},
                         {"n_q", r.n_q},
                         {"centralized_per_cav_mb", r.centralized_per_cav},
                         {"hub_mb", r.hub},
                         {"decentralized_per_cav_mb", r.decentralized_per_cav},
                         {"decentralized_exceeds", r.decentralized_exceeds},
                         {"crossover_n_v", r.crossover_nv}});
  return j;
}

}  // namespace v2vqa::comms

#endif  // V2VQA_COMMS_HPP
