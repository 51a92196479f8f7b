// v2vqa: generate cooperative-driving QA benchmarks, score answerers, and
// report communication cost.

#include <iostream>

#include "CLI11.hpp"
#include "v2vqa/cli.hpp"

namespace cli = v2vqa::cli;

namespace {

void add_gen_flags(CLI::App* cmd, v2vqa::GenConfig& gen, double& half_angle_deg) {
  cmd->add_option("--sector-half-angle", half_angle_deg, "Sector half-angle (degrees)")
      ->capture_default_str();
  cmd->add_option("--sector-range", gen.sector_range, "Sector range (m)")->capture_default_str();
  cmd->add_option("--notable-radius", gen.notable_radius, "Notable-object radius (m)")
      ->capture_default_str();
  cmd->add_option("--horizon", gen.horizon, "Planning horizon (s)")->capture_default_str();
  cmd->add_option("--waypoints", gen.waypoint_count, "Waypoints per plan")->capture_default_str();
  cmd->add_option("--precision", gen.coordinate_precision, "Rendered coordinate step (m)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative-driving QA benchmark toolkit"};
  app.set_config("--config", "", "TOML/INI file of option defaults; flags override it");
  app.require_subcommand(1);

  cli::GenerateOptions gen_opts;
  double gen_half_deg = 15.0;
  auto* gen = app.add_subcommand("generate", "Generate a QA dataset from a scene log");
  gen->add_option("--log", gen_opts.log_path, "Scene log (JSONL)")->required();
  gen->add_option("--out", gen_opts.out_path, "Output QA dataset (JSONL)")->required();
  gen->add_option("--counts-csv", gen_opts.counts_csv, "Per-type count CSV");
  gen->add_option("--jobs", gen_opts.jobs, "Worker threads")->capture_default_str();
  add_gen_flags(gen, gen_opts.gen, gen_half_deg);

  cli::EvalOptions eval_opts;
  double eval_half_deg = 15.0;
  auto* ev = app.add_subcommand("eval", "Score responses against a QA dataset");
  ev->add_option("--dataset", eval_opts.dataset_path, "QA dataset (JSONL)")->required();
  ev->add_option("--responses", eval_opts.responses_path, "Responses JSONL {qa_id, answer}");
  ev->add_option("--responder", eval_opts.responder, "Inline responder")
      ->check(CLI::IsMember({"oracle", "no-fusion", "external"}));
  ev->add_option("--log", eval_opts.log_path, "Scene log; enables collision rates");
  ev->add_option("--out", eval_opts.out_path, "Report JSON (stdout when omitted)");
  ev->add_option("--pairs-csv", eval_opts.pairs_csv, "Per-pair score CSV");
  ev->add_option("--splits", eval_opts.splits_path, "JSON map scene_id -> split name");
  ev->add_option("--save-responses", eval_opts.save_responses, "Write inline replies as JSONL");
  ev->add_option("--threshold", eval_opts.eval.match_threshold, "Center match threshold (m)")
      ->capture_default_str();
  ev->add_option("--endpoint", eval_opts.endpoint.url, "External responder URL")
      ->capture_default_str();
  ev->add_option("--timeout", eval_opts.endpoint.timeout_s, "Per-request timeout (s)")
      ->capture_default_str();
  ev->add_option("--max-in-flight", eval_opts.endpoint.max_in_flight, "Concurrent requests")
      ->capture_default_str();
  ev->add_option("--retries", eval_opts.endpoint.retries, "Retries per request")
      ->capture_default_str();
  ev->add_option("--jobs", eval_opts.jobs, "Worker threads")->capture_default_str();
  add_gen_flags(ev, eval_opts.gen, eval_half_deg);

  cli::StatsOptions stats_opts;
  auto* st = app.add_subcommand("stats", "Answer-location distribution of a dataset");
  st->add_option("--dataset", stats_opts.dataset_path, "QA dataset (JSONL)")->required();
  st->add_option("--hist-csv", stats_opts.hist_csv, "Histogram CSV (stdout when omitted)");

  cli::CommsOptions comms_opts;
  auto* cm = app.add_subcommand("comms", "Communication cost scaling table");
  cm->add_option("--nv", comms_opts.nv, "CAV count range LO:HI")->capture_default_str();
  cm->add_option("--nq", comms_opts.nq, "Questions per CAV range LO:HI")->capture_default_str();
  cm->add_option("--format", comms_opts.format, "csv or json")->capture_default_str();
  cm->add_option("--out", comms_opts.out_path, "Output file (stdout when omitted)");

  cli::ValidateOptions val_opts;
  auto* va = app.add_subcommand("validate", "Validate scene log, dataset, or responses files");
  va->add_option("--log", val_opts.log_path, "Scene log (JSONL)");
  va->add_option("--dataset", val_opts.dataset_path, "QA dataset (JSONL)");
  va->add_option("--responses", val_opts.responses_path, "Responses (JSONL)");

  cli::SelftestOptions self_opts;
  auto* se = app.add_subcommand("selftest", "Oracle end-to-end identity on a synthetic log");
  se->add_option("--frames", self_opts.frames, "Synthetic frames")->capture_default_str();
  se->add_option("--objects", self_opts.objects, "Synthetic GT objects")->capture_default_str();
  se->add_option("--seed", self_opts.seed, "Synthetic RNG seed")->capture_default_str();
  se->add_option("--jobs", self_opts.jobs, "Worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitInvalid;
  }

  if (*gen) {
    gen_opts.gen.sector_half_angle = v2vqa::deg2rad(gen_half_deg);
    return cli::cmd_generate(gen_opts, std::cout, std::cerr);
  }
  if (*ev) {
    eval_opts.gen.sector_half_angle = v2vqa::deg2rad(eval_half_deg);
    return cli::cmd_eval(eval_opts, std::cout, std::cerr);
  }
  if (*st) return cli::cmd_stats(stats_opts, std::cout, std::cerr);
  if (*cm) return cli::cmd_comms(comms_opts, std::cout, std::cerr);
  if (*va) return cli::cmd_validate(val_opts, std::cout, std::cerr);
  if (*se) return cli::cmd_selftest(self_opts, std::cout, std::cerr);
  return cli::kExitInvalid;
}
