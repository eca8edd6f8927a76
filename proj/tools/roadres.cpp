#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "roadres/errors.hpp"
#include "roadres/pipeline.hpp"
#include "roadres/synthetic.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string workspace;
  std::string event;
  double threshold = 0;  // 0 = unset (valid values are negative)
  int gap_hours = -1;
  int lookback_days = -1;
  int jobs = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config JSON")->required();
  cmd->add_option("--workspace", args.workspace, "override the workspace directory");
  cmd->add_option("--event", args.event, "restrict to one configured event");
  cmd->add_option("--threshold", args.threshold, "override threshold (%)");
  cmd->add_option("--gap-hours", args.gap_hours, "override gap tolerance (hours)");
  cmd->add_option("--lookback-days", args.lookback_days, "override baseline lookback (days)");
  cmd->add_option("--jobs", args.jobs, "worker threads (0 = all cores)");
}

roadres::PipelineConfig load_config(const CommonArgs& args) {
  auto cfg = roadres::PipelineConfig::from_json_file(args.config_path);
  if (!args.workspace.empty()) cfg.workspace = args.workspace;
  if (args.threshold != 0) cfg.threshold_pct = args.threshold;
  if (args.gap_hours >= 0) cfg.gap_tolerance_hours = args.gap_hours;
  if (args.lookback_days > 0) cfg.lookback_days = args.lookback_days;
  if (args.jobs >= 0) cfg.jobs = args.jobs;
  if (!args.event.empty()) {
    std::vector<roadres::EventConfig> kept;
    for (const auto& e : cfg.events)
      if (e.name == args.event) kept.push_back(e);
    if (kept.empty()) throw roadres::ConfigError("unknown event '" + args.event + "'");
    cfg.events = kept;
    std::vector<roadres::ModelConfig> models;
    for (const auto& m : cfg.models)
      if (m.event == args.event) models.push_back(m);
    cfg.models = models;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"link-level road traffic resilience pipeline"};
  app.require_subcommand(1);

  static const char* kStages[] = {"ingest", "conflate", "match",  "baseline", "metrics",
                                  "severity", "ttest",  "gam",    "report"};
  CommonArgs stage_args;
  std::string chosen_stage;
  for (const char* name : kStages) {
    CLI::App* cmd = app.add_subcommand(name, std::string("run the ") + name + " stage");
    add_common(cmd, stage_args);
    cmd->callback([name, &chosen_stage] { chosen_stage = name; });
  }

  CommonArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "run the whole pipeline");
  add_common(run_cmd, run_args);

  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic ground-truth scenario");
  roadres::SyntheticScenario scenario;
  std::string synth_out = "synthetic";
  std::string synth_event_start;
  synth_cmd->add_option("--out", synth_out, "output directory");
  synth_cmd->add_option("--seed", scenario.seed, "RNG seed");
  synth_cmd->add_option("--links", scenario.link_count, "number of links");
  synth_cmd->add_option("--history-days", scenario.history_days, "days of pre-event speeds");
  synth_cmd->add_option("--sigma", scenario.noise_sigma_mph, "speed noise bound (mph)");
  synth_cmd->add_option("--event-span-hours", scenario.event_span_hours, "event span (hours)");
  synth_cmd->add_option("--reports-per-link", scenario.reports_per_link_mean,
                        "mean reports per link");
  synth_cmd->add_option("--event-start", synth_event_start, "event start (YYYY-MM-DDTHH:MM)");
  synth_cmd->add_option("--threshold", scenario.threshold_pct,
                        "threshold written into the emitted config (%)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      if (!synth_event_start.empty())
        scenario.event_start = roadres::Timestamp::parse(synth_event_start);
      auto out = roadres::gen_synthetic(scenario, synth_out);
      std::printf("wrote %s\n", out.links_path.string().c_str());
      std::printf("wrote %s\n", out.speeds_path.string().c_str());
      std::printf("wrote %s\n", out.reports_path.string().c_str());
      std::printf("wrote %s\n", out.truth_path.string().c_str());
      std::printf("wrote %s\n", out.config_path.string().c_str());
      return 0;
    }
    if (*run_cmd) {
      roadres::run_pipeline(load_config(run_args));
      std::printf("pipeline complete\n");
      return 0;
    }
    if (!chosen_stage.empty()) {
      roadres::run_stage(chosen_stage, load_config(stage_args));
      std::printf("stage %s complete\n", chosen_stage.c_str());
      return 0;
    }
  } catch (const roadres::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const roadres::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
