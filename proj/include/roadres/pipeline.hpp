#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roadres/gam.hpp"
#include "roadres/ingest.hpp"
#include "roadres/matching.hpp"
#include "roadres/resilience.hpp"

namespace roadres {

struct EventConfig {
  std::string name;  // artifact suffix
  EventType type = EventType::Other;
  TimeSpan span;
};

struct ModelConfig {
  std::string response;  // duration | change | auc
  std::string event;     // EventConfig name
  gam::Family family = gam::Family::GaussianIdentity;
  std::vector<std::string> linear_terms;
  std::vector<gam::SmoothTermSpec> smooth_terms;
  std::optional<gam::TensorTermSpec> tensor_term;
  std::vector<double> lambda_grid;  // empty -> default grid
  bool stepwise = false;            // forward AIC selection over linear terms
  double vif_threshold = 5.0;
};

struct PipelineConfig {
  std::filesystem::path workspace;
  std::string time_zone = "America/Chicago";
  std::filesystem::path links_path;
  LinkFormat links_format = LinkFormat::GeoJson;
  std::filesystem::path speeds_path;
  std::filesystem::path reports_path;
  double threshold_pct = -1.0;
  int gap_tolerance_hours = 2;
  int lookback_days = 30;
  int search_pad_hours = 48;
  MatchConfig match;
  int jobs = 1;  // 0 -> hardware concurrency
  bool conflate = true;
  std::vector<EventConfig> events;
  std::vector<ModelConfig> models;

  void validate() const;  // throws ConfigError
  EventWindowConfig window_config(const EventConfig& event) const;
  const EventConfig& event_by_name(const std::string& name) const;

  static PipelineConfig from_json_file(const std::filesystem::path& path);
  std::string to_json() const;
  void save_json(const std::filesystem::path& path) const;
};

// Stage entry points; each persists its artifacts and manifest entry, and is
// a no-op when inputs, parameters and outputs are unchanged.
void stage_ingest(Workspace& ws, const PipelineConfig& cfg);
void stage_conflate(Workspace& ws, const PipelineConfig& cfg);
void stage_match(Workspace& ws, const PipelineConfig& cfg);
void stage_baseline(Workspace& ws, const PipelineConfig& cfg);
void stage_metrics(Workspace& ws, const PipelineConfig& cfg);
void stage_severity(Workspace& ws, const PipelineConfig& cfg);
void stage_ttest(Workspace& ws, const PipelineConfig& cfg);
void stage_gam(Workspace& ws, const PipelineConfig& cfg);
void stage_report(Workspace& ws, const PipelineConfig& cfg);

/// ingest -> conflate -> match -> baseline -> metrics -> severity -> ttest ->
/// gam -> report. A failing stage aborts with the stage name in the message
/// and its manifest entry marked stale.
void run_pipeline(const PipelineConfig& cfg);

/// Runs one named stage (used by the per-stage CLI commands).
void run_stage(const std::string& stage, const PipelineConfig& cfg);

/// One row of a `metrics_<event>.csv` artifact.
struct MetricsArtifactRow {
  std::string link_id;
  std::optional<EventWindow> window;
  double duration_h = 0;
  double change_pct = 0;
  double auc_pct_h = 0;
  bool affected = false;
  bool low_coverage = false;
  bool baseline_insufficient = false;
};

std::map<std::string, MetricsArtifactRow> read_metrics_rows(const std::filesystem::path& path);

}  // namespace roadres
