#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "roadres/core.hpp"
#include "roadres/pipeline.hpp"

namespace roadres {

/// Ground-truth scenario generator: clean hour-of-day-periodic speed profiles
/// with bounded uniform noise (|noise| <= sigma) and a rectangular
/// event-shaped drop per link, plus matched-by-construction reports. Fully
/// deterministic for a given seed.
struct SyntheticScenario {
  std::uint64_t seed = 1;
  int link_count = 50;
  int history_days = 14;      // hourly speeds before the event span
  int post_event_days = 2;    // hourly speeds after the event span
  int event_span_hours = 48;
  double noise_sigma_mph = 0;  // uniform in [-sigma, sigma]
  bool inject_impact = true;   // false: clean speeds, truth all zeros
  double min_depth_pct = 8.0;
  double max_depth_pct = 55.0;
  int min_duration_hours = 4;
  int max_duration_hours = 16;
  double reports_per_link_mean = 3.0;  // Poisson-like
  int reliability_min = 0;             // integer scores drawn uniformly
  int reliability_max = 10;
  EventType event_type = EventType::Flood;
  std::string event_name = "synthetic_event";
  // 2022-08-21T00:00 unless overridden
  Timestamp event_start = Timestamp{(19225LL) * 24 * 60};
  double threshold_pct = -5.0;  // written into the emitted config

  void validate() const;  // throws ConfigError
};

struct SyntheticTruth {
  std::string link_id;
  double depth_pct = 0;
  Timestamp onset;
  int duration_hours = 0;
  double change_pct = 0;     // -depth
  double auc_pct_hours = 0;  // analytic trapezoid: -depth * (duration - 1/2)
  double ups = 0;            // exact severity of the generated reports
};

struct SyntheticOutput {
  std::filesystem::path links_path;
  std::filesystem::path speeds_path;
  std::filesystem::path reports_path;
  std::filesystem::path truth_path;
  std::filesystem::path config_path;
  PipelineConfig config;
  std::vector<SyntheticTruth> truth;
};

SyntheticOutput gen_synthetic(const SyntheticScenario& scenario,
                              const std::filesystem::path& dir);

std::vector<SyntheticTruth> read_truth(const std::filesystem::path& path);

}  // namespace roadres
