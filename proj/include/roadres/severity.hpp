#pragma once

#include <optional>
#include <span>
#include <vector>

#include "roadres/core.hpp"
#include "roadres/resilience.hpp"

namespace roadres {

/// User-perceived severity: UPS = sum(w_i) / (10 L), reports per mile
/// weighted by reliability.
struct UpsRecord {
  std::string link_id;
  EventType event_type = EventType::Other;
  double ups = 0;            // count/mile, >= 0
  std::size_t report_count = 0;
};

UpsRecord ups(const RoadLink& link, EventType type, std::span<const EventReport> reports);

enum class IntensityClass { None, Light, Heavy };

std::string_view to_string(IntensityClass c);

/// Hourly region-wide intensity: None = 0 reports, Light = 1..10, Heavy > 10
/// (counted by report start hour).
struct IntensityLabel {
  Timestamp hour;
  EventType event_type = EventType::Other;
  std::size_t report_count = 0;
  IntensityClass label = IntensityClass::None;
};

std::vector<IntensityLabel> classify_hours(std::span<const EventReport> reports, EventType type,
                                           const TimeSpan& span);

struct ReportWindow {
  Timestamp first;       // min start, floored to hour
  Timestamp last;        // max end, ceiled to hour
  std::size_t count = 0;
  double duration_hours = 0;
};

/// Nullopt for an empty report set.
std::optional<ReportWindow> report_window(std::span<const EventReport> reports);

struct AggregatePoint {
  Timestamp hour;
  double mean_change_pct = 0;
  std::size_t contributors = 0;
};

/// Unweighted per-hour mean across series; hours with zero contributors are
/// omitted, never zero-filled.
std::vector<AggregatePoint> network_aggregate(std::span<const ChangeSeries> series);

}  // namespace roadres
