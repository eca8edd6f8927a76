#include "roadres/severity.hpp"

#include <map>

#include "roadres/errors.hpp"

namespace roadres {

std::string_view to_string(IntensityClass c) {
  switch (c) {
    case IntensityClass::None: return "none";
    case IntensityClass::Light: return "light";
    case IntensityClass::Heavy: return "heavy";
  }
  return "?";
}

UpsRecord ups(const RoadLink& link, EventType type, std::span<const EventReport> reports) {
  if (!(link.length_miles > 0)) throw ComputeError("ups: link length must be > 0");
  UpsRecord record;
  record.link_id = link.link_id;
  record.event_type = type;
  double weight_sum = 0;
  for (const auto& report : reports) {
    if (report.event_type != type) continue;
    weight_sum += report.reliability;
    ++record.report_count;
  }
  record.ups = weight_sum / (10.0 * link.length_miles);
  return record;
}

std::vector<IntensityLabel> classify_hours(std::span<const EventReport> reports, EventType type,
                                           const TimeSpan& span) {
  std::map<std::int64_t, std::size_t> counts;
  for (const auto& report : reports) {
    if (report.event_type != type) continue;
    Timestamp hour = report.start_time.floor_hour();
    if (span.contains(hour)) ++counts[hour.hour_index()];
  }
  std::vector<IntensityLabel> labels;
  for (Timestamp h = span.start.floor_hour(); h <= span.end; h = h.add_hours(1)) {
    IntensityLabel label;
    label.hour = h;
    label.event_type = type;
    auto it = counts.find(h.hour_index());
    label.report_count = it == counts.end() ? 0 : it->second;
    label.label = label.report_count == 0   ? IntensityClass::None
                  : label.report_count <= 10 ? IntensityClass::Light
                                             : IntensityClass::Heavy;
    labels.push_back(label);
  }
  return labels;
}

std::optional<ReportWindow> report_window(std::span<const EventReport> reports) {
  if (reports.empty()) return std::nullopt;
  ReportWindow window;
  window.first = reports.front().start_time;
  window.last = reports.front().end_time;
  for (const auto& report : reports) {
    window.first = std::min(window.first, report.start_time);
    window.last = std::max(window.last, report.end_time);
  }
  window.first = window.first.floor_hour();
  window.last = window.last.ceil_hour();
  window.count = reports.size();
  window.duration_hours = hours_between(window.first, window.last);
  return window;
}

std::vector<AggregatePoint> network_aggregate(std::span<const ChangeSeries> series) {
  std::map<std::int64_t, std::pair<double, std::size_t>> sums;
  for (const auto& s : series)
    for (const auto& sample : s.samples) {
      auto& [sum, n] = sums[sample.t.hour_index()];
      sum += sample.f_pct;
      ++n;
    }
  std::vector<AggregatePoint> out;
  out.reserve(sums.size());
  for (const auto& [hour, acc] : sums)
    out.push_back({Timestamp{hour * 60}, acc.first / static_cast<double>(acc.second), acc.second});
  return out;
}

}  // namespace roadres
