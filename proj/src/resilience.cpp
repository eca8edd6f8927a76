#include "roadres/resilience.hpp"

#include <algorithm>
#include <cmath>

#include "roadres/errors.hpp"

namespace roadres {

void EventWindowConfig::validate() const {
  if (!(threshold_pct < 0)) throw ConfigError("threshold must be negative");
  if (gap_tolerance_hours < 0) throw ConfigError("gap_tolerance must be >= 0");
  if (lookback_days <= 0) throw ConfigError("lookback_days must be > 0");
  if (search_pad_hours < 0) throw ConfigError("search_pad_hours must be >= 0");
  if (event_span.end < event_span.start) throw ConfigError("event span end before start");
}

BaselineProfile build_baseline(const SpeedSeries& series, const TimeSpan& event_span,
                               int lookback_days, std::span<const TimeSpan> excluded_spans) {
  if (lookback_days <= 0) throw ConfigError("lookback_days must be > 0");
  BaselineProfile profile;
  profile.link_id = series.link_id;

  const Timestamp lo = event_span.start.add_days(-lookback_days);
  const Timestamp hi = event_span.start;  // exclusive

  std::array<double, 168> how_sum{};
  std::array<double, 24> hod_sum{};
  for (const auto& sample : series.samples) {
    if (sample.t < lo || !(sample.t < hi)) continue;
    if (event_span.contains(sample.t)) continue;
    bool excluded = false;
    for (const auto& span : excluded_spans)
      if (span.contains(sample.t)) {
        excluded = true;
        break;
      }
    if (excluded) continue;
    ++profile.eligible_samples;
    int how = sample.t.hour_of_week();
    int hod = sample.t.hour_of_day();
    how_sum[how] += sample.speed_mph;
    ++profile.hour_of_week_cells[how].n_obs;
    hod_sum[hod] += sample.speed_mph;
    ++profile.hour_of_day_fallback[hod].n_obs;
  }
  for (int i = 0; i < 168; ++i)
    if (profile.hour_of_week_cells[i].n_obs > 0)
      profile.hour_of_week_cells[i].mean_speed = how_sum[i] / profile.hour_of_week_cells[i].n_obs;
  for (int i = 0; i < 24; ++i)
    if (profile.hour_of_day_fallback[i].n_obs > 0)
      profile.hour_of_day_fallback[i].mean_speed = hod_sum[i] / profile.hour_of_day_fallback[i].n_obs;
  profile.insufficient = profile.eligible_samples < 24;
  return profile;
}

ChangeSeries relative_change(const SpeedSeries& series, const BaselineProfile& baseline) {
  if (baseline.insufficient)
    throw ComputeError("relative_change: baseline insufficient for link '" + series.link_id + "'");
  ChangeSeries change;
  change.link_id = series.link_id;
  for (const auto& sample : series.samples) {
    auto expected = baseline.lookup(sample.t);
    if (!expected) continue;
    change.samples.push_back({sample.t, 100.0 * (sample.speed_mph - *expected) / *expected});
  }
  if (!change.samples.empty()) {
    double span_hours =
        hours_between(change.samples.front().t, change.samples.back().t) + 1.0;
    change.coverage = static_cast<double>(change.samples.size()) / span_hours;
  }
  return change;
}

namespace {

struct Run {
  std::size_t first;  // index into samples
  std::size_t last;
};

}  // namespace

WindowDetection detect_window(const ChangeSeries& change, const EventWindowConfig& cfg) {
  cfg.validate();
  WindowDetection detection;

  const Timestamp lo = cfg.event_span.start.add_hours(-cfg.search_pad_hours);
  const Timestamp hi = cfg.event_span.end.add_hours(cfg.search_pad_hours);

  // restrict to the search span
  std::vector<ChangeSeries::Sample> samples;
  for (const auto& s : change.samples)
    if (lo <= s.t && s.t <= hi) samples.push_back(s);

  double span_hours = hours_between(lo, hi) + 1.0;
  detection.low_coverage = static_cast<double>(samples.size()) / span_hours < 0.5;

  // maximal runs of consecutive (hour-adjacent) sub-threshold samples
  std::vector<Run> runs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].f_pct < cfg.threshold_pct)) continue;
    if (!runs.empty() &&
        samples[runs.back().last].t.add_hours(1) == samples[i].t)
      runs.back().last = i;
    else
      runs.push_back({i, i});
  }
  if (runs.empty()) return detection;

  // merge runs separated by <= gap_tolerance clock hours of recovery
  std::vector<Run> merged{runs.front()};
  for (std::size_t i = 1; i < runs.size(); ++i) {
    std::int64_t gap_hours =
        (samples[runs[i].first].t.minutes - samples[merged.back().last].t.minutes) / 60 - 1;
    if (gap_hours <= cfg.gap_tolerance_hours)
      merged.back().last = runs[i].last;
    else
      merged.push_back(runs[i]);
  }

  // pick by greatest overlap with the event span; ties: longest, then earliest
  auto window_of = [&](const Run& r) {
    return EventWindow{samples[r.first].t, samples[r.last].t.add_hours(1)};
  };
  auto score = [&](const Run& r) {
    EventWindow w = window_of(r);
    double overlap = static_cast<double>(
        std::max<std::int64_t>(0, std::min(w.b.minutes, cfg.event_span.end.minutes) -
                                      std::max(w.a.minutes, cfg.event_span.start.minutes)));
    return std::pair<double, double>{overlap, hours_between(w.a, w.b)};
  };
  const Run* best = &merged.front();
  auto best_score = score(*best);
  for (std::size_t i = 1; i < merged.size(); ++i) {
    auto s = score(merged[i]);
    if (s.first > best_score.first ||
        (s.first == best_score.first && s.second > best_score.second)) {
      best = &merged[i];
      best_score = s;
    }
  }
  detection.window = window_of(*best);
  return detection;
}

double auc_trapezoid(std::span<const ChangeSeries::Sample> samples) {
  if (samples.size() < 2) throw ComputeError("auc_trapezoid: need at least 2 samples");
  double auc = 0;
  for (std::size_t j = 1; j < samples.size(); ++j) {
    double dt = hours_between(samples[j - 1].t, samples[j].t);
    if (!(dt > 0)) throw ComputeError("auc_trapezoid: timestamps not strictly increasing");
    auc += 0.5 * dt * (samples[j - 1].f_pct + samples[j].f_pct);
  }
  return auc;
}

ResilienceMetrics compute_metrics(const ChangeSeries& change, const WindowDetection& detection,
                                  const EventWindowConfig& cfg) {
  (void)cfg;
  ResilienceMetrics metrics;
  metrics.link_id = change.link_id;
  metrics.low_coverage = detection.low_coverage;
  if (!detection.window) return metrics;

  const EventWindow& w = *detection.window;
  std::vector<ChangeSeries::Sample> in_window;
  double min_f = 0;
  bool have_min = false;
  for (const auto& s : change.samples) {
    if (s.t < w.a || w.b < s.t) continue;
    in_window.push_back(s);
    if (!have_min || s.f_pct < min_f) {
      min_f = s.f_pct;
      have_min = true;
    }
  }
  metrics.window = w;
  metrics.affected = true;
  metrics.duration_hours = hours_between(w.a, w.b);
  metrics.change_pct = min_f;
  // missing interior hours are implicitly linear under the trapezoid rule
  metrics.auc_pct_hours = in_window.size() >= 2 ? auc_trapezoid(in_window) : 0.0;
  return metrics;
}

}  // namespace roadres
