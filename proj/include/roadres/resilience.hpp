#pragma once

#include <optional>
#include <span>
#include <vector>

#include "roadres/core.hpp"

namespace roadres {

/// Relative speed change f(t) = 100 * (s(t) - sbar(t)) / sbar(t), percent,
/// defined only at hours where both observed and baseline speed exist.
struct ChangeSeries {
  std::string link_id;
  struct Sample {
    Timestamp t;   // hour-aligned
    double f_pct;  // signed %
  };
  std::vector<Sample> samples;  // strictly increasing
  double coverage = 0;          // defined hours / span hours over [first, last]
};

struct EventWindowConfig {
  TimeSpan event_span;           // candidate start/end
  double threshold_pct = -1.0;   // affected iff f < threshold (strict)
  int gap_tolerance_hours = 2;   // recovery hours bridged between runs
  int lookback_days = 30;        // baseline history window
  int search_pad_hours = 48;     // search span = event span padded both sides

  void validate() const;  // throws ConfigError
};

/// Hour-of-week means over eligible history: samples within
/// [event start - lookback, event start) and outside every excluded span.
/// Cells with fewer than 3 observations are served by the hour-of-day
/// fallback; links with fewer than 24 eligible samples are flagged
/// insufficient (and excluded downstream with that explicit flag).
BaselineProfile build_baseline(const SpeedSeries& series, const TimeSpan& event_span,
                               int lookback_days, std::span<const TimeSpan> excluded_spans = {});

/// Throws ComputeError when the baseline is flagged insufficient.
ChangeSeries relative_change(const SpeedSeries& series, const BaselineProfile& baseline);

struct WindowDetection {
  std::optional<EventWindow> window;
  bool low_coverage = false;  // < 50% of search-span hours had f defined
};

/// Finds sub-threshold runs inside the padded search span, merges runs
/// separated by at most gap_tolerance recovery hours, and picks the merged
/// run with the greatest overlap with the event span (ties: longest, then
/// earliest). a = first sub-threshold sample time; b = last sub-threshold
/// sample time + 1 h.
WindowDetection detect_window(const ChangeSeries& change, const EventWindowConfig& cfg);

/// Composite trapezoid: 1/2 * sum (t_j - t_{j-1}) (f_{j-1} + f_j), hours x %.
/// Requires >= 2 samples with strictly increasing t.
double auc_trapezoid(std::span<const ChangeSeries::Sample> samples);

/// Duration = b - a; Change = min f over samples in [a, b]; AUC = trapezoid
/// over samples in [a, b]. No window -> zeros with affected = false.
ResilienceMetrics compute_metrics(const ChangeSeries& change, const WindowDetection& detection,
                                  const EventWindowConfig& cfg);

}  // namespace roadres
