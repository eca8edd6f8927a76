#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "roadres/core.hpp"

namespace roadres {

enum class MatchFailure { TooFar, DirectionMismatch, NameMismatch, NoCandidate };

std::string_view to_string(MatchFailure f);

struct MatchResult {
  std::string report_id;
  std::optional<std::string> link_id;   // present iff no failure
  double distance_m = 0;                // to matched or nearest candidate; +inf when none
  std::optional<MatchFailure> failure;
};

struct MatchConfig {
  double max_distance_m = 10.0;         // strict: exactly 10 m is rejected
  double bearing_tolerance_deg = 30.0;
};

/// Minimum distance from p to the polyline, meters. Segments are measured in
/// a local equirectangular projection centered at p (valid at sub-km scales).
double point_to_polyline_distance(const LatLon& p, std::span<const LatLon> geometry);

/// Uniform 0.01-degree grid over link bounding boxes; queries probe the
/// point's cell and its 8 neighbors.
class LinkIndex {
 public:
  explicit LinkIndex(const std::vector<RoadLink>& links);
  std::vector<const RoadLink*> candidates(const LatLon& p) const;
  bool empty() const { return links_->empty(); }

 private:
  const std::vector<RoadLink>* links_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

/// The three attachment rules: distance < gate, direction compatible, names
/// equal after normalization. Among survivors the nearest wins; ties go to
/// the smallest link_id.
MatchResult match_report(const EventReport& report, const LinkIndex& index,
                         const MatchConfig& cfg = {});

struct MatchSummary {
  std::vector<MatchResult> results;      // ordered by report_id
  std::optional<double> match_rate;      // nullopt when there were no reports
};

MatchSummary match_all(const std::vector<EventReport>& reports,
                       const std::vector<RoadLink>& links, const MatchConfig& cfg = {},
                       int jobs = 1);

/// Normalizes an 8-point cardinal tag ("N", "ne", "North") to a canonical
/// token, or nullopt when the tag is not a recognizable cardinal.
std::optional<std::string> normalize_cardinal(std::string_view tag);

/// Bearing implied by a canonical cardinal token (N = 0, NE = 45, ...).
double cardinal_bearing_deg(const std::string& canonical);

}  // namespace roadres
