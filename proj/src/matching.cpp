#include "roadres/matching.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <thread>

#include "roadres/errors.hpp"

namespace roadres {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kCellDeg = 0.01;

std::int64_t cell_key(std::int64_t ix, std::int64_t iy) { return ix * 1000003 + iy; }

std::int64_t grid_coord(double deg) {
  return static_cast<std::int64_t>(std::floor(deg / kCellDeg));
}

double point_segment_distance_sq(double px, double py, double ax, double ay, double bx,
                                 double by) {
  double dx = bx - ax, dy = by - ay;
  double len_sq = dx * dx + dy * dy;
  double t = 0;
  if (len_sq > 0) t = std::clamp(((px - ax) * dx + (py - ay) * dy) / len_sq, 0.0, 1.0);
  double cx = ax + t * dx - px;
  double cy = ay + t * dy - py;
  return cx * cx + cy * cy;
}

}  // namespace

std::string_view to_string(MatchFailure f) {
  switch (f) {
    case MatchFailure::TooFar: return "too_far";
    case MatchFailure::DirectionMismatch: return "direction_mismatch";
    case MatchFailure::NameMismatch: return "name_mismatch";
    case MatchFailure::NoCandidate: return "no_candidate";
  }
  return "?";
}

double point_to_polyline_distance(const LatLon& p, std::span<const LatLon> geometry) {
  if (!valid_coordinate(p)) throw ComputeError("point_to_polyline_distance: invalid coordinate");
  if (geometry.empty()) throw ComputeError("point_to_polyline_distance: empty geometry");
  // local equirectangular plane centered at p
  const double mx = kEarthRadiusM * kDegToRad * std::cos(p.lat * kDegToRad);  // meters per deg lon
  const double my = kEarthRadiusM * kDegToRad;                                // meters per deg lat
  auto to_plane = [&](const LatLon& q) {
    return std::pair<double, double>{(q.lon - p.lon) * mx, (q.lat - p.lat) * my};
  };
  if (geometry.size() == 1) {
    auto [x, y] = to_plane(geometry[0]);
    return std::sqrt(x * x + y * y);
  }
  double best_sq = std::numeric_limits<double>::infinity();
  auto [ax, ay] = to_plane(geometry[0]);
  for (std::size_t i = 1; i < geometry.size(); ++i) {
    auto [bx, by] = to_plane(geometry[i]);
    best_sq = std::min(best_sq, point_segment_distance_sq(0, 0, ax, ay, bx, by));
    ax = bx;
    ay = by;
  }
  return std::sqrt(best_sq);
}

LinkIndex::LinkIndex(const std::vector<RoadLink>& links) : links_(&links) {
  for (std::size_t i = 0; i < links.size(); ++i) {
    double lat_min = 90, lat_max = -90, lon_min = 180, lon_max = -180;
    for (const auto& p : links[i].geometry) {
      lat_min = std::min(lat_min, p.lat);
      lat_max = std::max(lat_max, p.lat);
      lon_min = std::min(lon_min, p.lon);
      lon_max = std::max(lon_max, p.lon);
    }
    for (std::int64_t ix = grid_coord(lon_min); ix <= grid_coord(lon_max); ++ix)
      for (std::int64_t iy = grid_coord(lat_min); iy <= grid_coord(lat_max); ++iy)
        cells_[cell_key(ix, iy)].push_back(i);
  }
}

std::vector<const RoadLink*> LinkIndex::candidates(const LatLon& p) const {
  std::vector<std::size_t> ids;
  std::int64_t cx = grid_coord(p.lon), cy = grid_coord(p.lat);
  for (std::int64_t dx = -1; dx <= 1; ++dx)
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      auto it = cells_.find(cell_key(cx + dx, cy + dy));
      if (it != cells_.end()) ids.insert(ids.end(), it->second.begin(), it->second.end());
    }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<const RoadLink*> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(&(*links_)[i]);
  return out;
}

std::optional<std::string> normalize_cardinal(std::string_view tag) {
  std::string f;
  for (char c : tag) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isspace(u) || u == '.' || u == '-' || u == '_') continue;
    f.push_back(static_cast<char>(std::toupper(u)));
  }
  if (f == "N" || f == "NORTH") return "N";
  if (f == "NE" || f == "NORTHEAST") return "NE";
  if (f == "E" || f == "EAST") return "E";
  if (f == "SE" || f == "SOUTHEAST") return "SE";
  if (f == "S" || f == "SOUTH") return "S";
  if (f == "SW" || f == "SOUTHWEST") return "SW";
  if (f == "W" || f == "WEST") return "W";
  if (f == "NW" || f == "NORTHWEST") return "NW";
  return std::nullopt;
}

double cardinal_bearing_deg(const std::string& canonical) {
  static const std::pair<const char*, double> table[] = {{"N", 0},   {"NE", 45},  {"E", 90},
                                                         {"SE", 135}, {"S", 180}, {"SW", 225},
                                                         {"W", 270},  {"NW", 315}};
  for (const auto& [k, v] : table)
    if (canonical == k) return v;
  throw ComputeError("unknown cardinal token '" + canonical + "'");
}

namespace {

bool direction_compatible(const EventReport& report, const RoadLink& link,
                          const MatchConfig& cfg) {
  if (report.direction_tag && link.direction_tag) {
    auto a = normalize_cardinal(*report.direction_tag);
    auto b = normalize_cardinal(*link.direction_tag);
    if (a && b) return *a == *b;
    // unparseable tags fall back to raw case-folded equality
    std::string ra, rb;
    for (char c : *report.direction_tag) ra.push_back(static_cast<char>(std::tolower(c)));
    for (char c : *link.direction_tag) rb.push_back(static_cast<char>(std::tolower(c)));
    return ra == rb;
  }
  if (report.direction_tag) {
    auto a = normalize_cardinal(*report.direction_tag);
    if (!a) return true;
    // links are undirected polylines: accept either digitizing direction
    double d = bearing_difference_deg(cardinal_bearing_deg(*a), link.bearing_deg);
    d = std::min(d, 180.0 - d);
    return d <= cfg.bearing_tolerance_deg;
  }
  return true;  // no direction information on the report
}

}  // namespace

MatchResult match_report(const EventReport& report, const LinkIndex& index,
                         const MatchConfig& cfg) {
  MatchResult result;
  result.report_id = report.report_id;

  auto cands = index.candidates(report.location);
  if (cands.empty()) {
    result.distance_m = std::numeric_limits<double>::infinity();
    result.failure = MatchFailure::NoCandidate;
    return result;
  }

  double nearest_any = std::numeric_limits<double>::infinity();
  const RoadLink* best = nullptr;
  double best_dist = std::numeric_limits<double>::infinity();
  bool any_within = false, any_direction = false;

  for (const RoadLink* link : cands) {
    double d = point_to_polyline_distance(report.location, link->geometry);
    nearest_any = std::min(nearest_any, d);
    if (!(d < cfg.max_distance_m)) continue;  // strict gate: exactly 10 m rejected
    any_within = true;
    if (!direction_compatible(report, *link, cfg)) continue;
    any_direction = true;
    if (link->road_name != report.road_name) continue;
    if (d < best_dist || (d == best_dist && best && link->link_id < best->link_id)) {
      best = link;
      best_dist = d;
    }
  }

  if (best) {
    result.link_id = best->link_id;
    result.distance_m = best_dist;
    return result;
  }
  result.distance_m = nearest_any;
  if (!any_within)
    result.failure = MatchFailure::TooFar;
  else if (!any_direction)
    result.failure = MatchFailure::DirectionMismatch;
  else
    result.failure = MatchFailure::NameMismatch;
  return result;
}

MatchSummary match_all(const std::vector<EventReport>& reports,
                       const std::vector<RoadLink>& links, const MatchConfig& cfg, int jobs) {
  if (links.empty()) throw ComputeError("match_all: empty link set");
  MatchSummary summary;
  if (reports.empty()) return summary;  // rate stays undefined, not 0

  LinkIndex index(links);
  summary.results.resize(reports.size());
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (jobs == 1 || reports.size() < 64) {
    for (std::size_t i = 0; i < reports.size(); ++i)
      summary.results[i] = match_report(reports[i], index, cfg);
  } else {
    std::vector<std::thread> workers;
    std::size_t chunk = (reports.size() + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      std::size_t lo = w * chunk, hi = std::min(reports.size(), lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i)
          summary.results[i] = match_report(reports[i], index, cfg);
      });
    }
    for (auto& t : workers) t.join();
  }
  std::stable_sort(summary.results.begin(), summary.results.end(),
                   [](const MatchResult& a, const MatchResult& b) {
                     return a.report_id < b.report_id;
                   });
  std::size_t matched = 0;
  for (const auto& r : summary.results) matched += r.link_id.has_value();
  summary.match_rate = static_cast<double>(matched) / static_cast<double>(reports.size());
  return summary;
}

}  // namespace roadres
