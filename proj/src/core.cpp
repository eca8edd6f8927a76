#include "roadres/core.hpp"

#include <cctype>
#include <cmath>

#include "roadres/errors.hpp"

namespace roadres {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isspace(u)) continue;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}
}  // namespace

std::string_view to_string(FunctionalClass v) {
  switch (v) {
    case FunctionalClass::Freeway: return "freeway";
    case FunctionalClass::Arterial: return "arterial";
    case FunctionalClass::Collector: return "collector";
    case FunctionalClass::LocalStreet: return "local_street";
  }
  return "?";
}

std::string_view to_string(LaneCategory v) {
  switch (v) {
    case LaneCategory::One: return "1";
    case LaneCategory::TwoThree: return "2-3";
    case LaneCategory::FourPlus: return ">3";
  }
  return "?";
}

std::string_view to_string(DividerType v) {
  switch (v) {
    case DividerType::NoDivider: return "none";
    case DividerType::Legal: return "legal";
    case DividerType::Physical: return "physical";
  }
  return "?";
}

std::string_view to_string(EventType v) {
  switch (v) {
    case EventType::Flood: return "flood";
    case EventType::WinterStorm: return "winter_storm";
    case EventType::Fog: return "fog";
    case EventType::Other: return "other";
  }
  return "?";
}

FunctionalClass functional_class_from_string(std::string_view s) {
  std::string f = fold(s);
  if (f == "freeway") return FunctionalClass::Freeway;
  if (f == "arterial") return FunctionalClass::Arterial;
  if (f == "collector") return FunctionalClass::Collector;
  if (f == "local_street" || f == "localstreet") return FunctionalClass::LocalStreet;
  throw ParseError("invalid functional class literal '" + std::string(s) + "'");
}

LaneCategory lane_category_from_string(std::string_view s) {
  std::string f = fold(s);
  if (f == "1" || f == "one") return LaneCategory::One;
  if (f == "2-3" || f == "two_three") return LaneCategory::TwoThree;
  if (f == ">3" || f == "4+" || f == "four_plus") return LaneCategory::FourPlus;
  throw ParseError("invalid lane category literal '" + std::string(s) + "'");
}

DividerType divider_type_from_string(std::string_view s) {
  std::string f = fold(s);
  if (f == "none" || f == "no_divider") return DividerType::NoDivider;
  if (f == "legal") return DividerType::Legal;
  if (f == "physical") return DividerType::Physical;
  throw ParseError("invalid divider literal '" + std::string(s) + "'");
}

EventType event_type_from_string(std::string_view s) {
  std::string f = fold(s);
  if (f == "flood") return EventType::Flood;
  if (f == "winter_storm" || f == "winterstorm") return EventType::WinterStorm;
  if (f == "fog") return EventType::Fog;
  if (f == "other") return EventType::Other;
  throw ParseError("invalid event type literal '" + std::string(s) + "'");
}

EventType event_type_from_subtype(std::string_view raw) {
  std::string f = fold(raw);
  if (f == "flood" || f == "heavyrain") return EventType::Flood;
  if (f == "roadicy" || f == "heavysnow") return EventType::WinterStorm;
  if (f == "fog") return EventType::Fog;
  return EventType::Other;
}

bool valid_coordinate(const LatLon& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

std::string normalize_road_name(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_space = false;
  for (char c : name) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isspace(u)) {
      pending_space = !out.empty();
      continue;
    }
    if (u < 0x80 && std::ispunct(u)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
  }
  return out;
}

double derive_bearing(std::span<const LatLon> geometry) {
  if (geometry.size() < 2) throw ComputeError("derive_bearing: need at least 2 points");
  const LatLon& a = geometry.front();
  const LatLon& b = geometry.back();
  if (a.lat == b.lat && a.lon == b.lon) {
    bool all_same = true;
    for (const auto& p : geometry)
      if (p.lat != a.lat || p.lon != a.lon) {
        all_same = false;
        break;
      }
    if (all_same) throw ComputeError("derive_bearing: degenerate geometry (all points identical)");
    throw ComputeError("derive_bearing: endpoints identical");
  }
  double mid_lat = 0.5 * (a.lat + b.lat) * kDegToRad;
  double dx = (b.lon - a.lon) * std::cos(mid_lat);
  double dy = b.lat - a.lat;
  double deg = std::atan2(dx, dy) / kDegToRad;
  if (deg < 0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double haversine_m(const LatLon& a, const LatLon& b) {
  double phi1 = a.lat * kDegToRad;
  double phi2 = b.lat * kDegToRad;
  double dphi = (b.lat - a.lat) * kDegToRad;
  double dlam = (b.lon - a.lon) * kDegToRad;
  double s1 = std::sin(dphi / 2);
  double s2 = std::sin(dlam / 2);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double polyline_length_miles(std::span<const LatLon> geometry) {
  double meters = 0;
  for (std::size_t i = 1; i < geometry.size(); ++i)
    meters += haversine_m(geometry[i - 1], geometry[i]);
  return meters / kMetersPerMile;
}

double bearing_difference_deg(double a, double b) {
  double d = std::fmod(std::fabs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

void validate_link(const RoadLink& link, const std::string& context) {
  if (link.link_id.empty()) throw ParseError(context + ": empty link id");
  if (link.geometry.size() < 2) throw ParseError(context + ": geometry needs >= 2 points");
  for (const auto& p : link.geometry)
    if (!valid_coordinate(p))
      throw ParseError(context + ": coordinate out of range (" + std::to_string(p.lat) + "," +
                       std::to_string(p.lon) + ")");
  if (!(link.length_miles > 0)) throw ParseError(context + ": length must be > 0");
}

std::optional<double> BaselineProfile::lookup(Timestamp t) const {
  const Cell& how = hour_of_week_cells[static_cast<std::size_t>(t.hour_of_week())];
  if (how.n_obs >= 3) return how.mean_speed;
  const Cell& hod = hour_of_day_fallback[static_cast<std::size_t>(t.hour_of_day())];
  if (hod.n_obs > 0) return hod.mean_speed;
  return std::nullopt;
}

}  // namespace roadres
