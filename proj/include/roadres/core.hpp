#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roadres/time.hpp"

namespace roadres {

// Mean Earth radius (IUGG), meters. One spherical model everywhere.
inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kMetersPerMile = 1609.344;

enum class FunctionalClass { Freeway, Arterial, Collector, LocalStreet };
enum class LaneCategory { One, TwoThree, FourPlus };
enum class DividerType { NoDivider, Legal, Physical };
enum class EventType { Flood, WinterStorm, Fog, Other };

std::string_view to_string(FunctionalClass v);
std::string_view to_string(LaneCategory v);
std::string_view to_string(DividerType v);
std::string_view to_string(EventType v);

/// Parse a serialized literal; throws ParseError naming the literal.
FunctionalClass functional_class_from_string(std::string_view s);
LaneCategory lane_category_from_string(std::string_view s);
DividerType divider_type_from_string(std::string_view s);
EventType event_type_from_string(std::string_view s);

/// Total raw-subtype mapping: "Flood"/"Heavy Rain" -> Flood,
/// "Road Icy"/"Heavy Snow" -> WinterStorm, "Fog" -> Fog, anything else Other.
/// Comparison is case- and whitespace-insensitive.
EventType event_type_from_subtype(std::string_view raw_subtype);

struct LatLon {
  double lat = 0;  // degrees, [-90, 90]
  double lon = 0;  // degrees, [-180, 180]
};

bool valid_coordinate(const LatLon& p);

/// Lowercase, collapse whitespace runs, strip punctuation, trim. Bytes >= 0x80
/// pass through unchanged.
std::string normalize_road_name(std::string_view name);

/// Forward azimuth first -> last point, degrees [0, 360). Computed in a local
/// equirectangular plane scaled at the midpoint latitude, so reversing the
/// polyline flips the bearing by exactly 180 (mod 360).
/// Throws ComputeError when all points coincide.
double derive_bearing(std::span<const LatLon> geometry);

/// Great-circle distance, meters (haversine on the mean sphere).
double haversine_m(const LatLon& a, const LatLon& b);

/// Sum of per-segment great-circle distances, miles.
double polyline_length_miles(std::span<const LatLon> geometry);

/// Smallest absolute angular difference of two bearings, degrees in [0, 180].
double bearing_difference_deg(double a, double b);

struct RoadLink {
  std::string link_id;
  std::optional<std::string> tmc_code;
  std::vector<LatLon> geometry;  // >= 2 points
  double length_miles = 0;       // > 0
  double bearing_deg = 0;        // [0, 360), derived first -> last
  FunctionalClass functional_class = FunctionalClass::Freeway;
  LaneCategory lane_category = LaneCategory::One;
  DividerType divider = DividerType::NoDivider;
  bool is_intersection = false;
  bool is_frontage = false;
  double min_altitude_km = 0;
  double slope = 0;
  std::string road_name;  // normalized
  std::optional<std::string> direction_tag;
};

/// Throws ParseError describing the first violated invariant, if any.
void validate_link(const RoadLink& link, const std::string& context);

struct SpeedSample {
  Timestamp t;  // hour-aligned
  double speed_mph = 0;
};

struct SpeedSeries {
  std::string link_id;
  std::vector<SpeedSample> samples;  // strictly increasing, hour-aligned
};

struct EventReport {
  std::string report_id;
  EventType event_type = EventType::Other;
  std::string raw_subtype;
  LatLon location;
  Timestamp start_time;
  Timestamp end_time;       // >= start_time
  std::string road_name;    // normalized
  std::optional<std::string> direction_tag;
  double reliability = 0;   // [0, 10]
};

/// 168 hour-of-week cells plus a 24 hour-of-day fallback. Cells with
/// n_obs == 0 carry no mean; hour-of-week cells with n_obs < 3 are served by
/// the fallback.
struct BaselineProfile {
  struct Cell {
    double mean_speed = 0;
    int n_obs = 0;
  };
  std::string link_id;
  std::array<Cell, 168> hour_of_week_cells{};
  std::array<Cell, 24> hour_of_day_fallback{};
  int eligible_samples = 0;
  bool insufficient = false;  // fewer than 24 eligible samples

  /// Expected speed at t, or nullopt when no cell can serve it.
  std::optional<double> lookup(Timestamp t) const;
};

struct EventWindow {
  Timestamp a;
  Timestamp b;
};

struct ResilienceMetrics {
  std::string link_id;
  std::string event_id;
  std::optional<EventWindow> window;
  double duration_hours = 0;   // >= 0
  double change_pct = 0;       // signed %
  double auc_pct_hours = 0;    // signed % * hours
  bool affected = false;
  bool low_coverage = false;
};

}  // namespace roadres
