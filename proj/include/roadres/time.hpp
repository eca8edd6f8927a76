#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace roadres {

/// Local clock time at minute resolution. The workspace declares one fixed
/// time zone; all timestamps are naive local times in that zone, so no zone
/// arithmetic ever happens here. Speed samples and analysis windows are
/// hour-aligned; report times may carry minutes.
struct Timestamp {
  std::int64_t minutes = 0;  // minutes since 1970-01-01T00:00 local

  static Timestamp from_civil(int year, int month, int day, int hour, int minute);
  /// Parses "YYYY-MM-DDTHH:MM" (also accepts a trailing ":SS" with SS == 00,
  /// and a space instead of 'T'). Throws ParseError otherwise.
  static Timestamp parse(std::string_view text);

  std::string to_string() const;  // "YYYY-MM-DDTHH:MM"

  bool hour_aligned() const { return minutes % 60 == 0; }
  Timestamp floor_hour() const;
  Timestamp ceil_hour() const;

  std::int64_t hour_index() const;  // floor(minutes / 60)
  int hour_of_day() const;          // 0..23
  int weekday() const;              // 0 = Monday .. 6 = Sunday
  int hour_of_week() const { return weekday() * 24 + hour_of_day(); }

  Timestamp add_hours(std::int64_t h) const { return {minutes + h * 60}; }
  Timestamp add_days(std::int64_t d) const { return {minutes + d * 24 * 60}; }

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Signed difference b - a in (possibly fractional) hours.
inline double hours_between(Timestamp a, Timestamp b) {
  return static_cast<double>(b.minutes - a.minutes) / 60.0;
}

/// Half-open-on-nothing inclusive span [start, end], start <= end.
struct TimeSpan {
  Timestamp start;
  Timestamp end;
  bool contains(Timestamp t) const { return start <= t && t <= end; }
};

}  // namespace roadres
