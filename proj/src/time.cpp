#include "roadres/time.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "roadres/errors.hpp"

namespace roadres {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t positive_mod(std::int64_t a, std::int64_t b) {
  std::int64_t r = a % b;
  return r < 0 ? r + b : r;
}

int parse_int_field(std::string_view s, size_t pos, size_t len, const char* what) {
  if (pos + len > s.size()) throw ParseError(std::string("timestamp too short: '") + std::string(s) + "'");
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, value);
  if (ec != std::errc{} || ptr != s.data() + pos + len)
    throw ParseError(std::string("bad ") + what + " in timestamp '" + std::string(s) + "'");
  return value;
}

}  // namespace

Timestamp Timestamp::from_civil(int year, int month, int day, int hour, int minute) {
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                     std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) throw ParseError("invalid calendar date");
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59) throw ParseError("invalid time of day");
  std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  return {days * 24 * 60 + hour * 60 + minute};
}

Timestamp Timestamp::parse(std::string_view s) {
  // YYYY-MM-DDTHH:MM with optional :SS (must be 00)
  if (s.size() < 16) throw ParseError("unparseable timestamp '" + std::string(s) + "'");
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    throw ParseError("unparseable timestamp '" + std::string(s) + "'");
  int year = parse_int_field(s, 0, 4, "year");
  int month = parse_int_field(s, 5, 2, "month");
  int day = parse_int_field(s, 8, 2, "day");
  int hour = parse_int_field(s, 11, 2, "hour");
  int minute = parse_int_field(s, 14, 2, "minute");
  if (s.size() > 16) {
    if (s.size() != 19 || s[16] != ':' || parse_int_field(s, 17, 2, "second") != 0)
      throw ParseError("unparseable timestamp '" + std::string(s) + "' (seconds must be :00)");
  }
  return from_civil(year, month, day, hour, minute);
}

std::string Timestamp::to_string() const {
  using namespace std::chrono;
  std::int64_t days = floor_div(minutes, 24 * 60);
  std::int64_t rem = minutes - days * 24 * 60;
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 60), static_cast<int>(rem % 60));
  return buf;
}

Timestamp Timestamp::floor_hour() const { return {floor_div(minutes, 60) * 60}; }

Timestamp Timestamp::ceil_hour() const {
  std::int64_t f = floor_div(minutes, 60) * 60;
  return {f == minutes ? f : f + 60};
}

std::int64_t Timestamp::hour_index() const { return floor_div(minutes, 60); }

int Timestamp::hour_of_day() const { return static_cast<int>(positive_mod(hour_index(), 24)); }

int Timestamp::weekday() const {
  // 1970-01-01 was a Thursday; Monday = 0.
  std::int64_t days = floor_div(minutes, 24 * 60);
  return static_cast<int>(positive_mod(days + 3, 7));
}

}  // namespace roadres
