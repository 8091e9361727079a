#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace procrisk {

/// Proleptic Gregorian calendar date. Spans are exact calendar-day counts.
struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  bool valid() const;
  long to_days() const;  // days since 1970-01-01
  static Date from_days(long days);

  auto operator<=>(const Date&) const = default;
};

/// days from `from` to `to` (positive when `to` is later)
long days_between(const Date& from, const Date& to);

/// Parses against a strftime-like pattern made of %Y, %m, %d and literal
/// separators, e.g. "%Y-%m-%d" or "%d/%m/%Y". Rejects calendar-invalid
/// dates and trailing garbage.
std::optional<Date> parse_date(std::string_view text, std::string_view format);

std::string format_iso(const Date& d);

}  // namespace procrisk
