#include "procrisk/date.hpp"

#include <array>
#include <cstdio>

namespace procrisk {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                  31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[m - 1];
}

}  // namespace

bool Date::valid() const {
  return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
}

// Howard Hinnant's days_from_civil / civil_from_days.
long Date::to_days() const {
  long y = year;
  long m = month;
  long d = day;
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

Date Date::from_days(long days) {
  long z = days + 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

long days_between(const Date& from, const Date& to) { return to.to_days() - from.to_days(); }

std::optional<Date> parse_date(std::string_view text, std::string_view format) {
  Date out{0, 0, 0};
  std::size_t pos = 0;
  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] == '%' && f + 1 < format.size()) {
      char spec = format[++f];
      int width = spec == 'Y' ? 4 : 2;
      if (pos + width > text.size()) return std::nullopt;
      int value = 0;
      for (int k = 0; k < width; ++k) {
        char c = text[pos++];
        if (c < '0' || c > '9') return std::nullopt;
        value = value * 10 + (c - '0');
      }
      switch (spec) {
        case 'Y': out.year = value; break;
        case 'm': out.month = value; break;
        case 'd': out.day = value; break;
        default: return std::nullopt;
      }
    } else {
      if (pos >= text.size() || text[pos] != format[f]) return std::nullopt;
      ++pos;
    }
  }
  if (pos != text.size()) return std::nullopt;
  if (!out.valid()) return std::nullopt;
  return out;
}

std::string format_iso(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

}  // namespace procrisk
