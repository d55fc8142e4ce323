#include "bitup/day.hpp"

#include <charconv>
#include <cstdio>

#include "bitup/error.hpp"

namespace bitup {
namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(int y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

// Civil-date <-> serial day conversions (H. Hinnant's algorithms).
int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe + era * 400 + (m <= 2));
}

}  // namespace

Day::Day(int year, unsigned month, unsigned day) : year_(year), month_(month), day_(day) {
  if (year < 1 || year > 9999 || month < 1 || month > 12 || day < 1 ||
      day > days_in_month(year, month)) {
    throw Error(ErrorCode::invalid_argument, "invalid calendar date");
  }
}

Day Day::parse(std::string_view text) {
  auto bad = [&] {
    return Error(ErrorCode::invalid_argument,
                 "expected a date as YYYY-MM-DD, got '" + std::string(text) + "'");
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse_part = [&](std::string_view part, auto& out) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc{} || p != part.data() + part.size()) throw bad();
  };
  parse_part(text.substr(0, 4), y);
  parse_part(text.substr(5, 2), m);
  parse_part(text.substr(8, 2), d);
  return Day(y, m, d);
}

Day Day::from_yyyymmdd(uint32_t packed) {
  return Day(static_cast<int>(packed / 10000), (packed / 100) % 100, packed % 100);
}

uint32_t Day::yyyymmdd() const noexcept {
  return static_cast<uint32_t>(year_) * 10000 + month_ * 100 + day_;
}

std::string Day::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year_, month_, day_);
  return buf;
}

Day Day::plus_days(int64_t n) const {
  int y;
  unsigned m, d;
  civil_from_days(days_from_civil(year_, month_, day_) + n, y, m, d);
  return Day(y, m, d);
}

}  // namespace bitup
