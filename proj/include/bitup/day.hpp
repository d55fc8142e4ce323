#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace bitup {

/// A proleptic Gregorian calendar date, the partition key for snapshots and
/// tablets. Text form is YYYY-MM-DD; binary form is the integer YYYYMMDD.
class Day {
 public:
  constexpr Day() = default;
  Day(int year, unsigned month, unsigned day);

  static Day parse(std::string_view text);
  static Day from_yyyymmdd(uint32_t packed);

  int year() const noexcept { return year_; }
  unsigned month() const noexcept { return month_; }
  unsigned day() const noexcept { return day_; }

  uint32_t yyyymmdd() const noexcept;
  std::string to_string() const;
  Day plus_days(int64_t n) const;

  friend constexpr auto operator<=>(const Day&, const Day&) = default;

 private:
  int year_ = 1970;
  unsigned month_ = 1;
  unsigned day_ = 1;
};

}  // namespace bitup
