#pragma once

#include <cstdint>

#include "bitup/day.hpp"

namespace bitup {

/// Per-label quality snapshot recorded after each build.
struct QualityMetrics {
  uint64_t row_count = 0;
  uint64_t empty_rows = 0;
  /// empty_rows / row_count; 1.0 for a table with no rows.
  double empty_ratio = 0.0;
  uint64_t value_cardinality = 0;
  uint64_t unresolved_id_count = 0;
  Day last_updated;

  friend bool operator==(const QualityMetrics&, const QualityMetrics&) = default;
};

inline double empty_ratio_of(uint64_t empty_rows, uint64_t row_count) {
  return row_count == 0 ? 1.0 : static_cast<double>(empty_rows) / static_cast<double>(row_count);
}

}  // namespace bitup
