#include "bitup/error.hpp"

namespace bitup {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::capacity_overflow: return "capacity-overflow";
    case ErrorCode::partition_exhausted: return "partition-exhausted";
    case ErrorCode::plan_mismatch: return "plan-mismatch";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::duplicate_name: return "duplicate-name";
    case ErrorCode::duplicate_tablet: return "duplicate-tablet";
    case ErrorCode::dangling_column: return "dangling-column";
    case ErrorCode::unknown_entity: return "unknown-entity";
    case ErrorCode::lineage_cycle: return "lineage-cycle";
    case ErrorCode::lifecycle_violation: return "lifecycle-violation";
    case ErrorCode::not_ready: return "not-ready";
    case ErrorCode::incomplete_tablet_set: return "incomplete-tablet-set";
    case ErrorCode::missing_reverse_mapping: return "missing-reverse-mapping";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::nothing_to_build: return "nothing-to-build";
  }
  return "unknown";
}

}  // namespace bitup
