#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bitup/bitmap_pair.hpp"
#include "bitup/day.hpp"
#include "bitup/hash.hpp"

namespace bitup {

/// Numeric id ranges: partition p owns [p * capacity, (p + 1) * capacity).
struct PartitionPlan {
  uint32_t partition_count = 1;
  uint64_t per_partition_capacity = 1;

  uint64_t base(uint32_t partition) const noexcept {
    return static_cast<uint64_t>(partition) * per_partition_capacity;
  }
  uint64_t total_capacity() const noexcept {
    return static_cast<uint64_t>(partition_count) * per_partition_capacity;
  }
  /// Throws capacity_overflow when the ranges do not fit in [0, 2^33).
  void validate() const;

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

/// ceil(expected / target): how many partitions the expected id volume needs.
uint64_t partitions_needed(uint64_t expected_id_count, uint64_t target_per_partition);

/// Plans partitions with 2x headroom per partition to absorb hash skew.
PartitionPlan plan_partitions(uint64_t expected_id_count, uint64_t target_per_partition);

/// One day's external-id -> numeric-id mapping plus the per-partition
/// allocator counters. Ids from earlier days are carried forward forever.
class IdSnapshot {
 public:
  static constexpr uint32_t kFormatVersion = 1;

  IdSnapshot(Day day, PartitionPlan plan, uint64_t hash_seed = kIdPartitionSeed);

  Day day() const noexcept { return day_; }
  const PartitionPlan& plan() const noexcept { return plan_; }
  uint64_t hash_seed() const noexcept { return hash_seed_; }
  std::size_t size() const noexcept { return forward_.size(); }

  uint32_t partition_of(std::string_view external_id) const noexcept {
    return static_cast<uint32_t>(hash_bytes(external_id, hash_seed_) % plan_.partition_count);
  }

  /// Allocates base(partition) + next_offset(partition) and advances the counter.
  uint64_t next_id(uint32_t partition);
  uint64_t next_offset(uint32_t partition) const;
  /// Raises a partition's counter to at least `offset`; never lowers it.
  void reserve_offsets(uint32_t partition, uint64_t offset);

  /// Existing id for external_id, or a fresh one from its hash partition.
  uint64_t assign(std::string_view external_id);

  std::optional<uint64_t> lookup(std::string_view external_id) const;
  std::optional<std::string_view> reverse_lookup(uint64_t numeric_id) const;

  /// (external id, numeric id) sorted by external id.
  std::vector<std::pair<std::string, uint64_t>> sorted_records() const;

  std::vector<uint8_t> serialize() const;
  static IdSnapshot deserialize(std::span<const uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static IdSnapshot load(const std::filesystem::path& path);

  friend bool operator==(const IdSnapshot& a, const IdSnapshot& b);

 private:
  friend IdSnapshot assign_day(const IdSnapshot* previous, Day day,
                               std::span<const std::string> todays_ids,
                               const PartitionPlan& plan, uint64_t hash_seed);

  void insert(std::string external_id, uint64_t numeric_id);

  Day day_;
  PartitionPlan plan_;
  uint64_t hash_seed_;
  std::unordered_map<std::string, uint64_t> forward_;
  std::unordered_map<uint64_t, std::string> reverse_;
  std::vector<uint64_t> next_offsets_;
};

/// Day-over-day join: every id in `previous` keeps its number; today's new
/// ids are deduplicated, sorted, and allocated from their hash partitions.
/// Ids absent today are still carried forward.
IdSnapshot assign_day(const IdSnapshot* previous, Day day, std::span<const std::string> todays_ids,
                      const PartitionPlan& plan, uint64_t hash_seed = kIdPartitionSeed);

}  // namespace bitup
