#include "bitup/id_gen.hpp"

#include <algorithm>
#include <string>

#include "bitup/bytes.hpp"
#include "bitup/error.hpp"
#include "bitup/file_io.hpp"

namespace bitup {
namespace {

constexpr char kMagic[] = "BUPS";

}  // namespace

void PartitionPlan::validate() const {
  if (partition_count == 0 || per_partition_capacity == 0) {
    throw Error(ErrorCode::invalid_argument, "partition plan must have positive sizes");
  }
  if (per_partition_capacity > kUidLimit || partition_count > kUidLimit / per_partition_capacity) {
    throw Error(ErrorCode::capacity_overflow,
                std::to_string(partition_count) + " partitions x " +
                    std::to_string(per_partition_capacity) + " ids exceeds 2^33");
  }
}

uint64_t partitions_needed(uint64_t expected_id_count, uint64_t target_per_partition) {
  if (expected_id_count == 0 || target_per_partition == 0) {
    throw Error(ErrorCode::invalid_argument, "expected id count and target must be positive");
  }
  return expected_id_count / target_per_partition +
         (expected_id_count % target_per_partition != 0 ? 1 : 0);
}

PartitionPlan plan_partitions(uint64_t expected_id_count, uint64_t target_per_partition) {
  const uint64_t count = partitions_needed(expected_id_count, target_per_partition);
  if (count > UINT32_MAX || target_per_partition > kUidLimit / 2) {
    throw Error(ErrorCode::capacity_overflow, "partition plan exceeds 2^33 ids");
  }
  PartitionPlan plan{static_cast<uint32_t>(count), 2 * target_per_partition};
  plan.validate();
  return plan;
}

IdSnapshot::IdSnapshot(Day day, PartitionPlan plan, uint64_t hash_seed)
    : day_(day), plan_(plan), hash_seed_(hash_seed) {
  plan_.validate();
  next_offsets_.assign(plan_.partition_count, 0);
}

uint64_t IdSnapshot::next_offset(uint32_t partition) const {
  if (partition >= plan_.partition_count) {
    throw Error(ErrorCode::out_of_range, "partition " + std::to_string(partition) + " out of range");
  }
  return next_offsets_[partition];
}

uint64_t IdSnapshot::next_id(uint32_t partition) {
  const uint64_t offset = next_offset(partition);
  if (offset >= plan_.per_partition_capacity) {
    throw Error(ErrorCode::partition_exhausted,
                "partition " + std::to_string(partition) + " has no free ids");
  }
  ++next_offsets_[partition];
  return plan_.base(partition) + offset;
}

void IdSnapshot::reserve_offsets(uint32_t partition, uint64_t offset) {
  next_offset(partition);
  if (offset > plan_.per_partition_capacity) {
    throw Error(ErrorCode::out_of_range, "reserved offset beyond partition capacity");
  }
  next_offsets_[partition] = std::max(next_offsets_[partition], offset);
}

void IdSnapshot::insert(std::string external_id, uint64_t numeric_id) {
  reverse_.emplace(numeric_id, external_id);
  forward_.emplace(std::move(external_id), numeric_id);
}

uint64_t IdSnapshot::assign(std::string_view external_id) {
  if (auto existing = lookup(external_id)) return *existing;
  const uint64_t id = next_id(partition_of(external_id));
  insert(std::string(external_id), id);
  return id;
}

std::optional<uint64_t> IdSnapshot::lookup(std::string_view external_id) const {
  auto it = forward_.find(std::string(external_id));
  if (it == forward_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string_view> IdSnapshot::reverse_lookup(uint64_t numeric_id) const {
  auto it = reverse_.find(numeric_id);
  if (it == reverse_.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::vector<std::pair<std::string, uint64_t>> IdSnapshot::sorted_records() const {
  std::vector<std::pair<std::string, uint64_t>> out(forward_.begin(), forward_.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool operator==(const IdSnapshot& a, const IdSnapshot& b) {
  return a.day_ == b.day_ && a.plan_ == b.plan_ && a.hash_seed_ == b.hash_seed_ &&
         a.next_offsets_ == b.next_offsets_ && a.forward_ == b.forward_;
}

std::vector<uint8_t> IdSnapshot::serialize() const {
  ByteWriter out;
  out.put_magic(std::string_view(kMagic, 4));
  out.put_u32(kFormatVersion);
  out.put_u32(day_.yyyymmdd());
  out.put_u32(plan_.partition_count);
  out.put_u64(plan_.per_partition_capacity);
  out.put_u64(hash_seed_);
  auto records = sorted_records();
  out.put_u64(records.size());
  for (const auto& [external, numeric] : records) {
    out.put_string(external);
    out.put_u64(numeric);
  }
  for (uint64_t offset : next_offsets_) out.put_u64(offset);
  return std::move(out).take();
}

IdSnapshot IdSnapshot::deserialize(std::span<const uint8_t> bytes) {
  auto corrupt = [](const std::string& what) {
    return Error(ErrorCode::corruption, "snapshot: " + what);
  };
  ByteReader in(bytes);
  in.expect_magic(std::string_view(kMagic, 4), "snapshot");
  if (in.get_u32() != kFormatVersion) throw corrupt("unsupported version");
  Day day;
  PartitionPlan plan;
  try {
    day = Day::from_yyyymmdd(in.get_u32());
    plan.partition_count = in.get_u32();
    plan.per_partition_capacity = in.get_u64();
    plan.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::corruption) throw;
    throw corrupt(e.what());
  }
  const uint64_t seed = in.get_u64();
  IdSnapshot snap(day, plan, seed);
  const uint64_t count = in.get_u64();
  // Each record needs at least 12 bytes; reject absurd counts before reserving.
  if (count > in.remaining() / 12) throw corrupt("record count exceeds file size");
  snap.forward_.reserve(count);
  snap.reverse_.reserve(count);
  std::vector<std::pair<uint64_t, uint32_t>> placed;
  placed.reserve(count);
  std::string previous;
  for (uint64_t i = 0; i < count; ++i) {
    std::string external = in.get_string();
    const uint64_t numeric = in.get_u64();
    if (i > 0 && external <= previous) throw corrupt("records not strictly sorted");
    const uint32_t p = snap.partition_of(external);
    if (numeric < plan.base(p) || numeric >= plan.base(p) + plan.per_partition_capacity) {
      throw corrupt("id " + std::to_string(numeric) + " outside its partition range");
    }
    if (snap.reverse_.contains(numeric)) throw corrupt("duplicate numeric id");
    placed.emplace_back(numeric - plan.base(p), p);
    previous = external;
    snap.insert(std::move(external), numeric);
  }
  for (auto& offset : snap.next_offsets_) offset = in.get_u64();
  for (auto [offset, p] : placed) {
    if (offset >= snap.next_offsets_[p]) throw corrupt("allocator counter behind allocated ids");
  }
  for (uint64_t offset : snap.next_offsets_) {
    if (offset > plan.per_partition_capacity) throw corrupt("allocator counter beyond capacity");
  }
  if (!in.at_end()) throw corrupt("trailing bytes");
  return snap;
}

void IdSnapshot::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

IdSnapshot IdSnapshot::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

IdSnapshot assign_day(const IdSnapshot* previous, Day day, std::span<const std::string> todays_ids,
                      const PartitionPlan& plan, uint64_t hash_seed) {
  IdSnapshot next(day, plan, hash_seed);
  if (previous != nullptr) {
    if (!(previous->plan() == plan) || previous->hash_seed() != hash_seed) {
      throw Error(ErrorCode::plan_mismatch,
                  "previous snapshot " + previous->day().to_string() +
                      " was built with a different partition plan or hash seed");
    }
    next = *previous;
    next.day_ = day;
  }
  std::vector<std::string_view> fresh;
  for (const auto& id : todays_ids) {
    if (!next.forward_.contains(id)) fresh.emplace_back(id);
  }
  std::sort(fresh.begin(), fresh.end());
  fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());
  for (std::string_view id : fresh) {
    const uint64_t numeric = next.next_id(next.partition_of(id));
    next.insert(std::string(id), numeric);
  }
  return next;
}

}  // namespace bitup
