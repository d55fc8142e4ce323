#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitup/bitmap_pair.hpp"
#include "bitup/day.hpp"
#include "bitup/file_io.hpp"
#include "bitup/metrics.hpp"

namespace bitup {

struct LabelValueKey {
  std::string label;
  std::string value;
  friend auto operator<=>(const LabelValueKey&, const LabelValueKey&) = default;
};

using TabletEntries = std::map<LabelValueKey, BitmapPair>;

/// Shard index of a uid; the seeded hash keeps it stable across runs.
uint32_t tablet_of(uint64_t uid, uint32_t tablet_count);

/// One uid shard of the bitmap index: every (label, value) pair restricted to
/// the uids that hash to tablet_id.
struct Tablet {
  uint32_t tablet_id = 0;
  uint32_t tablet_count = 1;
  Day build_day;
  TabletEntries entries;
  bool sealed = false;
  uint64_t checksum = 0;

  /// Checks shard membership of every uid, then freezes the tablet and
  /// records the checksum of its file encoding.
  void seal();
  const BitmapPair* find(std::string_view label, std::string_view value) const;
};

/// File layout, little-endian:
///   "BUPT" u32 version, u32 tablet_id, u32 tablet_count, u32 build_day
///   (YYYYMMDD), u64 entry_count
///   entry_count x { u32-len label, u32-len value, u64 low_offset,
///                   u64 low_length, u64 high_offset, u64 high_length }
///   serialized bitmaps (offsets are absolute file positions)
///   u64 checksum of every preceding byte
std::vector<uint8_t> encode_tablet(const Tablet& tablet);

struct TabletRef {
  std::filesystem::path path;
  Day day;
  uint32_t tablet_id = 0;
  uint32_t tablet_count = 0;
};

/// A verified, read-only view of one tablet file. Only the index is decoded
/// up front; bitmaps are decoded on request.
class OpenTablet {
 public:
  static OpenTablet from_bytes(std::vector<uint8_t> bytes);
  static OpenTablet open(const std::filesystem::path& path);

  uint32_t tablet_id() const noexcept { return tablet_id_; }
  uint32_t tablet_count() const noexcept { return tablet_count_; }
  Day build_day() const noexcept { return build_day_; }
  uint64_t checksum() const noexcept { return checksum_; }
  std::size_t entry_count() const noexcept { return index_.size(); }

  std::optional<BitmapPair> get_bitmap(std::string_view label, std::string_view value) const;
  /// Values of a label in lexicographic order; empty for an unknown label.
  std::vector<std::string> list_values(std::string_view label) const;
  std::vector<LabelValueKey> keys() const;
  /// Decodes every entry back into a sealed Tablet.
  Tablet materialize() const;

 private:
  struct IndexEntry {
    LabelValueKey key;
    uint64_t low_offset, low_length, high_offset, high_length;
  };

  BitmapPair decode(const IndexEntry& entry) const;

  std::vector<uint8_t> bytes_;
  std::vector<IndexEntry> index_;
  uint32_t tablet_id_ = 0;
  uint32_t tablet_count_ = 0;
  Day build_day_;
  uint64_t checksum_ = 0;
};

/// Unified writer: the builder only sees this interface, so storage backends
/// can be swapped without touching it.
class TabletWriter {
 public:
  virtual ~TabletWriter() = default;
  virtual TabletRef sink_tablet(const Tablet& tablet, bool overwrite) = 0;
};

struct TabletListing {
  Day day;
  uint32_t tablet_count = 0;
  std::vector<TabletRef> tablets;  // ascending tablet_id
  std::vector<uint32_t> missing;

  bool complete() const noexcept { return tablet_count > 0 && missing.empty(); }
};

/// What a build produced for a day; stored as manifest.json next to the tablets.
struct Manifest {
  Day build_day;
  uint32_t tablet_count = 0;
  std::vector<std::string> tables;
  std::vector<std::string> labels;
  uint64_t row_count = 0;
  uint64_t unresolved_id_count = 0;
  std::map<std::string, QualityMetrics> label_metrics;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text);

/// Local file backend: <root>/<YYYY-MM-DD>/tablet_<id>.bupt + manifest.json.
class FileTabletStore final : public TabletWriter {
 public:
  explicit FileTabletStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path day_dir(Day day) const;
  std::filesystem::path tablet_path(Day day, uint32_t tablet_id) const;

  TabletRef sink_tablet(const Tablet& tablet, bool overwrite) override;
  /// Same as sink_tablet, with an injected write interruption for tests.
  TabletRef sink_tablet(const Tablet& tablet, bool overwrite, const WriteFault* fault);

  OpenTablet open_tablet(const TabletRef& ref) const;
  TabletListing list_tablets(Day day) const;

  void write_manifest(const Manifest& manifest) const;
  std::optional<Manifest> read_manifest(Day day) const;

 private:
  std::filesystem::path root_;
};

}  // namespace bitup
