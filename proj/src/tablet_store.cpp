#include "bitup/tablet_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>

#include "bitup/bytes.hpp"
#include "bitup/error.hpp"
#include "bitup/hash.hpp"

namespace bitup {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[] = "BUPT";
constexpr uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 4 + 4 + 8;

Error corrupt(const std::string& what) { return Error(ErrorCode::corruption, "tablet: " + what); }

}  // namespace

uint32_t tablet_of(uint64_t uid, uint32_t tablet_count) {
  return static_cast<uint32_t>(hash_u64(uid, kTabletSeed) % tablet_count);
}

void Tablet::seal() {
  if (tablet_count == 0 || tablet_id >= tablet_count) {
    throw Error(ErrorCode::invalid_argument, "tablet id outside [0, tablet_count)");
  }
  for (const auto& [key, pair] : entries) {
    for (uint64_t uid : pair.to_uids()) {
      if (tablet_of(uid, tablet_count) != tablet_id) {
        throw Error(ErrorCode::invalid_argument,
                    "uid " + std::to_string(uid) + " in (" + key.label + ", " + key.value +
                        ") does not belong to tablet " + std::to_string(tablet_id));
      }
    }
  }
  sealed = true;
  auto bytes = encode_tablet(*this);
  ByteReader tail{std::span(bytes).last(8)};
  checksum = tail.get_u64();
}

const BitmapPair* Tablet::find(std::string_view label, std::string_view value) const {
  auto it = entries.find(LabelValueKey{std::string(label), std::string(value)});
  return it == entries.end() ? nullptr : &it->second;
}

std::vector<uint8_t> encode_tablet(const Tablet& tablet) {
  ByteWriter out;
  out.put_magic(std::string_view(kMagic, 4));
  out.put_u32(kVersion);
  out.put_u32(tablet.tablet_id);
  out.put_u32(tablet.tablet_count);
  out.put_u32(tablet.build_day.yyyymmdd());
  out.put_u64(tablet.entries.size());

  // Index first with placeholder offsets, patched once blob positions are known.
  std::vector<std::size_t> slots;
  slots.reserve(tablet.entries.size());
  for (const auto& [key, pair] : tablet.entries) {
    out.put_string(key.label);
    out.put_string(key.value);
    slots.push_back(out.size());
    for (int i = 0; i < 4; ++i) out.put_u64(0);
  }
  std::size_t slot = 0;
  for (const auto& [key, pair] : tablet.entries) {
    const std::size_t low_at = out.size();
    pair.low.serialize_to(out);
    const std::size_t high_at = out.size();
    pair.high.serialize_to(out);
    const std::size_t end = out.size();
    out.patch_u64(slots[slot] + 0, low_at);
    out.patch_u64(slots[slot] + 8, high_at - low_at);
    out.patch_u64(slots[slot] + 16, high_at);
    out.patch_u64(slots[slot] + 24, end - high_at);
    ++slot;
  }
  out.put_u64(checksum64(out.bytes()));
  return std::move(out).take();
}

// --- OpenTablet ---

OpenTablet OpenTablet::from_bytes(std::vector<uint8_t> bytes) {
  if (bytes.size() < kHeaderSize + 8) throw corrupt("file too short");
  const std::size_t body = bytes.size() - 8;
  ByteReader tail{std::span(bytes).subspan(body)};
  const uint64_t stored = tail.get_u64();
  if (checksum64(std::span(bytes).first(body)) != stored) throw corrupt("checksum mismatch");

  OpenTablet t;
  ByteReader in{std::span(bytes).first(body)};
  in.expect_magic(std::string_view(kMagic, 4), "tablet");
  if (in.get_u32() != kVersion) throw corrupt("unsupported version");
  t.tablet_id_ = in.get_u32();
  t.tablet_count_ = in.get_u32();
  if (t.tablet_count_ == 0 || t.tablet_id_ >= t.tablet_count_) throw corrupt("bad tablet id");
  try {
    t.build_day_ = Day::from_yyyymmdd(in.get_u32());
  } catch (const Error&) {
    throw corrupt("bad build day");
  }
  const uint64_t count = in.get_u64();
  if (count > in.remaining() / 40) throw corrupt("entry count exceeds file size");
  t.index_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    IndexEntry e;
    e.key.label = in.get_string();
    e.key.value = in.get_string();
    e.low_offset = in.get_u64();
    e.low_length = in.get_u64();
    e.high_offset = in.get_u64();
    e.high_length = in.get_u64();
    if (!t.index_.empty() && !(t.index_.back().key < e.key)) throw corrupt("index not sorted");
    for (auto [off, len] : {std::pair{e.low_offset, e.low_length},
                            std::pair{e.high_offset, e.high_length}}) {
      if (off > body || len > body - off) throw corrupt("bitmap extent outside file");
    }
    t.index_.push_back(std::move(e));
  }
  t.checksum_ = stored;
  t.bytes_ = std::move(bytes);
  return t;
}

OpenTablet OpenTablet::open(const fs::path& path) { return from_bytes(read_file(path)); }

BitmapPair OpenTablet::decode(const IndexEntry& e) const {
  std::span<const uint8_t> all(bytes_);
  return BitmapPair{CompressedBitmap::deserialize(all.subspan(e.low_offset, e.low_length)),
                    CompressedBitmap::deserialize(all.subspan(e.high_offset, e.high_length))};
}

std::optional<BitmapPair> OpenTablet::get_bitmap(std::string_view label,
                                                 std::string_view value) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), std::pair{label, value},
                             [](const IndexEntry& e, const std::pair<std::string_view,
                                                                     std::string_view>& k) {
                               return std::pair<std::string_view, std::string_view>(
                                          e.key.label, e.key.value) < k;
                             });
  if (it == index_.end() || it->key.label != label || it->key.value != value) return std::nullopt;
  return decode(*it);
}

std::vector<std::string> OpenTablet::list_values(std::string_view label) const {
  std::vector<std::string> out;
  for (const auto& e : index_) {
    if (e.key.label == label) out.push_back(e.key.value);
  }
  return out;
}

std::vector<LabelValueKey> OpenTablet::keys() const {
  std::vector<LabelValueKey> out;
  out.reserve(index_.size());
  for (const auto& e : index_) out.push_back(e.key);
  return out;
}

Tablet OpenTablet::materialize() const {
  Tablet t;
  t.tablet_id = tablet_id_;
  t.tablet_count = tablet_count_;
  t.build_day = build_day_;
  for (const auto& e : index_) t.entries.emplace(e.key, decode(e));
  t.sealed = true;
  t.checksum = checksum_;
  return t;
}

// --- manifest ---

namespace {

json metrics_to_json(const QualityMetrics& m) {
  return json{{"row_count", m.row_count},
              {"empty_rows", m.empty_rows},
              {"empty_ratio", m.empty_ratio},
              {"value_cardinality", m.value_cardinality},
              {"unresolved_id_count", m.unresolved_id_count},
              {"last_updated", m.last_updated.to_string()}};
}

QualityMetrics metrics_from_json(const json& j) {
  QualityMetrics m;
  m.row_count = j.at("row_count").get<uint64_t>();
  m.empty_rows = j.at("empty_rows").get<uint64_t>();
  m.empty_ratio = j.at("empty_ratio").get<double>();
  m.value_cardinality = j.at("value_cardinality").get<uint64_t>();
  m.unresolved_id_count = j.at("unresolved_id_count").get<uint64_t>();
  m.last_updated = Day::parse(j.at("last_updated").get<std::string>());
  return m;
}

}  // namespace

std::string manifest_to_json(const Manifest& m) {
  json metrics = json::object();
  for (const auto& [label, q] : m.label_metrics) metrics[label] = metrics_to_json(q);
  json j{{"build_day", m.build_day.to_string()},
         {"tablet_count", m.tablet_count},
         {"tables", m.tables},
         {"labels", m.labels},
         {"row_count", m.row_count},
         {"unresolved_id_count", m.unresolved_id_count},
         {"label_metrics", metrics}};
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    Manifest m;
    m.build_day = Day::parse(j.at("build_day").get<std::string>());
    m.tablet_count = j.at("tablet_count").get<uint32_t>();
    m.tables = j.at("tables").get<std::vector<std::string>>();
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.row_count = j.at("row_count").get<uint64_t>();
    m.unresolved_id_count = j.at("unresolved_id_count").get<uint64_t>();
    for (const auto& [label, q] : j.at("label_metrics").items()) {
      m.label_metrics.emplace(label, metrics_from_json(q));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corruption, std::string("manifest: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::corruption, std::string("manifest: ") + e.what());
  }
}

// --- FileTabletStore ---

FileTabletStore::FileTabletStore(fs::path root) : root_(std::move(root)) {}

fs::path FileTabletStore::day_dir(Day day) const { return root_ / day.to_string(); }

fs::path FileTabletStore::tablet_path(Day day, uint32_t tablet_id) const {
  return day_dir(day) / ("tablet_" + std::to_string(tablet_id) + ".bupt");
}

TabletRef FileTabletStore::sink_tablet(const Tablet& tablet, bool overwrite) {
  return sink_tablet(tablet, overwrite, nullptr);
}

TabletRef FileTabletStore::sink_tablet(const Tablet& tablet, bool overwrite,
                                       const WriteFault* fault) {
  if (!tablet.sealed) throw Error(ErrorCode::invalid_argument, "cannot sink an unsealed tablet");
  const fs::path path = tablet_path(tablet.build_day, tablet.tablet_id);
  if (!overwrite && fs::exists(path)) {
    throw Error(ErrorCode::duplicate_tablet, "tablet " + std::to_string(tablet.tablet_id) +
                                                 " for " + tablet.build_day.to_string() +
                                                 " already exists");
  }
  write_file_atomic(path, encode_tablet(tablet), fault);
  return TabletRef{path, tablet.build_day, tablet.tablet_id, tablet.tablet_count};
}

OpenTablet FileTabletStore::open_tablet(const TabletRef& ref) const {
  OpenTablet t = OpenTablet::open(ref.path);
  if (t.tablet_id() != ref.tablet_id || t.build_day() != ref.day) {
    throw corrupt("file " + ref.path.string() + " does not match its reference");
  }
  return t;
}

TabletListing FileTabletStore::list_tablets(Day day) const {
  TabletListing listing;
  listing.day = day;
  const fs::path dir = day_dir(day);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return listing;

  uint32_t declared = 0;
  if (auto manifest = read_manifest(day)) declared = manifest->tablet_count;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    const std::string name = p.filename().string();
    if (!entry.is_regular_file() || p.extension() != ".bupt" || !name.starts_with("tablet_")) {
      continue;
    }
    // Header-only peek; full verification happens in open_tablet.
    std::ifstream in(p, std::ios::binary);
    uint8_t header[kHeaderSize];
    if (!in.read(reinterpret_cast<char*>(header), kHeaderSize)) continue;
    ByteReader r(header);
    try {
      r.expect_magic(std::string_view(kMagic, 4), "tablet");
    } catch (const Error&) {
      continue;
    }
    r.get_u32();
    TabletRef ref{p, day, r.get_u32(), r.get_u32()};
    if (r.get_u32() != day.yyyymmdd() || ref.tablet_count == 0) continue;
    declared = std::max(declared, ref.tablet_count);
    listing.tablets.push_back(std::move(ref));
  }
  std::sort(listing.tablets.begin(), listing.tablets.end(),
            [](const TabletRef& a, const TabletRef& b) { return a.tablet_id < b.tablet_id; });
  listing.tablet_count = declared;
  std::size_t k = 0;
  for (uint32_t id = 0; id < declared; ++id) {
    while (k < listing.tablets.size() && listing.tablets[k].tablet_id < id) ++k;
    if (k == listing.tablets.size() || listing.tablets[k].tablet_id != id) {
      listing.missing.push_back(id);
    }
  }
  return listing;
}

void FileTabletStore::write_manifest(const Manifest& manifest) const {
  write_text_atomic(day_dir(manifest.build_day) / "manifest.json", manifest_to_json(manifest));
}

std::optional<Manifest> FileTabletStore::read_manifest(Day day) const {
  const fs::path path = day_dir(day) / "manifest.json";
  if (!fs::exists(path)) return std::nullopt;
  return manifest_from_json(read_text_file(path));
}

}  // namespace bitup
