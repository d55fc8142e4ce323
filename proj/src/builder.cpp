#include "bitup/builder.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "bitup/error.hpp"

namespace bitup {

std::string_view canonical_value(std::string_view raw) noexcept {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto first = raw.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = raw.find_last_not_of(kSpace);
  return raw.substr(first, last - first + 1);
}

namespace {

struct Cell {
  uint32_t tablet = 0;
  uint32_t value = 0;
  std::vector<uint32_t> low;
  std::vector<uint32_t> high;
  BitmapPair pair;
};

CompressedBitmap finish(std::vector<uint32_t>& offsets) {
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  auto bitmap = CompressedBitmap::from_sorted(offsets);
  std::vector<uint32_t>().swap(offsets);
  return bitmap;
}

}  // namespace

std::vector<TabletEntries> build_label(std::span<const LabelRow> rows, std::string_view label,
                                       const PartitionPlan& plan, uint32_t tablet_count,
                                       unsigned workers) {
  if (tablet_count == 0) throw Error(ErrorCode::invalid_argument, "tablet_count must be positive");
  std::vector<TabletEntries> out(tablet_count);

  std::map<std::string, uint32_t, std::less<>> value_ids;
  std::vector<std::string> values;
  std::unordered_map<uint64_t, std::size_t> cell_of;
  std::vector<Cell> cells;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const LabelRow& row = rows[i];
    if (row.label != label) {
      throw Error(ErrorCode::invalid_argument, "row " + std::to_string(i) + ": label '" +
                                                   row.label + "' in a build of '" +
                                                   std::string(label) + "'");
    }
    if (row.uid >= plan.total_capacity() || row.uid >= kUidLimit) {
      throw Error(ErrorCode::out_of_range, "row " + std::to_string(i) + ": uid " +
                                               std::to_string(row.uid) +
                                               " outside the id space");
    }
    const std::string_view value = canonical_value(row.value);
    if (value.empty()) continue;
    auto vit = value_ids.find(value);
    if (vit == value_ids.end()) {
      vit = value_ids.emplace(std::string(value), static_cast<uint32_t>(values.size())).first;
      values.emplace_back(value);
    }
    const uint32_t tablet = tablet_of(row.uid, tablet_count);
    const uint64_t cell_key = (static_cast<uint64_t>(tablet) << 32) | vit->second;
    auto [cit, inserted] = cell_of.emplace(cell_key, cells.size());
    if (inserted) cells.push_back(Cell{tablet, vit->second, {}, {}, {}});
    Cell& cell = cells[cit->second];
    const SplitUid split = split_uid(row.uid);
    (split.segment == Segment::low ? cell.low : cell.high).push_back(split.offset);
  }

  // Each cell has exactly one writer.
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    cells[i].pair.low = finish(cells[i].low);
    cells[i].pair.high = finish(cells[i].high);
  });
  for (auto& cell : cells) {
    out[cell.tablet].emplace(LabelValueKey{std::string(label), values[cell.value]},
                             std::move(cell.pair));
  }
  return out;
}

BuildOutput build_tablets(const Catalog& catalog, std::span<const SourceTable> tables,
                          const IdSnapshot& snapshot, uint32_t tablet_count, unsigned workers) {
  if (tablet_count == 0) throw Error(ErrorCode::invalid_argument, "tablet_count must be positive");
  BuildOutput output;
  output.day = snapshot.day();
  std::vector<TabletEntries> merged(tablet_count);
  Manifest& manifest = output.manifest;
  manifest.build_day = snapshot.day();
  manifest.tablet_count = tablet_count;

  for (const SourceTable& source : tables) {
    const TableMeta* meta = catalog.find_table(source.name, source.day);
    if (meta == nullptr) {
      throw Error(ErrorCode::unknown_entity, "table " + source.name + " is not registered for " +
                                                 source.day.to_string());
    }
    if (meta->readiness != Readiness::ready) {
      throw Error(ErrorCode::not_ready, "table " + source.name + " is not ready for " +
                                            source.day.to_string());
    }
    const DelimitedTable& data = source.data;
    const std::size_t id_col = data.require_column(meta->id_column().name);

    std::vector<std::optional<uint64_t>> uids;
    uids.reserve(data.rows.size());
    uint64_t unresolved = 0;
    for (const auto& row : data.rows) {
      uids.push_back(snapshot.lookup(row[id_col]));
      if (!uids.back()) ++unresolved;
    }
    manifest.tables.push_back(source.name);
    manifest.row_count += data.rows.size();
    manifest.unresolved_id_count += unresolved;

    for (const LabelMeta* label : catalog.labels_for_table(source.name)) {
      const std::size_t col = data.require_column(label->source_column);
      std::vector<LabelRow> rows;
      rows.reserve(data.rows.size());
      std::set<std::string_view> distinct;
      uint64_t empty = 0;
      for (std::size_t r = 0; r < data.rows.size(); ++r) {
        const std::string_view value = canonical_value(data.rows[r][col]);
        if (value.empty()) {
          ++empty;
          continue;
        }
        distinct.insert(value);
        if (uids[r]) rows.push_back(LabelRow{*uids[r], label->name, std::string(value)});
      }
      auto shards = build_label(rows, label->name, snapshot.plan(), tablet_count, workers);
      for (uint32_t t = 0; t < tablet_count; ++t) merged[t].merge(shards[t]);

      QualityMetrics q;
      q.row_count = data.rows.size();
      q.empty_rows = empty;
      q.empty_ratio = empty_ratio_of(empty, q.row_count);
      q.value_cardinality = distinct.size();
      q.unresolved_id_count = unresolved;
      q.last_updated = snapshot.day();
      manifest.labels.push_back(label->name);
      manifest.label_metrics[label->name] = q;
    }
  }
  std::sort(manifest.tables.begin(), manifest.tables.end());
  std::sort(manifest.labels.begin(), manifest.labels.end());

  output.tablets.resize(tablet_count);
  parallel_for(tablet_count, workers, [&](std::size_t t) {
    Tablet& tablet = output.tablets[t];
    tablet.tablet_id = static_cast<uint32_t>(t);
    tablet.tablet_count = tablet_count;
    tablet.build_day = snapshot.day();
    tablet.entries = std::move(merged[t]);
    tablet.seal();
  });
  return output;
}

void record_build(Catalog& catalog, const BuildOutput& output) {
  const std::string tablets = tablet_set_entity(output.day);
  catalog.register_node(tablets);
  for (const auto& table : output.manifest.tables) {
    catalog.add_edge(table_entity(table, output.day), tablets);
  }
  for (const auto& [label, metrics] : output.manifest.label_metrics) {
    catalog.record_metrics(label, metrics);
    const LabelMeta* meta = catalog.find_label(label);
    if (meta != nullptr && meta->state < LabelState::building) {
      catalog.advance_label(label, LabelState::building);
    }
    catalog.add_edge(label_entity(label), tablets);
  }
}

BuildOutput build_all(Catalog& catalog, std::span<const SourceTable> tables,
                      const IdSnapshot& snapshot, uint32_t tablet_count, unsigned workers) {
  BuildOutput output = build_tablets(catalog, tables, snapshot, tablet_count, workers);
  record_build(catalog, output);
  return output;
}

}  // namespace bitup
