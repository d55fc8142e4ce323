#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitup/bitmap_pair.hpp"
#include "bitup/catalog.hpp"
#include "bitup/delimited_table.hpp"
#include "bitup/id_gen.hpp"
#include "bitup/parallel.hpp"
#include "bitup/tablet_store.hpp"

namespace bitup {

/// One (uid, label, value) fact after id mapping.
struct LabelRow {
  uint64_t uid = 0;
  std::string label;
  std::string value;
};

/// Values compare as exact strings after trimming surrounding whitespace.
std::string_view canonical_value(std::string_view raw) noexcept;

/// Groups a label's rows by value and shards every uid into its tablet,
/// splitting into low/high segments. Returns one entry map per tablet.
/// Empty values are skipped. Throws out_of_range (with the row index) for a
/// uid outside the plan's id space.
std::vector<TabletEntries> build_label(std::span<const LabelRow> rows, std::string_view label,
                                       const PartitionPlan& plan, uint32_t tablet_count,
                                       unsigned workers = default_workers());

/// A catalog-registered table together with its staged rows.
struct SourceTable {
  std::string name;
  Day day;
  DelimitedTable data;
};

struct BuildOutput {
  Day day;
  std::vector<Tablet> tablets;  // sealed, index == tablet_id
  Manifest manifest;
};

/// Resolves ids through the snapshot, builds every registered label of every
/// table, and seals one tablet per index. Unresolvable ids are skipped and
/// counted. Throws not_ready when a table is not marked ready.
BuildOutput build_tablets(const Catalog& catalog, std::span<const SourceTable> tables,
                          const IdSnapshot& snapshot, uint32_t tablet_count,
                          unsigned workers = default_workers());

/// Records a build's quality metrics and lineage edges in the catalog.
void record_build(Catalog& catalog, const BuildOutput& output);

/// build_tablets followed by record_build.
BuildOutput build_all(Catalog& catalog, std::span<const SourceTable> tables,
                      const IdSnapshot& snapshot, uint32_t tablet_count,
                      unsigned workers = default_workers());

}  // namespace bitup
