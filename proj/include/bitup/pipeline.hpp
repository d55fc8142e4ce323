#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bitup/builder.hpp"
#include "bitup/catalog.hpp"
#include "bitup/id_gen.hpp"
#include "bitup/parallel.hpp"
#include "bitup/scheduler.hpp"
#include "bitup/tablet_store.hpp"

namespace bitup {

/// Everything lives under one root:
///   catalog.json, tasks.json
///   staging/<day>/<table>.tsv     ingested source rows
///   snapshots/<day>.bups          id snapshots
///   <day>/tablet_<id>.bupt        tablets, plus <day>/manifest.json
struct StoreLayout {
  std::filesystem::path root;

  std::filesystem::path catalog_path() const { return root / "catalog.json"; }
  std::filesystem::path tasks_path() const { return root / "tasks.json"; }
  std::filesystem::path snapshots_dir() const { return root / "snapshots"; }
  std::filesystem::path snapshot_path(Day day) const {
    return snapshots_dir() / (day.to_string() + ".bups");
  }
  std::filesystem::path staging_dir(Day day) const { return root / "staging" / day.to_string(); }
};

/// Latest snapshot strictly before `day`, if any.
std::optional<Day> latest_snapshot_before(const StoreLayout& layout, Day day);

struct IngestRequest {
  std::filesystem::path source;
  std::string table;
  std::string id_column;
  std::vector<std::string> label_columns;  // empty: every non-id column
  Day day;
  char delimiter = '\t';
  std::vector<std::string> owners;
  std::string upstream_task;
  int priority = 0;
  double max_empty_ratio = 0.5;
};

struct IngestResult {
  std::string table_entity;
  uint64_t row_count = 0;
  std::map<std::string, uint64_t> empty_counts;
};

/// Parses and stages a source table, registers it and its labels, records
/// per-column empty counts, and marks it ready.
IngestResult ingest_table(Catalog& catalog, const StoreLayout& layout, const IngestRequest& request);

/// Staged rows of every table registered for the day.
std::vector<SourceTable> load_tables(const Catalog& catalog, const StoreLayout& layout, Day day);

struct PipelineOptions {
  uint32_t tablet_count = 6;
  /// Partition plan for the first snapshot; later days reuse the stored plan.
  uint64_t expected_ids = 1'000'000;
  uint64_t ids_per_partition = 100'000;
  unsigned workers = default_workers();
};

/// In-process execution platform: id-mapping writes the day's snapshot,
/// bitmap-build writes the day's tablets and manifest.
class PipelineExecutor final : public TaskExecutor {
 public:
  PipelineExecutor(StoreLayout layout, PipelineOptions options)
      : layout_(std::move(layout)), options_(options) {}

  TaskResult execute(const TaskInstance& task, const Catalog& catalog) override;

 private:
  TaskResult run_id_mapping(const TaskInstance& task, const Catalog& catalog);
  TaskResult run_bitmap_build(const TaskInstance& task, const Catalog& catalog);

  StoreLayout layout_;
  PipelineOptions options_;
};

struct BuildReport {
  std::vector<DispatchOutcome> outcomes;
  bool nothing_to_do = false;  // the day's tasks were already done
  std::vector<std::string> failures;
};

/// One checker cycle plus dispatch rounds until idle, persisting catalog and
/// task state. `rebuild` forgets the day's finished tasks first. Throws
/// nothing_to_build when the day has no ready table.
BuildReport run_build(const StoreLayout& layout, Day day, const PipelineOptions& options,
                      uint32_t budget, bool rebuild);

}  // namespace bitup
