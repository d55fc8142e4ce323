#include "bitup/pipeline.hpp"

#include <algorithm>

#include "bitup/delimited_table.hpp"
#include "bitup/error.hpp"
#include "bitup/file_io.hpp"

namespace bitup {
namespace fs = std::filesystem;

namespace {

void promote(Catalog& catalog, const std::string& label, LabelState state) {
  const LabelMeta* meta = catalog.find_label(label);
  if (meta != nullptr && meta->state < state) catalog.advance_label(label, state);
}

}  // namespace

std::optional<Day> latest_snapshot_before(const StoreLayout& layout, Day day) {
  std::optional<Day> best;
  std::error_code ec;
  if (!fs::is_directory(layout.snapshots_dir(), ec)) return best;
  for (const auto& entry : fs::directory_iterator(layout.snapshots_dir())) {
    const fs::path& p = entry.path();
    if (p.extension() != ".bups") continue;
    Day d;
    try {
      d = Day::parse(p.stem().string());
    } catch (const Error&) {
      continue;
    }
    if (d < day && (!best || *best < d)) best = d;
  }
  return best;
}

IngestResult ingest_table(Catalog& catalog, const StoreLayout& layout, const IngestRequest& req) {
  const std::string text = read_text_file(req.source);
  DelimitedTable data = parse_delimited(text, req.delimiter);
  data.require_column(req.id_column);
  require_ids(data, req.id_column);

  std::vector<std::string> labels = req.label_columns;
  if (labels.empty()) {
    for (const auto& h : data.header) {
      if (h != req.id_column) labels.push_back(h);
    }
  }

  TableMeta meta;
  meta.name = req.table;
  meta.day = req.day;
  meta.upstream_task = req.upstream_task;
  meta.owners = req.owners;
  meta.priority = req.priority;
  meta.delimiter = req.delimiter;
  meta.columns.push_back({req.id_column, ColumnRole::id});
  for (const auto& l : labels) {
    if (l == req.id_column) {
      throw Error(ErrorCode::invalid_argument, "id column cannot also be a label column");
    }
    if (!data.column_index(l)) {
      throw Error(ErrorCode::dangling_column, "label column '" + l + "' not in " +
                                                  req.source.string());
    }
    meta.columns.push_back({l, ColumnRole::label_value});
  }

  IngestResult result;
  result.row_count = data.rows.size();
  for (const auto& l : labels) {
    const std::size_t col = *data.column_index(l);
    uint64_t empty = 0;
    for (const auto& row : data.rows) empty += canonical_value(row[col]).empty() ? 1 : 0;
    result.empty_counts[l] = empty;
  }
  meta.row_count = result.row_count;
  meta.empty_counts = result.empty_counts;
  const fs::path staged = fs::path("staging") / req.day.to_string() / (req.table + ".tsv");
  meta.staged_path = staged.generic_string();

  // Validate label registrations before touching the catalog or disk.
  for (const auto& l : labels) {
    if (const LabelMeta* existing = catalog.find_label(l)) {
      if (existing->source_table != req.table || existing->source_column != l) {
        throw Error(ErrorCode::duplicate_name, "label " + l + " is already sourced from " +
                                                   existing->source_table + "." +
                                                   existing->source_column);
      }
    }
  }
  result.table_entity = catalog.register_table(meta);
  write_text_atomic(layout.root / staged, text);
  for (const auto& l : labels) {
    if (catalog.find_label(l) == nullptr) {
      LabelMeta label;
      label.name = l;
      label.source_table = req.table;
      label.source_column = l;
      label.max_empty_ratio = req.max_empty_ratio;
      catalog.register_label(std::move(label));
    } else {
      catalog.add_edge(result.table_entity, label_entity(l));
    }
  }
  catalog.mark_ready(req.table, req.day);
  return result;
}

std::vector<SourceTable> load_tables(const Catalog& catalog, const StoreLayout& layout, Day day) {
  std::vector<SourceTable> out;
  for (const TableMeta* meta : catalog.tables_for_day(day)) {
    out.push_back(SourceTable{meta->name, day,
                              read_delimited(layout.root / meta->staged_path, meta->delimiter)});
  }
  return out;
}

TaskResult PipelineExecutor::execute(const TaskInstance& task, const Catalog& catalog) {
  return task.kind == TaskKind::id_mapping ? run_id_mapping(task, catalog)
                                           : run_bitmap_build(task, catalog);
}

TaskResult PipelineExecutor::run_id_mapping(const TaskInstance& task, const Catalog& catalog) {
  const auto tables = load_tables(catalog, layout_, task.day);
  std::vector<std::string> ids;
  for (const auto& t : tables) {
    const TableMeta* meta = catalog.find_table(t.name, t.day);
    const std::size_t col = t.data.require_column(meta->id_column().name);
    for (const auto& row : t.data.rows) ids.push_back(row[col]);
  }

  std::optional<IdSnapshot> previous;
  if (auto prev_day = latest_snapshot_before(layout_, task.day)) {
    previous = IdSnapshot::load(layout_.snapshot_path(*prev_day));
  }
  const PartitionPlan plan = previous ? previous->plan()
                                      : plan_partitions(options_.expected_ids,
                                                        options_.ids_per_partition);
  const uint64_t seed = previous ? previous->hash_seed() : kIdPartitionSeed;
  IdSnapshot snapshot = assign_day(previous ? &*previous : nullptr, task.day, ids, plan, seed);
  snapshot.save(layout_.snapshot_path(task.day));

  TaskResult result;
  std::vector<std::string> table_names;
  for (const auto& t : tables) table_names.push_back(t.name);
  result.catalog_updates.push_back([names = table_names, day = task.day,
                                    entity = task.entity()](Catalog& c) {
    for (const auto& n : names) {
      c.add_edge(table_entity(n, day), entity);
      for (const LabelMeta* l : c.labels_for_table(n)) promote(c, l->name, LabelState::mapping);
    }
  });
  return result;
}

TaskResult PipelineExecutor::run_bitmap_build(const TaskInstance& task, const Catalog& catalog) {
  const fs::path snapshot_file = layout_.snapshot_path(task.day);
  if (!fs::exists(snapshot_file)) {
    throw Error(ErrorCode::not_ready, "no id snapshot for " + task.day.to_string());
  }
  const IdSnapshot snapshot = IdSnapshot::load(snapshot_file);
  const auto tables = load_tables(catalog, layout_, task.day);
  BuildOutput output =
      build_tablets(catalog, tables, snapshot, options_.tablet_count, options_.workers);

  FileTabletStore store(layout_.root);
  std::error_code ec;
  if (fs::is_directory(store.day_dir(task.day), ec)) {
    for (const auto& entry : fs::directory_iterator(store.day_dir(task.day))) {
      const std::string name = entry.path().filename().string();
      if (!name.starts_with("tablet_") || entry.path().extension() != ".bupt") continue;
      const std::string digits = entry.path().stem().string().substr(7);
      if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit) ||
          std::stoull(digits) >= options_.tablet_count) {
        fs::remove(entry.path());
      }
    }
  }
  for (const Tablet& t : output.tablets) store.sink_tablet(t, true);
  store.write_manifest(output.manifest);

  TaskResult result;
  BuildOutput summary{output.day, {}, output.manifest};
  result.catalog_updates.push_back([summary, entity = task.entity(), day = task.day](Catalog& c) {
    record_build(c, summary);
    c.add_edge(entity, tablet_set_entity(day));
    const std::string mapping = task_entity(to_string(TaskKind::id_mapping), day);
    if (c.has_entity(mapping)) c.add_edge(mapping, entity);
    for (const auto& label : summary.manifest.labels) {
      c.add_edge(entity, label_entity(label));
      promote(c, label, LabelState::serving);
    }
  });
  return result;
}

BuildReport run_build(const StoreLayout& layout, Day day, const PipelineOptions& options,
                      uint32_t budget, bool rebuild) {
  Catalog catalog = Catalog::load(layout.catalog_path());
  Scheduler scheduler = Scheduler::load(layout.tasks_path());
  const auto tables = catalog.tables_for_day(day);
  if (std::none_of(tables.begin(), tables.end(),
                   [](const TableMeta* t) { return t->readiness == Readiness::ready; })) {
    throw Error(ErrorCode::nothing_to_build, "nothing to build for " + day.to_string());
  }
  if (rebuild) scheduler.reset_day(day);
  scheduler.check_cycle(catalog, day);

  BuildReport report;
  PipelineExecutor executor(layout, options);
  report.outcomes = scheduler.run_until_idle(catalog, executor, budget);
  report.nothing_to_do = report.outcomes.empty();
  for (const auto& t : scheduler.instances()) {
    if (t.day == day && t.state == TaskState::failed) {
      report.failures.push_back(t.entity() + ": " + t.last_error);
    } else if (t.day == day && t.state != TaskState::done && report.outcomes.empty()) {
      report.failures.push_back(t.entity() + " is " + std::string(to_string(t.state)));
    }
  }
  catalog.save(layout.catalog_path());
  scheduler.save(layout.tasks_path());
  return report;
}

}  // namespace bitup
