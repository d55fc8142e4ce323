#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bitup/day.hpp"
#include "bitup/metrics.hpp"

namespace bitup {

enum class ColumnRole { id, label_value };
enum class Readiness { pending, ready };
enum class LabelState { registered, mapping, building, serving };

std::string_view to_string(LabelState state);

struct ColumnMeta {
  std::string name;
  ColumnRole role = ColumnRole::label_value;
  friend bool operator==(const ColumnMeta&, const ColumnMeta&) = default;
};

struct TableMeta {
  std::string name;
  Day day;
  std::vector<ColumnMeta> columns;
  std::string upstream_task;  // lineage node id, or empty
  std::vector<std::string> owners;
  Readiness readiness = Readiness::pending;
  int priority = 0;
  char delimiter = '\t';
  std::string staged_path;  // relative to the store root
  uint64_t row_count = 0;
  std::map<std::string, uint64_t> empty_counts;  // per label-value column

  const ColumnMeta& id_column() const;
  const ColumnMeta* find_column(std::string_view column) const;
  friend bool operator==(const TableMeta&, const TableMeta&) = default;
};

struct LabelMeta {
  std::string name;
  std::string source_table;
  std::string source_column;
  LabelState state = LabelState::registered;
  double max_empty_ratio = 0.5;
  std::map<Day, QualityMetrics> metrics;

  const QualityMetrics* latest_metrics() const;
  friend bool operator==(const LabelMeta&, const LabelMeta&) = default;
};

struct TaskMetrics {
  std::string task;
  Day day;
  double duration_ms = 0.0;
  std::string outcome;
  friend bool operator==(const TaskMetrics&, const TaskMetrics&) = default;
};

struct Lineage {
  std::vector<std::string> upstream;    // sorted
  std::vector<std::string> downstream;  // sorted
};

// Lineage node ids. Every entity in the relation model is one of these.
std::string table_entity(std::string_view table, Day day);
std::string label_entity(std::string_view label);
std::string task_entity(std::string_view kind, Day day);
std::string tablet_set_entity(Day day);

/// The meta manager: registered tables and labels, a lineage DAG over tasks,
/// tables, labels and tablet sets, readiness, and quality metrics.
/// Single writer; persisted as one JSON document.
class Catalog {
 public:
  std::string register_table(TableMeta meta);
  std::string register_label(LabelMeta meta);
  /// Adds a node for a task or tablet set; a no-op when it already exists.
  void register_node(const std::string& entity);
  /// Adds a lineage edge. Rejects edges that would close a cycle.
  void add_edge(const std::string& from, const std::string& to);

  Lineage lineage(const std::string& entity) const;
  bool has_entity(const std::string& entity) const { return nodes_.contains(entity); }

  void mark_ready(std::string_view table, Day day);
  void record_table_counts(std::string_view table, Day day, uint64_t row_count,
                           std::map<std::string, uint64_t> empty_counts);
  void record_metrics(std::string_view label, const QualityMetrics& metrics);
  void record_task_metrics(TaskMetrics metrics);
  /// Moves a label forward in its lifecycle; moving backward is an error,
  /// staying put is a no-op.
  void advance_label(std::string_view label, LabelState state);

  /// SLA holds when the latest metrics satisfy the label's empty-ratio bound.
  /// A label with no metrics yet is not in violation.
  bool sla_ok(std::string_view label) const;
  std::vector<std::string> sla_violations() const;

  const TableMeta* find_table(std::string_view table, Day day) const;
  const LabelMeta* find_label(std::string_view label) const;
  std::vector<const TableMeta*> tables_for_day(Day day) const;
  std::vector<const LabelMeta*> labels_for_table(std::string_view table) const;
  const std::map<std::string, TableMeta>& tables() const noexcept { return tables_; }
  const std::map<std::string, LabelMeta>& labels() const noexcept { return labels_; }
  const std::vector<TaskMetrics>& task_metrics() const noexcept { return task_metrics_; }

  std::string to_json() const;
  static Catalog from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  /// Missing file loads as an empty catalog.
  static Catalog load(const std::filesystem::path& path);

  friend bool operator==(const Catalog&, const Catalog&) = default;

 private:
  TableMeta& table_mut(std::string_view table, Day day);
  LabelMeta& label_mut(std::string_view label);
  bool reaches(const std::string& from, const std::string& to) const;

  std::map<std::string, TableMeta> tables_;  // keyed by table_entity
  std::map<std::string, LabelMeta> labels_;  // keyed by label name
  std::set<std::string> nodes_;
  std::set<std::pair<std::string, std::string>> edges_;
  std::vector<TaskMetrics> task_metrics_;
};

}  // namespace bitup
