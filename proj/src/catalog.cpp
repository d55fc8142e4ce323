#include "bitup/catalog.hpp"

#include <algorithm>
#include <deque>
#include <nlohmann/json.hpp>

#include "bitup/error.hpp"
#include "bitup/file_io.hpp"

namespace bitup {
using nlohmann::json;

std::string_view to_string(LabelState state) {
  switch (state) {
    case LabelState::registered: return "registered";
    case LabelState::mapping: return "mapping";
    case LabelState::building: return "building";
    case LabelState::serving: return "serving";
  }
  return "unknown";
}

namespace {

LabelState label_state_from(std::string_view s) {
  for (auto st : {LabelState::registered, LabelState::mapping, LabelState::building,
                  LabelState::serving}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::corruption, "catalog: unknown label state '" + std::string(s) + "'");
}

Error unknown(const std::string& what) { return Error(ErrorCode::unknown_entity, what); }

}  // namespace

std::string table_entity(std::string_view table, Day day) {
  return "table:" + std::string(table) + "@" + day.to_string();
}
std::string label_entity(std::string_view label) { return "label:" + std::string(label); }
std::string task_entity(std::string_view kind, Day day) {
  return "task:" + std::string(kind) + "@" + day.to_string();
}
std::string tablet_set_entity(Day day) { return "tablets@" + day.to_string(); }

const ColumnMeta& TableMeta::id_column() const {
  for (const auto& c : columns) {
    if (c.role == ColumnRole::id) return c;
  }
  throw Error(ErrorCode::invalid_argument, "table " + name + " has no id column");
}

const ColumnMeta* TableMeta::find_column(std::string_view column) const {
  for (const auto& c : columns) {
    if (c.name == column) return &c;
  }
  return nullptr;
}

const QualityMetrics* LabelMeta::latest_metrics() const {
  return metrics.empty() ? nullptr : &metrics.rbegin()->second;
}

std::string Catalog::register_table(TableMeta meta) {
  if (meta.name.empty()) throw Error(ErrorCode::invalid_argument, "table name is empty");
  const auto id_columns = std::count_if(meta.columns.begin(), meta.columns.end(),
                                        [](const ColumnMeta& c) { return c.role == ColumnRole::id; });
  if (id_columns != 1) {
    throw Error(ErrorCode::invalid_argument, "table " + meta.name + " needs exactly one id column");
  }
  for (std::size_t i = 0; i < meta.columns.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (meta.columns[i].name == meta.columns[j].name) {
        throw Error(ErrorCode::invalid_argument, "duplicate column " + meta.columns[i].name);
      }
    }
  }
  const std::string id = table_entity(meta.name, meta.day);
  if (tables_.contains(id)) {
    throw Error(ErrorCode::duplicate_name,
                "table " + meta.name + " already registered for " + meta.day.to_string());
  }
  nodes_.insert(id);
  if (!meta.upstream_task.empty()) {
    nodes_.insert(meta.upstream_task);
    edges_.emplace(meta.upstream_task, id);
  }
  tables_.emplace(id, std::move(meta));
  return id;
}

std::string Catalog::register_label(LabelMeta meta) {
  if (meta.name.empty()) throw Error(ErrorCode::invalid_argument, "label name is empty");
  if (labels_.contains(meta.name)) {
    throw Error(ErrorCode::duplicate_name, "label " + meta.name + " already registered");
  }
  std::vector<std::string> sources;
  for (const auto& [id, table] : tables_) {
    if (table.name != meta.source_table) continue;
    const ColumnMeta* col = table.find_column(meta.source_column);
    if (col == nullptr || col->role != ColumnRole::label_value) {
      throw Error(ErrorCode::dangling_column, "table " + meta.source_table +
                                                  " has no label column " + meta.source_column);
    }
    sources.push_back(id);
  }
  if (sources.empty()) {
    throw Error(ErrorCode::dangling_column, "label " + meta.name + " references unknown table " +
                                                meta.source_table);
  }
  const std::string id = label_entity(meta.name);
  nodes_.insert(id);
  for (const auto& s : sources) edges_.emplace(s, id);
  labels_.emplace(meta.name, std::move(meta));
  return id;
}

void Catalog::register_node(const std::string& entity) { nodes_.insert(entity); }

bool Catalog::reaches(const std::string& from, const std::string& to) const {
  std::deque<std::string> frontier{from};
  std::set<std::string> seen{from};
  while (!frontier.empty()) {
    std::string cur = std::move(frontier.front());
    frontier.pop_front();
    if (cur == to) return true;
    for (auto it = edges_.lower_bound({cur, ""}); it != edges_.end() && it->first == cur; ++it) {
      if (seen.insert(it->second).second) frontier.push_back(it->second);
    }
  }
  return false;
}

void Catalog::add_edge(const std::string& from, const std::string& to) {
  if (!nodes_.contains(from)) throw unknown("unknown lineage node " + from);
  if (!nodes_.contains(to)) throw unknown("unknown lineage node " + to);
  if (from == to || reaches(to, from)) {
    throw Error(ErrorCode::lineage_cycle, "edge " + from + " -> " + to + " would create a cycle");
  }
  edges_.emplace(from, to);
}

Lineage Catalog::lineage(const std::string& entity) const {
  if (!nodes_.contains(entity)) throw unknown("unknown entity " + entity);
  auto walk = [&](bool forward) {
    std::set<std::string> seen;
    std::deque<std::string> frontier{entity};
    while (!frontier.empty()) {
      std::string cur = std::move(frontier.front());
      frontier.pop_front();
      for (const auto& [a, b] : edges_) {
        const std::string& src = forward ? a : b;
        const std::string& dst = forward ? b : a;
        if (src == cur && seen.insert(dst).second) frontier.push_back(dst);
      }
    }
    return std::vector<std::string>(seen.begin(), seen.end());
  };
  return Lineage{walk(false), walk(true)};
}

TableMeta& Catalog::table_mut(std::string_view table, Day day) {
  auto it = tables_.find(table_entity(table, day));
  if (it == tables_.end()) {
    throw unknown("unknown table " + std::string(table) + " for " + day.to_string());
  }
  return it->second;
}

LabelMeta& Catalog::label_mut(std::string_view label) {
  auto it = labels_.find(std::string(label));
  if (it == labels_.end()) throw unknown("unknown label " + std::string(label));
  return it->second;
}

void Catalog::mark_ready(std::string_view table, Day day) {
  table_mut(table, day).readiness = Readiness::ready;
}

void Catalog::record_table_counts(std::string_view table, Day day, uint64_t row_count,
                                  std::map<std::string, uint64_t> empty_counts) {
  TableMeta& t = table_mut(table, day);
  t.row_count = row_count;
  t.empty_counts = std::move(empty_counts);
}

void Catalog::record_metrics(std::string_view label, const QualityMetrics& metrics) {
  label_mut(label).metrics[metrics.last_updated] = metrics;
}

void Catalog::record_task_metrics(TaskMetrics metrics) {
  if (!nodes_.contains(metrics.task)) throw unknown("unknown task " + metrics.task);
  task_metrics_.push_back(std::move(metrics));
}

void Catalog::advance_label(std::string_view label, LabelState state) {
  LabelMeta& l = label_mut(label);
  if (state < l.state) {
    throw Error(ErrorCode::lifecycle_violation,
                "label " + l.name + " cannot move from " + std::string(to_string(l.state)) +
                    " back to " + std::string(to_string(state)));
  }
  l.state = state;
}

bool Catalog::sla_ok(std::string_view label) const {
  const LabelMeta* l = find_label(label);
  if (l == nullptr) throw unknown("unknown label " + std::string(label));
  const QualityMetrics* m = l->latest_metrics();
  return m == nullptr || m->empty_ratio <= l->max_empty_ratio;
}

std::vector<std::string> Catalog::sla_violations() const {
  std::vector<std::string> out;
  for (const auto& [name, l] : labels_) {
    if (!sla_ok(name)) out.push_back(name);
  }
  return out;
}

const TableMeta* Catalog::find_table(std::string_view table, Day day) const {
  auto it = tables_.find(table_entity(table, day));
  return it == tables_.end() ? nullptr : &it->second;
}

const LabelMeta* Catalog::find_label(std::string_view label) const {
  auto it = labels_.find(std::string(label));
  return it == labels_.end() ? nullptr : &it->second;
}

std::vector<const TableMeta*> Catalog::tables_for_day(Day day) const {
  std::vector<const TableMeta*> out;
  for (const auto& [id, t] : tables_) {
    if (t.day == day) out.push_back(&t);
  }
  return out;
}

std::vector<const LabelMeta*> Catalog::labels_for_table(std::string_view table) const {
  std::vector<const LabelMeta*> out;
  for (const auto& [name, l] : labels_) {
    if (l.source_table == table) out.push_back(&l);
  }
  return out;
}

// --- persistence ---

namespace {

json metrics_json(const QualityMetrics& m) {
  return json{{"row_count", m.row_count},
              {"empty_rows", m.empty_rows},
              {"empty_ratio", m.empty_ratio},
              {"value_cardinality", m.value_cardinality},
              {"unresolved_id_count", m.unresolved_id_count},
              {"last_updated", m.last_updated.to_string()}};
}

QualityMetrics metrics_of(const json& j) {
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

std::string Catalog::to_json() const {
  json tables = json::array();
  for (const auto& [id, t] : tables_) {
    json cols = json::array();
    for (const auto& c : t.columns) {
      cols.push_back({{"name", c.name}, {"role", c.role == ColumnRole::id ? "id" : "label"}});
    }
    tables.push_back({{"name", t.name},
                      {"day", t.day.to_string()},
                      {"columns", cols},
                      {"upstream_task", t.upstream_task},
                      {"owners", t.owners},
                      {"ready", t.readiness == Readiness::ready},
                      {"priority", t.priority},
                      {"delimiter", std::string(1, t.delimiter)},
                      {"staged_path", t.staged_path},
                      {"row_count", t.row_count},
                      {"empty_counts", t.empty_counts}});
  }
  json labels = json::array();
  for (const auto& [name, l] : labels_) {
    json history = json::array();
    for (const auto& [day, m] : l.metrics) history.push_back(metrics_json(m));
    labels.push_back({{"name", l.name},
                      {"source_table", l.source_table},
                      {"source_column", l.source_column},
                      {"state", to_string(l.state)},
                      {"max_empty_ratio", l.max_empty_ratio},
                      {"metrics", history}});
  }
  json edges = json::array();
  for (const auto& [a, b] : edges_) edges.push_back(json::array({a, b}));
  json tasks = json::array();
  for (const auto& m : task_metrics_) {
    tasks.push_back({{"task", m.task},
                     {"day", m.day.to_string()},
                     {"duration_ms", m.duration_ms},
                     {"outcome", m.outcome}});
  }
  json doc{{"version", 1},     {"tables", tables}, {"labels", labels},
           {"nodes", nodes_},  {"edges", edges},   {"task_metrics", tasks}};
  return doc.dump(2) + "\n";
}

Catalog Catalog::from_json(std::string_view text) {
  try {
    json doc = json::parse(text);
    Catalog c;
    for (const auto& t : doc.at("tables")) {
      TableMeta m;
      m.name = t.at("name").get<std::string>();
      m.day = Day::parse(t.at("day").get<std::string>());
      for (const auto& col : t.at("columns")) {
        m.columns.push_back({col.at("name").get<std::string>(),
                             col.at("role").get<std::string>() == "id" ? ColumnRole::id
                                                                      : ColumnRole::label_value});
      }
      m.upstream_task = t.at("upstream_task").get<std::string>();
      m.owners = t.at("owners").get<std::vector<std::string>>();
      m.readiness = t.at("ready").get<bool>() ? Readiness::ready : Readiness::pending;
      m.priority = t.at("priority").get<int>();
      const auto delim = t.at("delimiter").get<std::string>();
      m.delimiter = delim.empty() ? '\t' : delim[0];
      m.staged_path = t.at("staged_path").get<std::string>();
      m.row_count = t.at("row_count").get<uint64_t>();
      m.empty_counts = t.at("empty_counts").get<std::map<std::string, uint64_t>>();
      c.tables_.emplace(table_entity(m.name, m.day), std::move(m));
    }
    for (const auto& l : doc.at("labels")) {
      LabelMeta m;
      m.name = l.at("name").get<std::string>();
      m.source_table = l.at("source_table").get<std::string>();
      m.source_column = l.at("source_column").get<std::string>();
      m.state = label_state_from(l.at("state").get<std::string>());
      m.max_empty_ratio = l.at("max_empty_ratio").get<double>();
      for (const auto& q : l.at("metrics")) {
        auto metrics = metrics_of(q);
        m.metrics.emplace(metrics.last_updated, metrics);
      }
      c.labels_.emplace(m.name, std::move(m));
    }
    c.nodes_ = doc.at("nodes").get<std::set<std::string>>();
    for (const auto& e : doc.at("edges")) {
      c.edges_.emplace(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    for (const auto& t : doc.at("task_metrics")) {
      c.task_metrics_.push_back({t.at("task").get<std::string>(),
                                 Day::parse(t.at("day").get<std::string>()),
                                 t.at("duration_ms").get<double>(),
                                 t.at("outcome").get<std::string>()});
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corruption, std::string("catalog: ") + e.what());
  }
}

void Catalog::save(const std::filesystem::path& path) const { write_text_atomic(path, to_json()); }

Catalog Catalog::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return Catalog{};
  return from_json(read_text_file(path));
}

}  // namespace bitup
