#include "bitup/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <new>
#include <set>
#include <thread>

#include "bitup/bench.hpp"
#include "bitup/catalog.hpp"
#include "bitup/error.hpp"
#include "bitup/expr_parser.hpp"
#include "bitup/file_io.hpp"
#include "bitup/pipeline.hpp"
#include "bitup/query.hpp"

namespace bitup {
namespace fs = std::filesystem;

namespace {

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error:
    case ErrorCode::duplicate_name:
    case ErrorCode::dangling_column:
    case ErrorCode::unknown_entity:
      return exit_user_error;
    default:
      return exit_pipeline_failure;
  }
}

char parse_delimiter(const std::string& text) {
  if (text == "\\t" || text == "tab" || text == "\t") return '\t';
  if (text.size() != 1 || text == "\n" || text == "\r") {
    throw UserError("delimiter must be a single character or 'tab'");
  }
  return text[0];
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    if (comma > start) out.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

template <class T>
std::vector<T> split_numbers(const std::string& text, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw UserError(std::string("bad ") + what + " list: " + text);
    }
  }
  if (out.empty()) throw UserError(std::string("empty ") + what + " list");
  return out;
}

Day parse_day(const std::string& text) {
  try {
    return Day::parse(text);
  } catch (const Error& e) {
    throw UserError(e.what());
  }
}

std::string csv_field(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Globals {
  std::string store_root;
  uint32_t tablets = 6;
  uint32_t parallelism = 0;  // 0: machine default for builds, tablet count for queries
  uint64_t seed = 42;

  StoreLayout layout() const { return StoreLayout{store_root}; }
  PipelineOptions pipeline(uint64_t expected, uint64_t per_partition) const {
    PipelineOptions o;
    o.tablet_count = tablets;
    o.expected_ids = expected;
    o.ids_per_partition = per_partition;
    if (parallelism > 0) o.workers = parallelism;
    return o;
  }
};

// --- commands ---

struct IngestArgs {
  std::string file, table, id_column, labels, day, delimiter = "tab", upstream;
  std::vector<std::string> owners;
  int priority = 0;
  double max_empty_ratio = 0.5;
};

int cmd_ingest(const Globals& g, const IngestArgs& a, std::ostream& out) {
  if (!fs::is_regular_file(a.file)) throw UserError("cannot read input file " + a.file);
  IngestRequest req;
  req.source = a.file;
  req.table = a.table;
  req.id_column = a.id_column;
  req.label_columns = split_list(a.labels);
  req.day = parse_day(a.day);
  req.delimiter = parse_delimiter(a.delimiter);
  req.owners = a.owners;
  req.upstream_task = a.upstream;
  req.priority = a.priority;
  req.max_empty_ratio = a.max_empty_ratio;
  const StoreLayout layout = g.layout();
  Catalog catalog = Catalog::load(layout.catalog_path());
  const IngestResult r = ingest_table(catalog, layout, req);
  catalog.save(layout.catalog_path());
  out << "ingested " << r.table_entity << " rows=" << r.row_count << "\n";
  for (const auto& [label, empty] : r.empty_counts) {
    out << "  " << label << " empty=" << empty << "\n";
  }
  return exit_ok;
}

struct BuildArgs {
  std::string day;
  bool rebuild = false;
  uint64_t expected_ids = 1'000'000;
  uint64_t ids_per_partition = 100'000;
  uint32_t budget = 2;
};

int report_outcomes(const BuildReport& report, std::ostream& out, std::ostream& err) {
  for (const auto& o : report.outcomes) {
    out << "task #" << o.instance << " " << to_string(o.state);
    if (!o.error.empty()) out << ": " << o.error;
    out << "\n";
  }
  for (const auto& f : report.failures) err << "error: " << f << "\n";
  return report.failures.empty() ? exit_ok : exit_pipeline_failure;
}

int cmd_build(const Globals& g, const BuildArgs& a, std::ostream& out, std::ostream& err) {
  const Day day = parse_day(a.day);
  const BuildReport report = run_build(g.layout(), day, g.pipeline(a.expected_ids, a.ids_per_partition),
                                       a.budget, a.rebuild);
  if (report.nothing_to_do && report.failures.empty()) {
    out << "build " << day.to_string() << " is up to date\n";
    return exit_ok;
  }
  const int code = report_outcomes(report, out, err);
  if (code == exit_ok) out << "built " << day.to_string() << "\n";
  return code;
}

struct QueryArgs {
  std::string expr, day, mode = "count";
  bool timing = false;
};

int cmd_query(const Globals& g, const QueryArgs& a, std::ostream& out, std::ostream& err) {
  const Day day = parse_day(a.day);
  QueryExpr expr = [&] {
    try {
      return parse_expr(a.expr);
    } catch (const ParseError& e) {
      err << "error: " << e.what() << "\n" << caret_diagnostic(a.expr, e.column()) << "\n";
      throw UserError("");
    }
  }();
  const StoreLayout layout = g.layout();
  const FileTabletStore store(layout.root);
  const TabletListing listing = store.list_tablets(day);
  const uint32_t parallelism =
      g.parallelism > 0 ? g.parallelism : std::max<uint32_t>(listing.tablet_count, 1);

  const auto start = std::chrono::steady_clock::now();
  if (a.mode == "count") {
    const uint64_t count = query_count(store, day, expr, parallelism);
    out << count << "\n";
  } else {
    const IdSnapshot snapshot = IdSnapshot::load(layout.snapshot_path(day));
    for (const auto& id : query_members(store, day, expr, snapshot, parallelism)) out << id << "\n";
  }
  const double millis =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (a.timing) {
    out << csv_field(a.expr) << "," << expr.predicates().size() << "," << listing.tablet_count
        << "," << fixed(millis, 4) << "\n";
  }
  return exit_ok;
}

int cmd_stats(const Globals& g, const std::string& day_text, bool check_sla, std::ostream& out,
              std::ostream& err) {
  const Catalog catalog = Catalog::load(g.layout().catalog_path());
  std::optional<Day> day;
  if (!day_text.empty()) day = parse_day(day_text);
  for (const auto& [entity, t] : catalog.tables()) {
    if (day && t.day != *day) continue;
    out << "table " << entity << " rows=" << t.row_count
        << " ready=" << (t.readiness == Readiness::ready ? "yes" : "no") << "\n";
  }
  for (const auto& [name, l] : catalog.labels()) {
    out << "label " << name << " state=" << to_string(l.state) << " source=" << l.source_table
        << "." << l.source_column << " max_empty_ratio=" << fixed(l.max_empty_ratio, 4) << "\n";
    for (const auto& [d, m] : l.metrics) {
      if (day && d != *day) continue;
      out << "  " << d.to_string() << " rows=" << m.row_count << " empty=" << m.empty_rows
          << " empty_ratio=" << fixed(m.empty_ratio, 4) << " values=" << m.value_cardinality
          << " unresolved=" << m.unresolved_id_count << "\n";
    }
    out << "  sla=" << (catalog.sla_ok(name) ? "ok" : "violated") << "\n";
  }
  for (const auto& m : catalog.task_metrics()) {
    if (day && m.day != *day) continue;
    out << "task " << m.task << " " << m.outcome << " " << fixed(m.duration_ms, 3) << "ms\n";
  }
  if (check_sla) {
    const auto violations = catalog.sla_violations();
    for (const auto& v : violations) err << "sla violated: " << v << "\n";
    if (!violations.empty()) return exit_pipeline_failure;
  }
  return exit_ok;
}

int cmd_lineage(const Globals& g, const std::string& entity, std::ostream& out) {
  const Catalog catalog = Catalog::load(g.layout().catalog_path());
  const Lineage l = catalog.lineage(entity);
  out << "upstream:\n";
  for (const auto& e : l.upstream) out << "  " << e << "\n";
  out << "downstream:\n";
  for (const auto& e : l.downstream) out << "  " << e << "\n";
  return exit_ok;
}

struct ScheduleArgs {
  bool loop = false;
  double cycle_seconds = 60.0;
  uint32_t max_cycles = 0;  // 0: unbounded
  uint32_t budget = 2;
  uint64_t expected_ids = 1'000'000;
  uint64_t ids_per_partition = 100'000;
};

int cmd_schedule(const Globals& g, const ScheduleArgs& a, std::ostream& out, std::ostream& err) {
  const StoreLayout layout = g.layout();
  const PipelineOptions options = g.pipeline(a.expected_ids, a.ids_per_partition);
  bool failed = false;
  for (uint32_t cycle = 1;; ++cycle) {
    Catalog catalog = Catalog::load(layout.catalog_path());
    Scheduler scheduler = Scheduler::load(layout.tasks_path());
    std::set<Day> days;
    for (const auto& [entity, t] : catalog.tables()) days.insert(t.day);
    for (Day d : days) scheduler.check_cycle(catalog, d);
    PipelineExecutor executor(layout, options);
    const auto outcomes = scheduler.run_until_idle(catalog, executor, a.budget);
    catalog.save(layout.catalog_path());
    scheduler.save(layout.tasks_path());
    out << "cycle " << cycle << ": ran " << outcomes.size() << " task(s)\n";
    for (const auto& o : outcomes) {
      const TaskInstance& t = scheduler.instance(o.instance);
      out << "  " << t.entity() << " " << to_string(o.state) << "\n";
      if (o.state == TaskState::failed) {
        err << "error: " << t.entity() << ": " << o.error << "\n";
        failed = true;
      }
    }
    if (!a.loop || (a.max_cycles > 0 && cycle >= a.max_cycles)) break;
    std::this_thread::sleep_for(std::chrono::duration<double>(a.cycle_seconds));
  }
  return failed ? exit_pipeline_failure : exit_ok;
}

struct BenchArgs {
  std::string scales = "10000,100000,1000000";
  std::string labels = "1,2,3";
  uint32_t runs = 50;
  uint32_t values = 20;
  std::string out_file;
  std::string work_dir;
};

int cmd_bench(const Globals& g, const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchConfig config;
  config.scales = split_numbers<uint64_t>(a.scales, "scale");
  config.label_counts = split_numbers<uint32_t>(a.labels, "label count");
  config.tablet_count = g.tablets;
  config.parallelism = g.parallelism > 0 ? g.parallelism : g.tablets;
  config.runs = a.runs;
  config.values_per_label = a.values;
  config.seed = g.seed;
  config.work_dir = a.work_dir.empty() ? g.layout().root / "bench" : fs::path(a.work_dir);
  const std::string csv = bench_csv(run_bench(config, &err));
  if (a.out_file.empty()) {
    out << csv;
  } else {
    write_text_atomic(a.out_file, csv);
    out << "wrote " << a.out_file << "\n";
  }
  return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"bitup: bitmap user-profile store"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  if (const char* root = std::getenv("BITUP_STORE_ROOT")) g.store_root = root;
  if (g.store_root.empty()) g.store_root = "bitup-store";
  app.add_option("--store-root", g.store_root, "Store directory")->capture_default_str();
  app.add_option("--tablets", g.tablets, "Tablet count for builds and benches")
      ->check(CLI::Range(1u, 4096u))
      ->capture_default_str();
  app.add_option("--parallelism", g.parallelism, "Worker/slot count (0: default)");
  app.add_option("--seed", g.seed, "Bench corpus seed")->capture_default_str();

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Register and stage a delimited table");
  ingest_cmd->add_option("file", ingest.file, "Input file")->required();
  ingest_cmd->add_option("--table", ingest.table, "Table name")->required();
  ingest_cmd->add_option("--id-column", ingest.id_column, "External id column")->required();
  ingest_cmd->add_option("--labels", ingest.labels, "Comma-separated label columns (default: all)");
  ingest_cmd->add_option("--day", ingest.day, "Partition day YYYY-MM-DD")->required();
  ingest_cmd->add_option("--delimiter", ingest.delimiter, "Field delimiter")->capture_default_str();
  ingest_cmd->add_option("--owner", ingest.owners, "Owner (repeatable)");
  ingest_cmd->add_option("--upstream-task", ingest.upstream, "Producing task lineage id");
  ingest_cmd->add_option("--priority", ingest.priority, "Task priority");
  ingest_cmd->add_option("--max-empty-ratio", ingest.max_empty_ratio, "SLA bound for new labels")
      ->check(CLI::Range(0.0, 1.0));

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build", "Run id mapping and bitmap build for a day");
  build_cmd->add_option("--day", build.day, "Day YYYY-MM-DD")->required();
  build_cmd->add_flag("--rebuild", build.rebuild, "Rerun the day's tasks");
  build_cmd->add_option("--expected-ids", build.expected_ids, "Id space target for a first snapshot")
      ->check(CLI::PositiveNumber);
  build_cmd->add_option("--ids-per-partition", build.ids_per_partition)->check(CLI::PositiveNumber);
  build_cmd->add_option("--budget", build.budget, "Tasks per dispatch round")->check(CLI::PositiveNumber);

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Evaluate an expression for a day");
  query_cmd->add_option("expr", query.expr, "Expression, e.g. 'gender=male & age=15'")->required();
  query_cmd->add_option("--day", query.day, "Day YYYY-MM-DD")->required();
  query_cmd->add_option("--mode", query.mode)->check(CLI::IsMember({"count", "members"}));
  query_cmd->add_flag("--timing", query.timing, "Append a CSV timing row");

  std::string stats_day;
  bool check_sla = false;
  auto* stats_cmd = app.add_subcommand("stats", "Print catalog and quality metrics");
  stats_cmd->add_option("--day", stats_day, "Only this day");
  stats_cmd->add_flag("--check-sla", check_sla, "Exit 2 when any label violates its SLA");

  std::string entity;
  auto* lineage_cmd = app.add_subcommand("lineage", "Print upstream and downstream entities");
  lineage_cmd->add_option("entity", entity, "e.g. label:gender or table:users@2024-01-01")
      ->required();

  ScheduleArgs schedule;
  auto* schedule_cmd = app.add_subcommand("schedule", "Run the task checker and scheduler");
  schedule_cmd->add_flag("--loop", schedule.loop, "Keep cycling");
  schedule_cmd->add_option("--cycle-seconds", schedule.cycle_seconds)->check(CLI::NonNegativeNumber);
  schedule_cmd->add_option("--max-cycles", schedule.max_cycles, "Stop after N cycles (0: never)");
  schedule_cmd->add_option("--budget", schedule.budget)->check(CLI::PositiveNumber);
  schedule_cmd->add_option("--expected-ids", schedule.expected_ids)->check(CLI::PositiveNumber);
  schedule_cmd->add_option("--ids-per-partition", schedule.ids_per_partition)
      ->check(CLI::PositiveNumber);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Scaling benchmark, CSV output");
  bench_cmd->add_option("--scales", bench.scales, "Comma-separated row counts")->capture_default_str();
  bench_cmd->add_option("--labels", bench.labels, "Comma-separated predicate counts")
      ->capture_default_str();
  bench_cmd->add_option("--runs", bench.runs, "Timed runs per cell")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--values", bench.values, "Values per label")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", bench.out_file, "Write CSV here instead of stdout");
  bench_cmd->add_option("--work-dir", bench.work_dir, "Scratch store (default <root>/bench)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_user_error;
  }

  try {
    if (app.got_subcommand(ingest_cmd)) return cmd_ingest(g, ingest, out);
    if (app.got_subcommand(build_cmd)) return cmd_build(g, build, out, err);
    if (app.got_subcommand(query_cmd)) return cmd_query(g, query, out, err);
    if (app.got_subcommand(stats_cmd)) return cmd_stats(g, stats_day, check_sla, out, err);
    if (app.got_subcommand(lineage_cmd)) return cmd_lineage(g, entity, out);
    if (app.got_subcommand(schedule_cmd)) return cmd_schedule(g, schedule, out, err);
    if (app.got_subcommand(bench_cmd)) return cmd_bench(g, bench, out, err);
  } catch (const UserError& e) {
    if (*e.what() != '\0') err << "error: " << e.what() << "\n";
    return exit_user_error;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::bad_alloc&) {
    err << "error: resource exhaustion (out of memory)\n";
    return exit_pipeline_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_pipeline_failure;
  }
  return exit_user_error;
}

}  // namespace bitup
