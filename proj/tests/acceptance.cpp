// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "bitup/bench.hpp"
#include "bitup/error.hpp"
#include "bitup/file_io.hpp"
#include "bitup/pipeline.hpp"
#include "bitup/query.hpp"
#include "support.hpp"

using namespace bitup;
using test::TempDir;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const Day kDay = Day::parse("2024-01-01");

QueryExpr P(const std::string& l, const std::string& v) { return QueryExpr::predicate(l, v); }

std::vector<std::string> external_members(const std::vector<OpenTablet>& tablets,
                                          const IdSnapshot& snap, const std::string& label,
                                          const std::string& value) {
  std::vector<std::string> out;
  for (const auto& t : tablets) {
    if (auto pair = t.get_bitmap(label, value)) {
      for (uint64_t uid : pair->to_uids()) out.emplace_back(*snap.reverse_lookup(uid));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// 1. Wide table in, per-(label, value) bitmaps out.
Verdict table_fidelity() {
  TempDir dir;
  const StoreLayout layout{dir / "store"};
  test::write_text(dir / "t1.tsv", "user id\tage\tgender\nsam\t15\tmale\nalex\t29\tmale\n");
  Catalog catalog;
  IngestRequest req;
  req.source = dir / "t1.tsv";
  req.table = "profile";
  req.id_column = "user id";
  req.day = kDay;
  ingest_table(catalog, layout, req);
  catalog.save(layout.catalog_path());
  const BuildReport report = run_build(layout, kDay, PipelineOptions{}, 2, false);
  if (!report.failures.empty()) return {false, report.failures.front()};

  const FileTabletStore store(layout.root);
  const OpenTabletSet set = OpenTabletSet::open(store, kDay);
  const IdSnapshot snap = IdSnapshot::load(layout.snapshot_path(kDay));
  const std::map<LabelValueKey, std::vector<std::string>> want{
      {{"age", "15"}, {"sam"}}, {{"age", "29"}, {"alex"}}, {{"gender", "male"}, {"alex", "sam"}}};
  std::set<LabelValueKey> keys;
  for (const auto& t : set.tablets()) {
    for (const auto& k : t.keys()) keys.insert(k);
  }
  if (keys.size() != want.size()) return {false, "unexpected (label, value) count " + std::to_string(keys.size())};
  for (const auto& [key, ids] : want) {
    if (external_members(set.tablets(), snap, key.label, key.value) != ids) {
      return {false, key.label + "=" + key.value + " membership differs"};
    }
  }
  return {true, "age=15->{sam}, age=29->{alex}, gender=male->{sam,alex}"};
}

// 2. Six tablets with contrived partial counts sum to 126.
Verdict scatter_gather() {
  TempDir dir;
  FileTabletStore store(dir.path());
  const std::vector<uint64_t> counts{10, 20, 30, 11, 22, 33};
  for (uint32_t id = 0; id < 6; ++id) {
    Tablet t;
    t.tablet_id = id;
    t.tablet_count = 6;
    t.build_day = kDay;
    BitmapPair& male = t.entries[{"gender", "male"}];
    BitmapPair& female = t.entries[{"gender", "female"}];
    for (uint64_t u = 0; male.cardinality() < counts[id]; ++u) {
      if (tablet_of(u, 6) == id) male.add(u);
    }
    for (uint64_t u = 1'000'000; female.cardinality() < 5; ++u) {
      if (tablet_of(u, 6) == id) female.add(u);
    }
    t.seal();
    store.sink_tablet(t, false);
  }
  const OpenTabletSet set = OpenTabletSet::open(store, kDay);
  const auto partials = scatter(set, P("gender", "male"), 6, false);
  std::string shape;
  for (std::size_t i = 0; i < partials.size(); ++i) {
    if (partials[i].count != counts[i]) return {false, "tablet " + std::to_string(i) + " partial differs"};
    shape += (i ? "+" : "") + std::to_string(partials[i].count);
  }
  const uint64_t total = gather_count(partials);
  const uint64_t store_total = query_count(store, kDay, P("gender", "male"), 4);
  return {total == 126 && store_total == 126, shape + " = " + std::to_string(total)};
}

struct OracleStats {
  std::size_t corpora = 0;
  std::size_t expressions = 0;
  std::size_t member_checks = 0;
  std::size_t high_uids = 0;
  std::string failure;
  bool parallel_ok = true;
  std::string parallel_failure;
};

// Shared body of criteria 3, 5 and 6.
void run_oracle_corpus(std::mt19937_64& rng, const test::Corpus& c, uint32_t tablets,
                       std::optional<PartitionPlan> plan, std::vector<uint64_t> preseed,
                       std::size_t expressions, OracleStats& stats) {
  TempDir dir;
  const auto built = test::build_corpus(c, dir.path(), kDay, tablets, plan, std::move(preseed));
  for (const auto& [e, uid] : built.snapshot.sorted_records()) {
    if (uid >= kSegmentSpan) ++stats.high_uids;
    (void)e;
  }
  const test::Oracle oracle(c);
  const test::ExprGen gen(c, 4, 6);
  ++stats.corpora;
  for (std::size_t i = 0; i < expressions && stats.failure.empty(); ++i) {
    const QueryExpr e = gen(rng);
    const test::RowSet want = oracle.eval(e);
    const BitmapPair at_full = query_member_ids(built.tablets, e, tablets);
    if (at_full.cardinality() != want.size() ||
        query_count(built.tablets, e, tablets) != want.size()) {
      stats.failure = "count mismatch for " + e.to_string();
      break;
    }
    if (!oracle.members_match(want, query_members(built.tablets, e, built.snapshot, tablets))) {
      stats.failure = "member mismatch for " + e.to_string();
      break;
    }
    ++stats.member_checks;
    for (uint32_t par : {1u, 2u}) {
      if (query_member_ids(built.tablets, e, par) != at_full ||
          query_count(built.tablets, e, par) != want.size()) {
        stats.parallel_ok = false;
        stats.parallel_failure = "parallelism " + std::to_string(par) + " differs for " + e.to_string();
      }
    }
    ++stats.expressions;
  }
}

OracleStats g_random_corpora;
double g_random_corpora_seconds = 0;

// 3 and 6. Twenty random corpora, 1000 expressions each.
Verdict oracle_equivalence() {
  std::mt19937_64 rng(20240101);
  const auto start = Clock::now();
  const uint32_t tablet_counts[] = {1, 4, 6};
  for (int i = 0; i < 20 && g_random_corpora.failure.empty(); ++i) {
    const double exponent = std::uniform_real_distribution<double>(4.0, 5.0)(rng);
    const std::size_t rows = static_cast<std::size_t>(std::pow(10.0, exponent));
    const std::size_t labels = 3 + rng() % 6;
    const test::Corpus c = test::random_corpus(rng, rows, labels, 2, 50);
    run_oracle_corpus(rng, c, tablet_counts[i % 3], std::nullopt, {}, 1000, g_random_corpora);
  }
  g_random_corpora_seconds = seconds_since(start);
  const auto& s = g_random_corpora;
  const bool pass = s.failure.empty() && s.corpora == 20 && s.expressions == 20000 &&
                    g_random_corpora_seconds < 600.0;
  return {pass, s.failure.empty()
                    ? std::to_string(s.corpora) + " corpora x 1000 expressions, counts and members exact, " +
                          fmt(g_random_corpora_seconds, 1) + "s"
                    : s.failure};
}

Verdict parallelism_invariance() {
  const auto& s = g_random_corpora;
  if (s.expressions == 0) return {false, "criterion 3 did not run"};
  if (!s.parallel_ok) return {false, s.parallel_failure};
  return {s.expressions == 20000,
          std::to_string(s.expressions) + " expressions identical at parallelism 1, 2, tablet_count"};
}

// 4. Five days, 20% new users per day.
Verdict id_stability() {
  TempDir dir;
  const StoreLayout layout{dir / "store"};
  std::mt19937_64 rng(44);
  std::vector<std::string> population;
  for (int i = 0; i < 10000; ++i) population.push_back("dev-" + std::to_string(rng()));
  std::map<std::string, uint64_t> first_seen;
  PipelineOptions options;
  options.expected_ids = 40000;
  options.ids_per_partition = 4000;
  for (int d = 0; d < 5; ++d) {
    const Day day = kDay.plus_days(d);
    if (d > 0) {
      const std::size_t fresh = population.size() / 5;
      for (std::size_t i = 0; i < fresh; ++i) population.push_back("dev-" + std::to_string(rng()));
    }
    // Most of the population shows up; absent users must keep their ids too.
    std::string text = "device\tsegment\n";
    for (const auto& id : population) {
      if (rng() % 10 != 0) text += id + "\ts" + std::to_string(rng() % 7) + "\n";
    }
    test::write_text(dir / "in.tsv", text);
    Catalog catalog = Catalog::load(layout.catalog_path());
    IngestRequest req;
    req.source = dir / "in.tsv";
    req.table = "devices";
    req.id_column = "device";
    req.day = day;
    ingest_table(catalog, layout, req);
    catalog.save(layout.catalog_path());
    const BuildReport report = run_build(layout, day, options, 2, false);
    if (!report.failures.empty()) return {false, report.failures.front()};

    const IdSnapshot snap = IdSnapshot::load(layout.snapshot_path(day));
    std::set<uint64_t> numeric;
    for (const auto& [external, id] : snap.sorted_records()) {
      if (!numeric.insert(id).second) return {false, "duplicate numeric id " + std::to_string(id)};
      auto [it, inserted] = first_seen.emplace(external, id);
      if (!inserted && it->second != id) return {false, external + " changed id on day " + std::to_string(d + 1)};
    }
    if (snap.size() != first_seen.size()) return {false, "snapshot dropped ids"};
  }
  return {true, std::to_string(first_seen.size()) + " ids over 5 days, none moved, none duplicated"};
}

// 5. Uids straddling 2^32.
Verdict high_segment() {
  std::mt19937_64 rng(55);
  OracleStats stats;
  const PartitionPlan plan{4, uint64_t{1} << 31};
  const uint32_t tablet_counts[] = {1, 4, 6};
  for (int i = 0; i < 6 && stats.failure.empty(); ++i) {
    const std::size_t rows = 10000 + rng() % 20000;
    const test::Corpus c = test::random_corpus(rng, rows, 3 + rng() % 4, 2, 30);
    // Partitions 1 and 3 sit at the top of their ranges, just under 2^32 and 2^33.
    const uint64_t room = rows;
    const std::vector<uint64_t> preseed{0, plan.per_partition_capacity - room, 0,
                                        plan.per_partition_capacity - room};
    run_oracle_corpus(rng, c, tablet_counts[i % 3], plan, preseed, 1000, stats);
  }
  const bool pass = stats.failure.empty() && stats.parallel_ok && stats.high_uids > 0 &&
                    stats.expressions == 6000;
  return {pass, stats.failure.empty() ? std::to_string(stats.expressions) + " expressions exact, " +
                                            std::to_string(stats.high_uids) + " uids >= 2^32"
                                      : stats.failure};
}

std::vector<BenchRow> g_bench;

const BenchRow* bench_row(uint64_t scale, uint32_t labels) {
  for (const auto& r : g_bench) {
    if (r.scale == scale && r.labels == labels) return &r;
  }
  return nullptr;
}

void run_scaling_bench(const std::filesystem::path& dir) {
  if (!g_bench.empty()) return;
  BenchConfig config;
  config.scales = {10'000, 100'000, 1'000'000};
  config.label_counts = {1, 2, 3};
  config.runs = 50;
  config.work_dir = dir;
  g_bench = run_bench(config);
}

// 7. Latency is flat in the number of ANDed predicates.
Verdict label_scaling(const std::filesystem::path& dir) {
  run_scaling_bench(dir);
  const BenchRow* one = bench_row(1'000'000, 1);
  const BenchRow* three = bench_row(1'000'000, 3);
  if (!one || !three) return {false, "bench rows missing"};
  return {three->millis <= 3.0 * one->millis,
          "t(3)=" + fmt(three->millis) + "ms, t(1)=" + fmt(one->millis) + "ms, ratio " +
              fmt(three->millis / one->millis, 2) + " (limit 3)"};
}

// 8. Latency grows at most linearly with rows.
Verdict data_scaling(const std::filesystem::path& dir) {
  run_scaling_bench(dir);
  bool pass = true;
  std::string detail;
  for (uint32_t k : {1u, 2u, 3u}) {
    const BenchRow* small = bench_row(10'000, k);
    const BenchRow* large = bench_row(1'000'000, k);
    if (!small || !large) return {false, "bench rows missing"};
    const double ratio = large->millis / small->millis;
    pass = pass && ratio <= 150.0;
    detail += (detail.empty() ? "" : ", ") + std::string("k=") + std::to_string(k) + " ratio " + fmt(ratio, 1);
  }
  return {pass, detail + " (limit 150)"};
}

// 9. Durability property suites.
Verdict durability() {
  constexpr int kCases = 1000;
  std::mt19937_64 rng(99);
  TempDir dir;
  FileTabletStore store(dir.path());
  int round_trips = 0, interruptions = 0, flips = 0;

  for (int i = 0; i < kCases; ++i) {
    const uint32_t count = 1 + static_cast<uint32_t>(rng() % 6);
    const Day day = kDay.plus_days(i % 50);
    const Tablet t = test::random_tablet(rng, static_cast<uint32_t>(rng() % count), count, day);
    const TabletRef ref = store.sink_tablet(t, true);
    const OpenTablet back = store.open_tablet(ref);
    if (back.materialize().entries != t.entries || back.checksum() != t.checksum ||
        read_file(ref.path) != encode_tablet(t)) {
      return {false, "round trip " + std::to_string(i) + " differs"};
    }
    ++round_trips;
  }

  for (int i = 0; i < kCases; ++i) {
    const Day day = kDay.plus_days(1000 + i);
    const Tablet v1 = test::random_tablet(rng, 0, 1, day);
    const Tablet v2 = test::random_tablet(rng, 0, 1, day);
    const bool had_previous = rng() % 4 != 0;
    if (had_previous) store.sink_tablet(v1, false);
    const std::size_t size = encode_tablet(v2).size();
    const WriteFault fault{static_cast<std::size_t>(rng() % (size + 1))};
    try {
      store.sink_tablet(v2, true, &fault);
      return {false, "interrupted write did not fail"};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::io_failure) return {false, e.what()};
    }
    const TabletListing listing = store.list_tablets(day);
    if (had_previous) {
      if (!listing.complete() || store.open_tablet(listing.tablets[0]).materialize().entries != v1.entries) {
        return {false, "interruption " + std::to_string(i) + " damaged the previous version"};
      }
    } else if (!listing.tablets.empty()) {
      return {false, "interruption " + std::to_string(i) + " left a visible tablet"};
    }
    ++interruptions;
  }

  for (int i = 0; i < kCases; ++i) {
    auto bytes = encode_tablet(test::random_tablet(rng, 0, 1, kDay));
    const std::size_t pos = rng() % bytes.size();
    bytes[pos] ^= static_cast<uint8_t>(1 + rng() % 255);
    try {
      OpenTablet::from_bytes(bytes);
      return {false, "flip at byte " + std::to_string(pos) + " went undetected"};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::corruption) return {false, e.what()};
    }
    ++flips;
  }
  return {true, std::to_string(round_trips) + " round trips, " + std::to_string(interruptions) +
                    " interruptions, " + std::to_string(flips) + " byte flips"};
}

// 10. Building a day twice, or forcing a rebuild, rewrites identical bytes.
Verdict idempotence() {
  TempDir dir;
  const StoreLayout layout{dir / "store"};
  std::mt19937_64 rng(1010);
  Catalog catalog;
  for (const char* name : {"alpha", "beta"}) {
    test::Corpus c = test::random_corpus(rng, 20000, 4, 3, 25);
    for (auto& l : c.labels) l = std::string(name) + "_" + l;
    test::write_text(dir / (std::string(name) + ".tsv"), format_delimited(c.table()));
    IngestRequest req;
    req.source = dir / (std::string(name) + ".tsv");
    req.table = name;
    req.id_column = "uid";
    req.day = kDay;
    ingest_table(catalog, layout, req);
  }
  catalog.save(layout.catalog_path());
  auto outputs = [&] {
    std::map<std::string, std::vector<uint8_t>> files;
    files["snapshot"] = read_file(layout.snapshot_path(kDay));
    for (const auto& e : std::filesystem::directory_iterator(layout.root / kDay.to_string())) {
      files[e.path().filename().string()] = read_file(e.path());
    }
    return files;
  };
  const BuildReport first = run_build(layout, kDay, PipelineOptions{}, 2, false);
  if (!first.failures.empty()) return {false, first.failures.front()};
  const auto a = outputs();
  const BuildReport second = run_build(layout, kDay, PipelineOptions{}, 2, false);
  const auto b = outputs();
  const BuildReport forced = run_build(layout, kDay, PipelineOptions{}, 2, true);
  const auto c = outputs();
  if (!second.nothing_to_do) return {false, "second build ran tasks"};
  if (forced.outcomes.size() != 2 || !forced.failures.empty()) return {false, "forced rebuild failed"};
  const bool same = a == b && a == c;
  return {same, std::to_string(a.size()) + " files byte-identical after repeat and forced rebuild"};
}

}  // namespace

int main() {
  TempDir bench_dir;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"table fidelity", table_fidelity},
      {"scatter-gather arithmetic", scatter_gather},
      {"oracle equivalence", oracle_equivalence},
      {"id stability", id_stability},
      {"64-bit split", high_segment},
      {"parallelism invariance", parallelism_invariance},
      {"label-count scaling", [&] { return label_scaling(bench_dir.path()); }},
      {"data scaling", [&] { return data_scaling(bench_dir.path()); }},
      {"durability", durability},
      {"pipeline idempotence", idempotence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::cout << "criterion " << (i + 1) << " " << (v.pass ? "PASS" : "FAIL") << " "
              << criteria[i].first << ": " << v.detail << " [" << fmt(seconds_since(start), 1)
              << "s]" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
