#include "bitup/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "bitup/builder.hpp"
#include "bitup/catalog.hpp"
#include "bitup/error.hpp"
#include "bitup/hash.hpp"
#include "bitup/id_gen.hpp"
#include "bitup/query.hpp"

namespace bitup {
namespace fs = std::filesystem;

ZipfSampler::ZipfSampler(uint32_t n, double exponent) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "zipf needs at least one value");
  cdf_.resize(n);
  double total = 0.0;
  for (uint32_t k = 0; k < n; ++k) {
    total += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
    cdf_[k] = total;
  }
  for (double& c : cdf_) c /= total;
}

uint32_t ZipfSampler::operator()(std::mt19937_64& rng) const {
  const double u = unit_double(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<uint32_t>(it - cdf_.begin());
}

DelimitedTable generate_corpus(const CorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const ZipfSampler zipf(spec.values_per_label, spec.zipf_exponent);
  DelimitedTable t;
  t.header.push_back("user_id");
  for (uint32_t l = 0; l < spec.labels; ++l) t.header.push_back("label_" + std::to_string(l));
  t.rows.reserve(spec.rows);
  const uint64_t salt = mix64(spec.seed);
  char hex[17];
  for (uint64_t i = 0; i < spec.rows; ++i) {
    std::vector<std::string> row;
    row.reserve(spec.labels + 1);
    // mix64 is a bijection, so distinct i give distinct ids.
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(mix64(i ^ salt)));
    row.push_back(std::string("dev-") + hex);
    for (uint32_t l = 0; l < spec.labels; ++l) {
      if (spec.empty_probability > 0.0 && unit_double(rng) < spec.empty_probability) {
        row.emplace_back();
      } else {
        row.push_back("v" + std::to_string(zipf(rng)));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

QueryExpr conjunction(uint32_t k) {
  std::vector<QueryExpr> leaves;
  for (uint32_t l = 0; l < k; ++l) leaves.push_back(QueryExpr::predicate("label_" + std::to_string(l), "v0"));
  return leaves.size() == 1 ? leaves.front() : QueryExpr::all_of(std::move(leaves));
}

uint64_t scan_count(const DelimitedTable& t, uint32_t k) {
  uint64_t n = 0;
  for (const auto& row : t.rows) {
    bool all = true;
    for (uint32_t l = 0; l < k && all; ++l) all = row[l + 1] == "v0";
    n += all ? 1 : 0;
  }
  return n;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& config, std::ostream* log) {
  if (config.scales.empty() || config.label_counts.empty() || config.runs == 0) {
    throw Error(ErrorCode::invalid_argument, "bench needs scales, label counts and runs");
  }
  const uint32_t max_labels = *std::max_element(config.label_counts.begin(), config.label_counts.end());
  const uint64_t smallest = *std::min_element(config.scales.begin(), config.scales.end());
  const Day day = Day::parse("2024-01-01");
  std::vector<BenchRow> rows;

  for (uint64_t scale : config.scales) {
    if (log) *log << "bench: building scale " << scale << "\n";
    CorpusSpec spec;
    spec.rows = scale;
    spec.labels = max_labels;
    spec.values_per_label = config.values_per_label;
    spec.seed = config.seed;
    SourceTable source{"bench", day, generate_corpus(spec)};

    Catalog catalog;
    TableMeta meta;
    meta.name = "bench";
    meta.day = day;
    meta.columns.push_back({"user_id", ColumnRole::id});
    for (uint32_t l = 0; l < max_labels; ++l) {
      meta.columns.push_back({"label_" + std::to_string(l), ColumnRole::label_value});
    }
    catalog.register_table(meta);
    for (uint32_t l = 0; l < max_labels; ++l) {
      LabelMeta label;
      label.name = "label_" + std::to_string(l);
      label.source_table = "bench";
      label.source_column = label.name;
      catalog.register_label(std::move(label));
    }
    catalog.mark_ready("bench", day);

    std::vector<std::string> ids;
    ids.reserve(scale);
    for (const auto& row : source.data.rows) ids.push_back(row[0]);
    const PartitionPlan plan = plan_partitions(scale, std::max<uint64_t>(scale / 10, 1));
    const IdSnapshot snapshot = assign_day(nullptr, day, ids, plan);
    ids.clear();
    ids.shrink_to_fit();

    BuildOutput out = build_tablets(catalog, std::span(&source, 1), snapshot, config.tablet_count);
    const fs::path dir = config.work_dir / ("scale_" + std::to_string(scale));
    FileTabletStore store(dir);
    for (const Tablet& t : out.tablets) store.sink_tablet(t, true);
    store.write_manifest(out.manifest);
    out.tablets.clear();

    const OpenTabletSet set = OpenTabletSet::open(store, day);
    for (uint32_t k : config.label_counts) {
      if (k == 0 || k > max_labels) throw Error(ErrorCode::invalid_argument, "bad label count");
      const QueryExpr expr = conjunction(k);
      std::vector<double> times;
      times.reserve(config.runs);
      uint64_t count = 0;
      for (uint32_t r = 0; r < config.runs; ++r) {
        const auto start = std::chrono::steady_clock::now();
        count = query_count(set, expr, config.parallelism);
        times.push_back(std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count());
      }
      if (scale == smallest && count != scan_count(source.data, k)) {
        throw Error(ErrorCode::corruption, "bench count mismatch at scale " + std::to_string(scale) +
                                               " labels " + std::to_string(k));
      }
      std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
      rows.push_back({scale, k, times[times.size() / 2], count});
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "scale,labels,millis,count\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", r.millis);
    out += std::to_string(r.scale) + "," + std::to_string(r.labels) + "," + buf + "," +
           std::to_string(r.count) + "\n";
  }
  return out;
}

}  // namespace bitup
