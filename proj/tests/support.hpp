#pragma once

// Shared fixtures: scratch directories, random corpora, a brute-force set
// evaluator that never touches bitmaps, and a random expression generator.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bitup/builder.hpp"
#include "bitup/catalog.hpp"
#include "bitup/delimited_table.hpp"
#include "bitup/id_gen.hpp"
#include "bitup/query.hpp"
#include "bitup/tablet_store.hpp"

namespace bitup::test {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "bitup-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::FILE* f = std::fopen(p.c_str(), "wb");
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

/// Rows of (external id, one value per label). "" is an empty cell.
struct Corpus {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> alphabet;  // per label
  std::vector<std::vector<std::string>> cells;     // [label][row]

  std::size_t rows() const { return ids.size(); }

  DelimitedTable table() const {
    DelimitedTable t;
    t.header.push_back("uid");
    t.header.insert(t.header.end(), labels.begin(), labels.end());
    t.rows.reserve(rows());
    for (std::size_t r = 0; r < rows(); ++r) {
      std::vector<std::string> row{ids[r]};
      for (std::size_t l = 0; l < labels.size(); ++l) row.push_back(cells[l][r]);
      t.rows.push_back(std::move(row));
    }
    return t;
  }
};

inline Corpus random_corpus(std::mt19937_64& rng, std::size_t rows, std::size_t labels,
                            std::size_t min_values, std::size_t max_values,
                            double empty_probability = 0.05) {
  Corpus c;
  std::uniform_int_distribution<uint64_t> any;
  std::unordered_map<std::string, bool> seen;
  while (c.ids.size() < rows) {
    std::string id = "u" + std::to_string(any(rng) % (rows * 100 + 1000));
    if (seen.emplace(id, true).second) c.ids.push_back(std::move(id));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t l = 0; l < labels; ++l) {
    c.labels.push_back("l" + std::to_string(l));
    const std::size_t n =
        std::uniform_int_distribution<std::size_t>(min_values, max_values)(rng);
    std::vector<std::string> alpha;
    for (std::size_t v = 0; v < n; ++v) alpha.push_back("v" + std::to_string(v));
    // Skewed draw: square a uniform so low values dominate.
    std::vector<std::string> column(rows);
    for (auto& cell : column) {
      if (unit(rng) < empty_probability) continue;
      const double u = unit(rng);
      cell = alpha[std::min<std::size_t>(n - 1, static_cast<std::size_t>(u * u * n))];
    }
    c.alphabet.push_back(std::move(alpha));
    c.cells.push_back(std::move(column));
  }
  return c;
}

using RowSet = std::vector<uint32_t>;  // sorted row indices

/// Group-by over the raw cells: (label, value) -> rows.
class Oracle {
 public:
  explicit Oracle(const Corpus& c) : corpus_(&c) {
    for (std::size_t l = 0; l < c.labels.size(); ++l) {
      std::unordered_map<std::string, RowSet> groups;
      for (uint32_t r = 0; r < c.rows(); ++r) {
        if (!c.cells[l][r].empty()) groups[c.cells[l][r]].push_back(r);
      }
      for (auto& [v, rows] : groups) index_[{c.labels[l], v}] = std::move(rows);
    }
    std::vector<uint32_t> order(c.rows());
    for (uint32_t r = 0; r < c.rows(); ++r) order[r] = r;
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) { return c.ids[a] < c.ids[b]; });
    rank_.resize(c.rows());
    for (uint32_t i = 0; i < order.size(); ++i) rank_[order[i]] = i;
    sorted_ids_.reserve(c.rows());
    for (uint32_t r : order) sorted_ids_.push_back(c.ids[r]);
  }

  RowSet eval(const QueryExpr& e) const {
    using Kind = QueryExpr::Kind;
    if (e.kind() == Kind::predicate) {
      auto it = index_.find({e.label(), e.value()});
      return it == index_.end() ? RowSet{} : it->second;
    }
    RowSet acc = eval(e.children()[0]);
    for (std::size_t i = 1; i < e.children().size(); ++i) {
      const RowSet rhs = eval(e.children()[i]);
      RowSet out;
      switch (e.kind()) {
        case Kind::all_of:
          std::set_intersection(acc.begin(), acc.end(), rhs.begin(), rhs.end(), std::back_inserter(out));
          break;
        case Kind::any_of:
          std::set_union(acc.begin(), acc.end(), rhs.begin(), rhs.end(), std::back_inserter(out));
          break;
        case Kind::exclusive_or:
          std::set_symmetric_difference(acc.begin(), acc.end(), rhs.begin(), rhs.end(),
                                        std::back_inserter(out));
          break;
        case Kind::and_not:
          std::set_difference(acc.begin(), acc.end(), rhs.begin(), rhs.end(), std::back_inserter(out));
          break;
        case Kind::predicate:
          break;
      }
      acc = std::move(out);
    }
    return acc;
  }

  /// True when `members` (sorted external ids) equals the rows' ids.
  bool members_match(const RowSet& rows, const std::vector<std::string>& members) const {
    if (rows.size() != members.size()) return false;
    std::vector<uint32_t> ranks;
    ranks.reserve(rows.size());
    for (uint32_t r : rows) ranks.push_back(rank_[r]);
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      if (sorted_ids_[ranks[i]] != members[i]) return false;
    }
    return true;
  }

 private:
  const Corpus* corpus_;
  std::map<LabelValueKey, RowSet> index_;
  std::vector<uint32_t> rank_;
  std::vector<std::string> sorted_ids_;
};

/// Random expression with depth <= max_depth and at most max_predicates leaves.
/// Occasionally names a value that does not occur.
class ExprGen {
 public:
  ExprGen(const Corpus& c, std::size_t max_depth = 4, std::size_t max_predicates = 6)
      : corpus_(&c), max_depth_(max_depth), max_predicates_(max_predicates) {}

  QueryExpr operator()(std::mt19937_64& rng) const {
    std::size_t budget = std::uniform_int_distribution<std::size_t>(1, max_predicates_)(rng);
    return gen(rng, max_depth_, budget);
  }

 private:
  QueryExpr leaf(std::mt19937_64& rng) const {
    const std::size_t l = pick(rng, corpus_->labels.size());
    const auto& alpha = corpus_->alphabet[l];
    if (pick(rng, 25) == 0) return QueryExpr::predicate(corpus_->labels[l], "absent");
    return QueryExpr::predicate(corpus_->labels[l], alpha[pick(rng, alpha.size())]);
  }

  // Consumes `budget` leaves exactly.
  QueryExpr gen(std::mt19937_64& rng, std::size_t depth, std::size_t budget) const {
    if (budget == 1) return leaf(rng);
    if (depth <= 2) {
      std::vector<QueryExpr> leaves;
      for (std::size_t i = 0; i < budget; ++i) leaves.push_back(leaf(rng));
      return pick(rng, 2) == 0 ? QueryExpr::all_of(std::move(leaves))
                               : QueryExpr::any_of(std::move(leaves));
    }
    const std::size_t op = pick(rng, 4);
    if (op >= 2) {
      const std::size_t left = 1 + pick(rng, budget - 1);
      QueryExpr a = gen(rng, depth - 1, left);
      QueryExpr b = gen(rng, depth - 1, budget - left);
      return op == 2 ? QueryExpr::exclusive_or(std::move(a), std::move(b))
                     : QueryExpr::and_not(std::move(a), std::move(b));
    }
    const std::size_t parts = std::min<std::size_t>(budget, 2 + pick(rng, 2));
    std::vector<QueryExpr> children;
    std::size_t remaining = budget;
    for (std::size_t i = 0; i < parts; ++i) {
      const std::size_t left_for_rest = parts - i - 1;
      const std::size_t take =
          i + 1 == parts ? remaining : 1 + pick(rng, remaining - left_for_rest);
      children.push_back(gen(rng, depth - 1, take));
      remaining -= take;
    }
    return op == 0 ? QueryExpr::all_of(std::move(children)) : QueryExpr::any_of(std::move(children));
  }

  static std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  const Corpus* corpus_;
  std::size_t max_depth_;
  std::size_t max_predicates_;
};

/// A sealed tablet with random entries whose uids all hash to tablet_id.
inline Tablet random_tablet(std::mt19937_64& rng, uint32_t tablet_id, uint32_t tablet_count,
                            Day day) {
  Tablet t;
  t.tablet_id = tablet_id;
  t.tablet_count = tablet_count;
  t.build_day = day;
  const std::size_t entries = rng() % 6;
  for (std::size_t e = 0; e < entries; ++e) {
    BitmapPair pair;
    const std::size_t n = rng() % 2 == 0 ? rng() % 40 : rng() % 6000;
    const uint64_t base = rng() % 2 == 0 ? 0 : (uint64_t{1} << 32) - 3000;
    for (std::size_t i = 0; i < n; ++i) {
      const uint64_t uid = base + rng() % 20000;
      if (tablet_of(uid, tablet_count) == tablet_id) pair.add(uid);
    }
    t.entries[{"label" + std::to_string(rng() % 3), "v" + std::to_string(rng() % 10)}] =
        std::move(pair);
  }
  t.seal();
  return t;
}

/// A corpus mapped, built, and sunk into a file store for one day.
struct BuiltCorpus {
  IdSnapshot snapshot;
  BuildOutput output;
  OpenTabletSet tablets;
};

/// `preseed` raises each partition's starting offset before assignment.
inline BuiltCorpus build_corpus(const Corpus& c, const std::filesystem::path& root, Day day,
                                uint32_t tablet_count, std::optional<PartitionPlan> plan = {},
                                std::vector<uint64_t> preseed = {}) {
  Catalog catalog;
  TableMeta meta;
  meta.name = "corpus";
  meta.day = day;
  meta.columns.push_back({"uid", ColumnRole::id});
  for (const auto& l : c.labels) meta.columns.push_back({l, ColumnRole::label_value});
  catalog.register_table(meta);
  for (const auto& l : c.labels) {
    LabelMeta label;
    label.name = l;
    label.source_table = "corpus";
    label.source_column = l;
    catalog.register_label(std::move(label));
  }
  catalog.mark_ready("corpus", day);

  const PartitionPlan p = plan ? *plan : plan_partitions(c.rows() + 1, 4096);
  std::optional<IdSnapshot> seeded;
  if (!preseed.empty()) {
    seeded.emplace(day.plus_days(-1), p);
    for (uint32_t i = 0; i < preseed.size(); ++i) seeded->reserve_offsets(i, preseed[i]);
  }
  IdSnapshot snapshot = assign_day(seeded ? &*seeded : nullptr, day, c.ids, p);
  SourceTable source{"corpus", day, c.table()};
  BuildOutput out = build_tablets(catalog, std::span(&source, 1), snapshot, tablet_count);
  FileTabletStore store(root);
  for (const Tablet& t : out.tablets) store.sink_tablet(t, true);
  store.write_manifest(out.manifest);
  OpenTabletSet set = OpenTabletSet::open(store, day);
  return BuiltCorpus{std::move(snapshot), std::move(out), std::move(set)};
}

}  // namespace bitup::test
