#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bitup/bitmap_pair.hpp"
#include "bitup/id_gen.hpp"
#include "bitup/tablet_store.hpp"

namespace bitup {

/// Boolean expression over label=value predicates. There is no absolute
/// complement; negation is only available as a binary difference.
class QueryExpr {
 public:
  enum class Kind { predicate, all_of, any_of, exclusive_or, and_not };

  static QueryExpr predicate(std::string label, std::string value);
  static QueryExpr all_of(std::vector<QueryExpr> children);
  static QueryExpr any_of(std::vector<QueryExpr> children);
  static QueryExpr exclusive_or(QueryExpr a, QueryExpr b);
  static QueryExpr and_not(QueryExpr a, QueryExpr b);
  /// label IN {values}, desugared to an any_of of predicates.
  static QueryExpr any_value(const std::string& label, const std::vector<std::string>& values);

  Kind kind() const noexcept { return kind_; }
  const std::string& label() const noexcept { return label_; }
  const std::string& value() const noexcept { return value_; }
  const std::vector<QueryExpr>& children() const noexcept { return children_; }

  std::size_t predicate_count() const;
  std::size_t depth() const;
  /// Distinct (label, value) leaves, sorted.
  std::vector<LabelValueKey> predicates() const;
  /// Fully parenthesized text accepted by the expression parser.
  std::string to_string() const;

  friend bool operator==(const QueryExpr&, const QueryExpr&) = default;

 private:
  QueryExpr() = default;

  Kind kind_ = Kind::predicate;
  std::string label_;
  std::string value_;
  std::vector<QueryExpr> children_;
};

struct PartialResult {
  uint32_t tablet_id = 0;
  uint64_t count = 0;
  std::optional<BitmapPair> members;
};

/// Evaluates the expression against one tablet, decoding only the bitmaps
/// its predicates name. An absent (label, value) is the empty set.
PartialResult evaluate_on_tablet(const OpenTablet& tablet, const QueryExpr& expr,
                                 bool want_members = false);

/// Tablet-to-slot assignment: tablet i goes to slot i mod slot_count.
struct ExecutionPlan {
  std::vector<LabelValueKey> predicates;
  std::vector<std::vector<std::size_t>> slots;  // indices into the tablet list
};

ExecutionPlan plan(const QueryExpr& expr, std::span<const TabletRef> tablets, uint32_t parallelism);

/// The complete, opened tablet set of one day.
class OpenTabletSet {
 public:
  /// Throws incomplete_tablet_set naming the missing indices.
  static OpenTabletSet open(const FileTabletStore& store, Day day);

  Day day() const noexcept { return day_; }
  const std::vector<OpenTablet>& tablets() const noexcept { return tablets_; }
  const std::vector<TabletRef>& refs() const noexcept { return refs_; }

 private:
  Day day_;
  std::vector<TabletRef> refs_;
  std::vector<OpenTablet> tablets_;
};

/// Scatter the expression over every tablet and gather the partials, in
/// tablet order. Runs up to `parallelism` evaluation slots concurrently.
std::vector<PartialResult> scatter(const OpenTabletSet& set, const QueryExpr& expr,
                                   uint32_t parallelism, bool want_members);

uint64_t query_count(const OpenTabletSet& set, const QueryExpr& expr, uint32_t parallelism);
BitmapPair query_member_ids(const OpenTabletSet& set, const QueryExpr& expr, uint32_t parallelism);
/// Member uids mapped back through the snapshot, sorted. Throws
/// missing_reverse_mapping for a uid the snapshot does not know.
std::vector<std::string> query_members(const OpenTabletSet& set, const QueryExpr& expr,
                                       const IdSnapshot& snapshot, uint32_t parallelism);

/// Store-level variants: list the day's tablets, fail on an incomplete set,
/// and open each tablet inside its evaluation slot.
uint64_t query_count(const FileTabletStore& store, Day day, const QueryExpr& expr,
                     uint32_t parallelism);
std::vector<std::string> query_members(const FileTabletStore& store, Day day,
                                       const QueryExpr& expr, const IdSnapshot& snapshot,
                                       uint32_t parallelism);

/// Sum of partial counts. Exact because tablets hold disjoint uid sets.
uint64_t gather_count(std::span<const PartialResult> partials);

}  // namespace bitup
