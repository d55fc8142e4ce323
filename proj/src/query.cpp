#include "bitup/query.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "bitup/error.hpp"

namespace bitup {

// --- QueryExpr ---

QueryExpr QueryExpr::predicate(std::string label, std::string value) {
  if (label.empty() || value.empty()) {
    throw Error(ErrorCode::invalid_argument, "predicate label and value must be non-empty");
  }
  QueryExpr e;
  e.kind_ = Kind::predicate;
  e.label_ = std::move(label);
  e.value_ = std::move(value);
  return e;
}

QueryExpr QueryExpr::all_of(std::vector<QueryExpr> children) {
  if (children.empty()) throw Error(ErrorCode::invalid_argument, "AND needs at least one operand");
  QueryExpr e;
  e.kind_ = Kind::all_of;
  e.children_ = std::move(children);
  return e;
}

QueryExpr QueryExpr::any_of(std::vector<QueryExpr> children) {
  if (children.empty()) throw Error(ErrorCode::invalid_argument, "OR needs at least one operand");
  QueryExpr e;
  e.kind_ = Kind::any_of;
  e.children_ = std::move(children);
  return e;
}

QueryExpr QueryExpr::exclusive_or(QueryExpr a, QueryExpr b) {
  QueryExpr e;
  e.kind_ = Kind::exclusive_or;
  e.children_.push_back(std::move(a));
  e.children_.push_back(std::move(b));
  return e;
}

QueryExpr QueryExpr::and_not(QueryExpr a, QueryExpr b) {
  QueryExpr e;
  e.kind_ = Kind::and_not;
  e.children_.push_back(std::move(a));
  e.children_.push_back(std::move(b));
  return e;
}

QueryExpr QueryExpr::any_value(const std::string& label, const std::vector<std::string>& values) {
  std::vector<QueryExpr> leaves;
  leaves.reserve(values.size());
  for (const auto& v : values) leaves.push_back(predicate(label, v));
  return any_of(std::move(leaves));
}

std::size_t QueryExpr::predicate_count() const {
  if (kind_ == Kind::predicate) return 1;
  std::size_t n = 0;
  for (const auto& c : children_) n += c.predicate_count();
  return n;
}

std::size_t QueryExpr::depth() const {
  std::size_t d = 0;
  for (const auto& c : children_) d = std::max(d, c.depth());
  return d + 1;
}

std::vector<LabelValueKey> QueryExpr::predicates() const {
  std::set<LabelValueKey> seen;
  auto walk = [&](const QueryExpr& e, auto& self) -> void {
    if (e.kind_ == Kind::predicate) {
      seen.insert({e.label_, e.value_});
      return;
    }
    for (const auto& c : e.children_) self(c, self);
  };
  walk(*this, walk);
  return {seen.begin(), seen.end()};
}

namespace {

bool needs_quotes(const std::string& s) {
  return s.find_first_of(" \t\"\\&|^-()={},") != std::string::npos;
}

std::string quoted(const std::string& s) {
  if (!needs_quotes(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string QueryExpr::to_string() const {
  if (kind_ == Kind::predicate) return quoted(label_) + "=" + quoted(value_);
  const char* op = kind_ == Kind::all_of ? " & "
                   : kind_ == Kind::any_of ? " | "
                   : kind_ == Kind::exclusive_or ? " ^ "
                                                 : " - ";
  std::string out = "(";
  for (std::size_t i = 0; i < children_.size(); ++i) {
    if (i > 0) out += op;
    out += children_[i].to_string();
  }
  return out + ")";
}

// --- evaluation ---

namespace {

using BitmapCache = std::map<LabelValueKey, BitmapPair>;

BitmapPair eval(const QueryExpr& e, const BitmapCache& cache) {
  using Kind = QueryExpr::Kind;
  switch (e.kind()) {
    case Kind::predicate: {
      auto it = cache.find(LabelValueKey{e.label(), e.value()});
      return it == cache.end() ? BitmapPair{} : it->second;
    }
    case Kind::all_of: {
      BitmapPair acc = eval(e.children()[0], cache);
      for (std::size_t i = 1; i < e.children().size() && !acc.empty(); ++i) {
        acc = acc & eval(e.children()[i], cache);
      }
      return acc;
    }
    case Kind::any_of: {
      BitmapPair acc = eval(e.children()[0], cache);
      for (std::size_t i = 1; i < e.children().size(); ++i) acc = acc | eval(e.children()[i], cache);
      return acc;
    }
    case Kind::exclusive_or:
      return eval(e.children()[0], cache) ^ eval(e.children()[1], cache);
    case Kind::and_not:
      return eval(e.children()[0], cache) - eval(e.children()[1], cache);
  }
  return {};
}

PartialResult evaluate_with(const OpenTablet& tablet, const QueryExpr& expr,
                            const std::vector<LabelValueKey>& predicates, bool want_members) {
  BitmapCache cache;
  for (const auto& key : predicates) {
    if (auto pair = tablet.get_bitmap(key.label, key.value)) cache.emplace(key, std::move(*pair));
  }
  BitmapPair result = eval(expr, cache);
  PartialResult partial{tablet.tablet_id(), result.cardinality(), std::nullopt};
  if (want_members) partial.members = std::move(result);
  return partial;
}

// Runs evaluate(i) for every tablet index, one thread per slot.
template <class Evaluate>
std::vector<PartialResult> run_slots(const ExecutionPlan& p, std::size_t tablet_count,
                                     Evaluate&& evaluate) {
  std::vector<PartialResult> partials(tablet_count);
  if (p.slots.size() <= 1) {
    for (std::size_t i = 0; i < tablet_count; ++i) partials[i] = evaluate(i);
    return partials;
  }
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> threads;
    threads.reserve(p.slots.size());
    for (const auto& slot : p.slots) {
      threads.emplace_back([&, slot_ptr = &slot] {
        try {
          for (std::size_t i : *slot_ptr) partials[i] = evaluate(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return partials;
}

ExecutionPlan make_plan(const QueryExpr& expr, std::size_t tablet_count, uint32_t parallelism) {
  if (parallelism == 0) throw Error(ErrorCode::invalid_argument, "parallelism must be at least 1");
  ExecutionPlan p;
  p.predicates = expr.predicates();
  const std::size_t slots = std::min<std::size_t>(parallelism, std::max<std::size_t>(tablet_count, 1));
  p.slots.resize(slots);
  for (std::size_t i = 0; i < tablet_count; ++i) p.slots[i % slots].push_back(i);
  return p;
}

Error incomplete(const TabletListing& listing) {
  std::string missing;
  for (uint32_t id : listing.missing) {
    if (!missing.empty()) missing += ", ";
    missing += std::to_string(id);
  }
  if (listing.tablet_count == 0) {
    return Error(ErrorCode::incomplete_tablet_set,
                 "no tablets stored for " + listing.day.to_string());
  }
  return Error(ErrorCode::incomplete_tablet_set, "tablet set for " + listing.day.to_string() +
                                                     " is missing indices: " + missing);
}

BitmapPair union_members(std::vector<PartialResult>& partials) {
  BitmapPair all;
  for (auto& p : partials) all = all | *p.members;
  return all;
}

std::vector<std::string> reverse_map(const BitmapPair& members, const IdSnapshot& snapshot) {
  std::vector<std::string> out;
  out.reserve(members.cardinality());
  for (uint64_t uid : members.to_uids()) {
    auto external = snapshot.reverse_lookup(uid);
    if (!external) {
      throw Error(ErrorCode::missing_reverse_mapping,
                  "uid " + std::to_string(uid) + " is not in the snapshot for " +
                      snapshot.day().to_string());
    }
    out.emplace_back(*external);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PartialResult> scatter_store(const FileTabletStore& store, Day day,
                                         const QueryExpr& expr, uint32_t parallelism,
                                         bool want_members) {
  const TabletListing listing = store.list_tablets(day);
  if (!listing.complete()) throw incomplete(listing);
  const ExecutionPlan p = plan(expr, listing.tablets, parallelism);
  return run_slots(p, listing.tablets.size(), [&](std::size_t i) {
    return evaluate_with(store.open_tablet(listing.tablets[i]), expr, p.predicates, want_members);
  });
}

}  // namespace

PartialResult evaluate_on_tablet(const OpenTablet& tablet, const QueryExpr& expr,
                                 bool want_members) {
  return evaluate_with(tablet, expr, expr.predicates(), want_members);
}

ExecutionPlan plan(const QueryExpr& expr, std::span<const TabletRef> tablets, uint32_t parallelism) {
  return make_plan(expr, tablets.size(), parallelism);
}

OpenTabletSet OpenTabletSet::open(const FileTabletStore& store, Day day) {
  const TabletListing listing = store.list_tablets(day);
  if (!listing.complete()) throw incomplete(listing);
  OpenTabletSet set;
  set.day_ = day;
  set.refs_ = listing.tablets;
  set.tablets_.reserve(listing.tablets.size());
  for (const auto& ref : listing.tablets) set.tablets_.push_back(store.open_tablet(ref));
  return set;
}

std::vector<PartialResult> scatter(const OpenTabletSet& set, const QueryExpr& expr,
                                   uint32_t parallelism, bool want_members) {
  const ExecutionPlan p = plan(expr, set.refs(), parallelism);
  return run_slots(p, set.tablets().size(), [&](std::size_t i) {
    return evaluate_with(set.tablets()[i], expr, p.predicates, want_members);
  });
}

uint64_t gather_count(std::span<const PartialResult> partials) {
  uint64_t total = 0;
  for (const auto& p : partials) total += p.count;
  return total;
}

uint64_t query_count(const OpenTabletSet& set, const QueryExpr& expr, uint32_t parallelism) {
  return gather_count(scatter(set, expr, parallelism, false));
}

BitmapPair query_member_ids(const OpenTabletSet& set, const QueryExpr& expr, uint32_t parallelism) {
  auto partials = scatter(set, expr, parallelism, true);
  return union_members(partials);
}

std::vector<std::string> query_members(const OpenTabletSet& set, const QueryExpr& expr,
                                       const IdSnapshot& snapshot, uint32_t parallelism) {
  return reverse_map(query_member_ids(set, expr, parallelism), snapshot);
}

uint64_t query_count(const FileTabletStore& store, Day day, const QueryExpr& expr,
                     uint32_t parallelism) {
  return gather_count(scatter_store(store, day, expr, parallelism, false));
}

std::vector<std::string> query_members(const FileTabletStore& store, Day day,
                                       const QueryExpr& expr, const IdSnapshot& snapshot,
                                       uint32_t parallelism) {
  auto partials = scatter_store(store, day, expr, parallelism, true);
  return reverse_map(union_members(partials), snapshot);
}

}  // namespace bitup
