#include <gtest/gtest.h>

#include "bitup/catalog.hpp"
#include "bitup/error.hpp"
#include "support.hpp"

using namespace bitup;

namespace {

const Day kDay = Day::parse("2024-02-29");

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::invalid_argument;
}

TableMeta profile(Day day = kDay) {
  TableMeta t;
  t.name = "profile";
  t.day = day;
  t.columns = {{"user id", ColumnRole::id}, {"age", ColumnRole::label_value},
               {"gender", ColumnRole::label_value}};
  t.upstream_task = "task:export@" + day.to_string();
  return t;
}

LabelMeta label(const std::string& name) {
  LabelMeta l;
  l.name = name;
  l.source_table = "profile";
  l.source_column = name;
  return l;
}

Catalog sample() {
  Catalog c;
  c.register_table(profile());
  c.register_label(label("age"));
  c.register_label(label("gender"));
  return c;
}

}  // namespace

TEST(Catalog, RegistrationCreatesLineage) {
  const Catalog c = sample();
  EXPECT_EQ(c.lineage("label:age").upstream,
            (std::vector<std::string>{"table:profile@2024-02-29", "task:export@2024-02-29"}));
  EXPECT_EQ(c.lineage("table:profile@2024-02-29").downstream,
            (std::vector<std::string>{"label:age", "label:gender"}));
  EXPECT_EQ(c.labels_for_table("profile").size(), 2u);
  EXPECT_EQ(c.find_table("profile", kDay)->readiness, Readiness::pending);
}

TEST(Catalog, RegistrationErrors) {
  Catalog c = sample();
  EXPECT_EQ(code_of([&] { c.register_table(profile()); }), ErrorCode::duplicate_name);
  EXPECT_EQ(code_of([&] { c.register_label(label("age")); }), ErrorCode::duplicate_name);
  EXPECT_EQ(code_of([&] { c.register_label(label("height")); }), ErrorCode::dangling_column);
  LabelMeta orphan = label("x");
  orphan.source_table = "nope";
  EXPECT_EQ(code_of([&] { c.register_label(orphan); }), ErrorCode::dangling_column);
  LabelMeta on_id = label("uid");
  on_id.source_column = "user id";
  EXPECT_EQ(code_of([&] { c.register_label(on_id); }), ErrorCode::dangling_column);
  TableMeta two_ids = profile(kDay.plus_days(1));
  two_ids.columns[1].role = ColumnRole::id;
  EXPECT_EQ(code_of([&] { c.register_table(two_ids); }), ErrorCode::invalid_argument);
  // Same name on another day is a different table.
  c.register_table(profile(kDay.plus_days(1)));
}

TEST(Catalog, LineageStaysAcyclic) {
  Catalog c = sample();
  c.register_node("tablets@2024-02-29");
  c.add_edge("label:age", "tablets@2024-02-29");
  EXPECT_EQ(code_of([&] { c.add_edge("tablets@2024-02-29", "task:export@2024-02-29"); }),
            ErrorCode::lineage_cycle);
  EXPECT_EQ(code_of([&] { c.add_edge("label:age", "label:age"); }), ErrorCode::lineage_cycle);
  EXPECT_EQ(code_of([&] { c.add_edge("label:age", "ghost"); }), ErrorCode::unknown_entity);
  EXPECT_EQ(code_of([&] { c.lineage("ghost"); }), ErrorCode::unknown_entity);
  EXPECT_EQ(c.lineage("task:export@2024-02-29").downstream,
            (std::vector<std::string>{"label:age", "label:gender", "table:profile@2024-02-29",
                                      "tablets@2024-02-29"}));
}

TEST(Catalog, RandomEdgesNeverFormACycle) {
  std::mt19937_64 rng(9);
  Catalog c;
  std::vector<std::string> nodes;
  for (int i = 0; i < 25; ++i) {
    nodes.push_back("n" + std::to_string(i));
    c.register_node(nodes.back());
  }
  for (int i = 0; i < 400; ++i) {
    const auto& a = nodes[rng() % nodes.size()];
    const auto& b = nodes[rng() % nodes.size()];
    try {
      c.add_edge(a, b);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::lineage_cycle);
      continue;
    }
    // An accepted edge never puts a node in its own downstream.
    const Lineage l = c.lineage(a);
    EXPECT_FALSE(std::binary_search(l.downstream.begin(), l.downstream.end(), a));
  }
  for (const auto& n : nodes) {
    const Lineage l = c.lineage(n);
    EXPECT_FALSE(std::binary_search(l.upstream.begin(), l.upstream.end(), n));
  }
}

TEST(Catalog, LabelLifecycleMovesForward) {
  Catalog c = sample();
  c.advance_label("age", LabelState::mapping);
  c.advance_label("age", LabelState::mapping);
  c.advance_label("age", LabelState::serving);
  EXPECT_EQ(code_of([&] { c.advance_label("age", LabelState::building); }),
            ErrorCode::lifecycle_violation);
  EXPECT_EQ(c.find_label("age")->state, LabelState::serving);
  EXPECT_EQ(code_of([&] { c.advance_label("nope", LabelState::serving); }), ErrorCode::unknown_entity);
}

TEST(Catalog, SlaUsesLatestMetrics) {
  Catalog c = sample();
  EXPECT_TRUE(c.sla_ok("age"));
  QualityMetrics bad;
  bad.row_count = 4;
  bad.empty_rows = 3;
  bad.empty_ratio = 0.75;
  bad.last_updated = kDay;
  c.record_metrics("age", bad);
  EXPECT_FALSE(c.sla_ok("age"));
  EXPECT_EQ(c.sla_violations(), std::vector<std::string>{"age"});
  QualityMetrics good = bad;
  good.empty_rows = 0;
  good.empty_ratio = 0.0;
  good.last_updated = kDay.plus_days(1);
  c.record_metrics("age", good);
  EXPECT_TRUE(c.sla_ok("age"));
  EXPECT_TRUE(c.sla_violations().empty());
  QualityMetrics edge = bad;
  edge.empty_ratio = 0.5;
  edge.last_updated = kDay.plus_days(2);
  c.record_metrics("age", edge);
  EXPECT_TRUE(c.sla_ok("age"));
}

TEST(Catalog, PersistenceRoundTrip) {
  test::TempDir dir;
  Catalog c = sample();
  c.mark_ready("profile", kDay);
  c.record_table_counts("profile", kDay, 2, {{"age", 0}, {"gender", 1}});
  c.register_node("task:bitmap-build@2024-02-29");
  c.record_task_metrics({"task:bitmap-build@2024-02-29", kDay, 1.5, "done"});
  c.advance_label("gender", LabelState::building);
  EXPECT_EQ(code_of([&] { c.record_task_metrics({"task:ghost", kDay, 1, "done"}); }),
            ErrorCode::unknown_entity);
  c.save(dir / "catalog.json");
  const Catalog back = Catalog::load(dir / "catalog.json");
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(Catalog::load(dir / "missing.json"), Catalog{});
  EXPECT_EQ(code_of([] { Catalog::from_json("{\"tables\": 3}"); }), ErrorCode::corruption);
}
