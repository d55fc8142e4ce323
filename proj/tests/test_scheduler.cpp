#include <gtest/gtest.h>

#include <atomic>
#include <mutex>

#include "bitup/error.hpp"
#include "bitup/scheduler.hpp"
#include "support.hpp"

using namespace bitup;

namespace {

const Day kDay = Day::parse("2024-06-01");

TableMeta table(const std::string& name, Day day = kDay, int priority = 0) {
  TableMeta t;
  t.name = name;
  t.day = day;
  t.priority = priority;
  t.columns = {{"id", ColumnRole::id}, {name + "_v", ColumnRole::label_value}};
  return t;
}

class RecordingExecutor : public TaskExecutor {
 public:
  TaskResult execute(const TaskInstance& task, const Catalog&) override {
    {
      std::lock_guard lock(mu_);
      ran.push_back(task.entity());
    }
    if (fail_remaining > 0) {
      --fail_remaining;
      throw std::runtime_error("boom");
    }
    TaskResult r;
    r.catalog_updates.push_back([e = task.entity()](Catalog& c) { c.register_node(e + "#out"); });
    return r;
  }

  std::vector<std::string> ran;
  std::atomic<int> fail_remaining{0};

 private:
  std::mutex mu_;
};

}  // namespace

TEST(Scheduler, NoReadyTableCreatesNothing) {
  Catalog c;
  c.register_table(table("a"));
  Scheduler s;
  EXPECT_TRUE(s.check_cycle(c, kDay).empty());
  EXPECT_TRUE(s.instances().empty());
}

TEST(Scheduler, MappingWaitsForEveryTableOfTheDay) {
  Catalog c;
  c.register_table(table("a"));
  c.register_table(table("b"));
  c.mark_ready("a", kDay);
  Scheduler s;
  const auto created = s.check_cycle(c, kDay);
  ASSERT_EQ(created.size(), 2u);
  EXPECT_EQ(created[0].kind, TaskKind::id_mapping);
  EXPECT_EQ(created[1].kind, TaskKind::bitmap_build);
  EXPECT_EQ(created[1].dependencies, std::vector<uint64_t>{created[0].id});

  RecordingExecutor exec;
  EXPECT_TRUE(s.dispatch(c, exec, 4).empty());
  EXPECT_EQ(s.instance(created[0].id).state, TaskState::waiting);

  c.mark_ready("b", kDay);
  EXPECT_TRUE(s.check_cycle(c, kDay).empty());  // already created
  const auto round1 = s.dispatch(c, exec, 4);
  ASSERT_EQ(round1.size(), 1u);  // build still gated on the mapping
  EXPECT_EQ(round1[0].instance, created[0].id);
  const auto round2 = s.dispatch(c, exec, 4);
  ASSERT_EQ(round2.size(), 1u);
  EXPECT_EQ(round2[0].instance, created[1].id);
  EXPECT_TRUE(s.dispatch(c, exec, 4).empty());
  EXPECT_EQ(exec.ran, (std::vector<std::string>{"task:id-mapping@2024-06-01",
                                                "task:bitmap-build@2024-06-01"}));
  EXPECT_TRUE(c.has_entity("task:bitmap-build@2024-06-01#out"));
  EXPECT_EQ(c.task_metrics().size(), 2u);
  EXPECT_EQ(c.task_metrics()[1].outcome, "done");
}

TEST(Scheduler, PerTableMappingIsGatedOnItsTable) {
  Catalog c;
  c.register_table(table("a"));
  Scheduler s;
  const uint64_t id = s.add_instance(TaskKind::id_mapping, "a", kDay, 0, {});
  s.refresh(c);
  EXPECT_EQ(s.instance(id).state, TaskState::waiting);
  c.mark_ready("a", kDay);
  s.refresh(c);
  EXPECT_EQ(s.instance(id).state, TaskState::runnable);
  EXPECT_THROW(s.add_instance(TaskKind::id_mapping, "a", kDay, 0, {}), Error);
  EXPECT_THROW(s.add_instance(TaskKind::bitmap_build, "a", kDay, 0, {999}), Error);
}

TEST(Scheduler, PriorityThenCreationOrder) {
  Catalog c;
  const Day d1 = kDay, d2 = kDay.plus_days(1), d3 = kDay.plus_days(2);
  c.register_table(table("a", d1, 1));
  c.register_table(table("a", d2, 5));
  c.register_table(table("a", d3, 1));
  for (Day d : {d1, d2, d3}) c.mark_ready("a", d);
  Scheduler s;
  for (Day d : {d1, d2, d3}) s.check_cycle(c, d);
  RecordingExecutor exec;
  const auto round = s.dispatch(c, exec, 2);
  ASSERT_EQ(round.size(), 2u);
  EXPECT_EQ(s.instance(round[0].instance).day, d2);
  EXPECT_EQ(s.instance(round[1].instance).day, d1);
  s.run_until_idle(c, exec, 2);
  for (const auto& t : s.instances()) EXPECT_EQ(t.state, TaskState::done);
  EXPECT_THROW(s.dispatch(c, exec, 0), Error);
}

TEST(Scheduler, FailuresRetryThenStick) {
  Catalog c;
  c.register_table(table("a"));
  c.mark_ready("a", kDay);
  Scheduler s(SchedulerConfig{1});
  s.check_cycle(c, kDay);
  RecordingExecutor exec;
  exec.fail_remaining = 2;
  s.run_until_idle(c, exec, 1);
  const TaskInstance* mapping = s.find(TaskKind::id_mapping, "", kDay);
  EXPECT_EQ(mapping->state, TaskState::failed);
  EXPECT_EQ(mapping->attempts, 2u);
  EXPECT_EQ(mapping->last_error, "boom");
  EXPECT_EQ(s.find(TaskKind::bitmap_build, "", kDay)->state, TaskState::waiting);
  ASSERT_FALSE(s.event_log().empty());
  EXPECT_NE(s.event_log().back().find("failed"), std::string::npos);

  s.reset_day(kDay);
  EXPECT_TRUE(s.instances().empty());
  s.check_cycle(c, kDay);
  s.run_until_idle(c, exec, 1);
  EXPECT_EQ(s.find(TaskKind::bitmap_build, "", kDay)->state, TaskState::done);
}

TEST(Scheduler, PersistenceResumesInterruptedTasks) {
  test::TempDir dir;
  Catalog c;
  c.register_table(table("a"));
  c.mark_ready("a", kDay);
  Scheduler s;
  s.check_cycle(c, kDay);
  std::string text = s.to_json();
  const std::string from = "\"state\": \"runnable\"";
  text.replace(text.find(from), from.size(), "\"state\": \"running\"");
  const Scheduler back = Scheduler::from_json(text);
  EXPECT_EQ(back.instances()[0].state, TaskState::runnable);
  s.save(dir / "tasks.json");
  EXPECT_EQ(Scheduler::load(dir / "tasks.json").instances(), s.instances());
  EXPECT_TRUE(Scheduler::load(dir / "none.json").instances().empty());
  EXPECT_THROW(Scheduler::from_json("[]"), Error);
}

TEST(Scheduler, EventLogIsDeterministic) {
  auto run = [] {
    Catalog c;
    c.register_table(table("a"));
    c.mark_ready("a", kDay);
    Scheduler s;
    s.check_cycle(c, kDay);
    RecordingExecutor exec;
    s.run_until_idle(c, exec, 3);
    return s.event_log();
  };
  const auto log = run();
  EXPECT_EQ(log, run());
  EXPECT_EQ(log.back(), "round 2: done #2 bitmap-build@2024-06-01");
}
