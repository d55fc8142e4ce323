#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "bitup/catalog.hpp"
#include "bitup/day.hpp"

namespace bitup {

enum class TaskKind { id_mapping, bitmap_build };
enum class TaskState { waiting, runnable, running, done, failed };

std::string_view to_string(TaskKind kind);
std::string_view to_string(TaskState state);

struct TaskInstance {
  uint64_t id = 0;  // creation order, starting at 1
  TaskKind kind = TaskKind::id_mapping;
  std::string target;
  Day day;
  TaskState state = TaskState::waiting;
  int priority = 0;
  std::vector<uint64_t> dependencies;
  uint32_t attempts = 0;
  std::string last_error;

  /// Lineage node id of this task in the catalog.
  std::string entity() const;
  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

/// Catalog changes a task wants applied; the control loop applies them in
/// dispatch order after the round completes.
struct TaskResult {
  std::vector<std::function<void(Catalog&)>> catalog_updates;
};

/// Execution platform. execute() may run concurrently for different
/// instances and must treat the catalog as read-only; failures are thrown.
class TaskExecutor {
 public:
  virtual ~TaskExecutor() = default;
  virtual TaskResult execute(const TaskInstance& task, const Catalog& catalog) = 0;
};

struct DispatchOutcome {
  uint64_t instance = 0;
  TaskState state = TaskState::done;
  double duration_ms = 0.0;
  std::string error;
};

struct SchedulerConfig {
  uint32_t max_retries = 0;
};

/// Task manager: a checker creating id-mapping and bitmap-build instances per
/// day from catalog readiness, and a priority dispatcher gated on
/// dependencies. Deterministic for a fixed catalog history and budget.
class Scheduler {
 public:
  explicit Scheduler(SchedulerConfig config = {}) : config_(config) {}

  /// Creates the day's instances once the day has a ready table. Idempotent.
  /// Instances stay waiting until every table registered for the day is ready.
  std::vector<TaskInstance> check_cycle(const Catalog& catalog, Day day);

  /// Adds an instance directly; returns its id.
  uint64_t add_instance(TaskKind kind, std::string target, Day day, int priority,
                        std::vector<uint64_t> dependencies);

  /// Promotes waiting instances whose dependencies are done and whose day's
  /// tables are all ready.
  void refresh(const Catalog& catalog);

  /// One round: runs up to `budget` runnable instances concurrently, highest
  /// priority first, ties by creation order. Task errors become failed state.
  std::vector<DispatchOutcome> dispatch(Catalog& catalog, TaskExecutor& executor, uint32_t budget);

  /// Dispatch rounds until nothing is runnable.
  std::vector<DispatchOutcome> run_until_idle(Catalog& catalog, TaskExecutor& executor,
                                              uint32_t budget);

  /// Forgets a day's instances so the next check_cycle recreates them.
  void reset_day(Day day);

  const std::vector<TaskInstance>& instances() const noexcept { return instances_; }
  const TaskInstance* find(TaskKind kind, std::string_view target, Day day) const;
  const TaskInstance& instance(uint64_t id) const;
  const std::vector<std::string>& event_log() const noexcept { return events_; }

  std::string to_json() const;
  /// Instances found running were interrupted; they restart as runnable.
  static Scheduler from_json(std::string_view text, SchedulerConfig config = {});
  void save(const std::filesystem::path& path) const;
  static Scheduler load(const std::filesystem::path& path, SchedulerConfig config = {});

 private:
  TaskInstance& instance_mut(uint64_t id);
  bool day_ready(const Catalog& catalog, Day day) const;

  SchedulerConfig config_;
  std::vector<TaskInstance> instances_;
  uint64_t next_id_ = 1;
  uint64_t round_ = 0;
  std::vector<std::string> events_;
};

}  // namespace bitup
