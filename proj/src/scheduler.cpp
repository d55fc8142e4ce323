#include "bitup/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <nlohmann/json.hpp>

#include "bitup/error.hpp"
#include "bitup/file_io.hpp"

namespace bitup {
using nlohmann::json;

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::id_mapping ? "id-mapping" : "bitmap-build";
}

std::string_view to_string(TaskState state) {
  switch (state) {
    case TaskState::waiting: return "waiting";
    case TaskState::runnable: return "runnable";
    case TaskState::running: return "running";
    case TaskState::done: return "done";
    case TaskState::failed: return "failed";
  }
  return "unknown";
}

namespace {

TaskKind kind_from(std::string_view s) {
  if (s == "id-mapping") return TaskKind::id_mapping;
  if (s == "bitmap-build") return TaskKind::bitmap_build;
  throw Error(ErrorCode::corruption, "tasks: unknown kind '" + std::string(s) + "'");
}

TaskState state_from(std::string_view s) {
  for (auto st : {TaskState::waiting, TaskState::runnable, TaskState::running, TaskState::done,
                  TaskState::failed}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::corruption, "tasks: unknown state '" + std::string(s) + "'");
}

std::string describe(const TaskInstance& t) {
  std::string s = "#" + std::to_string(t.id) + " " + std::string(to_string(t.kind));
  if (!t.target.empty()) s += ":" + t.target;
  return s + "@" + t.day.to_string();
}

}  // namespace

std::string TaskInstance::entity() const {
  std::string kind_target(to_string(kind));
  if (!target.empty()) kind_target += ":" + target;
  return task_entity(kind_target, day);
}

uint64_t Scheduler::add_instance(TaskKind kind, std::string target, Day day, int priority,
                                 std::vector<uint64_t> dependencies) {
  if (find(kind, target, day) != nullptr) {
    throw Error(ErrorCode::duplicate_name, "task instance already exists");
  }
  for (uint64_t dep : dependencies) instance(dep);
  TaskInstance t;
  t.id = next_id_++;
  t.kind = kind;
  t.target = std::move(target);
  t.day = day;
  t.priority = priority;
  t.dependencies = std::move(dependencies);
  instances_.push_back(std::move(t));
  return instances_.back().id;
}

std::vector<TaskInstance> Scheduler::check_cycle(const Catalog& catalog, Day day) {
  std::vector<TaskInstance> created;
  const auto tables = catalog.tables_for_day(day);
  const bool any_ready = std::any_of(tables.begin(), tables.end(), [](const TableMeta* t) {
    return t->readiness == Readiness::ready;
  });
  if (any_ready && find(TaskKind::id_mapping, "", day) == nullptr) {
    int priority = 0;
    for (const TableMeta* t : tables) priority = std::max(priority, t->priority);
    const uint64_t mapping = add_instance(TaskKind::id_mapping, "", day, priority, {});
    created.push_back(instance(mapping));
    if (find(TaskKind::bitmap_build, "", day) == nullptr) {
      const uint64_t build = add_instance(TaskKind::bitmap_build, "", day, priority, {mapping});
      created.push_back(instance(build));
    }
    events_.push_back("check " + day.to_string() + ": created " +
                      std::to_string(created.size()) + " instances");
  }
  refresh(catalog);
  return created;
}

bool Scheduler::day_ready(const Catalog& catalog, Day day) const {
  const auto tables = catalog.tables_for_day(day);
  return !tables.empty() && std::all_of(tables.begin(), tables.end(), [](const TableMeta* t) {
           return t->readiness == Readiness::ready;
         });
}

void Scheduler::refresh(const Catalog& catalog) {
  for (auto& t : instances_) {
    if (t.state != TaskState::waiting) continue;
    const bool deps_done = std::all_of(t.dependencies.begin(), t.dependencies.end(), [&](uint64_t d) {
      return instance(d).state == TaskState::done;
    });
    if (!deps_done) continue;
    if (t.kind == TaskKind::id_mapping) {
      if (t.target.empty() ? !day_ready(catalog, t.day) : [&] {
            const TableMeta* meta = catalog.find_table(t.target, t.day);
            return meta == nullptr || meta->readiness != Readiness::ready;
          }()) {
        continue;
      }
    }
    t.state = TaskState::runnable;
  }
}

std::vector<DispatchOutcome> Scheduler::dispatch(Catalog& catalog, TaskExecutor& executor,
                                                 uint32_t budget) {
  if (budget == 0) throw Error(ErrorCode::invalid_argument, "worker budget must be at least 1");
  refresh(catalog);
  std::vector<uint64_t> batch;
  for (const auto& t : instances_) {
    if (t.state == TaskState::runnable) batch.push_back(t.id);
  }
  std::stable_sort(batch.begin(), batch.end(), [&](uint64_t a, uint64_t b) {
    return instance(a).priority > instance(b).priority;
  });
  if (batch.size() > budget) batch.resize(budget);
  if (batch.empty()) return {};

  ++round_;
  for (uint64_t id : batch) {
    TaskInstance& t = instance_mut(id);
    t.state = TaskState::running;
    ++t.attempts;
    events_.push_back("round " + std::to_string(round_) + ": start " + describe(t));
  }

  struct Finished {
    TaskResult result;
    double millis = 0.0;
    std::string error;
    bool ok = false;
  };
  std::vector<std::future<Finished>> running;
  running.reserve(batch.size());
  for (uint64_t id : batch) {
    const TaskInstance snapshot = instance(id);
    running.push_back(std::async(std::launch::async, [&executor, &catalog, snapshot] {
      Finished f;
      const auto start = std::chrono::steady_clock::now();
      try {
        f.result = executor.execute(snapshot, catalog);
        f.ok = true;
      } catch (const std::exception& e) {
        f.error = e.what();
      } catch (...) {
        f.error = "unknown failure";
      }
      f.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                     .count();
      return f;
    }));
  }

  // Every task must finish before the catalog is mutated: tasks read it.
  std::vector<Finished> finished;
  finished.reserve(batch.size());
  for (auto& r : running) finished.push_back(r.get());

  std::vector<DispatchOutcome> outcomes;
  outcomes.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Finished& f = finished[i];
    TaskInstance& t = instance_mut(batch[i]);
    catalog.register_node(t.entity());
    if (f.ok) {
      try {
        for (auto& update : f.result.catalog_updates) update(catalog);
      } catch (const std::exception& e) {
        f.ok = false;
        f.error = std::string("applying catalog updates: ") + e.what();
      }
    }
    DispatchOutcome outcome{t.id, TaskState::done, f.millis, f.error};
    if (f.ok) {
      t.state = TaskState::done;
      t.last_error.clear();
      events_.push_back("round " + std::to_string(round_) + ": done " + describe(t));
    } else {
      t.last_error = f.error;
      t.state = t.attempts <= config_.max_retries ? TaskState::runnable : TaskState::failed;
      outcome.state = t.state;
      events_.push_back("round " + std::to_string(round_) + ": failed " + describe(t) + ": " +
                        f.error);
    }
    catalog.record_task_metrics(
        TaskMetrics{t.entity(), t.day, f.millis, std::string(to_string(outcome.state))});
    outcomes.push_back(std::move(outcome));
  }
  refresh(catalog);
  return outcomes;
}

std::vector<DispatchOutcome> Scheduler::run_until_idle(Catalog& catalog, TaskExecutor& executor,
                                                       uint32_t budget) {
  std::vector<DispatchOutcome> all;
  while (true) {
    auto round = dispatch(catalog, executor, budget);
    if (round.empty()) return all;
    all.insert(all.end(), std::make_move_iterator(round.begin()),
               std::make_move_iterator(round.end()));
  }
}

void Scheduler::reset_day(Day day) {
  std::erase_if(instances_, [&](const TaskInstance& t) { return t.day == day; });
  events_.push_back("reset " + day.to_string());
}

const TaskInstance* Scheduler::find(TaskKind kind, std::string_view target, Day day) const {
  for (const auto& t : instances_) {
    if (t.kind == kind && t.target == target && t.day == day) return &t;
  }
  return nullptr;
}

const TaskInstance& Scheduler::instance(uint64_t id) const {
  for (const auto& t : instances_) {
    if (t.id == id) return t;
  }
  throw Error(ErrorCode::unknown_entity, "unknown task instance #" + std::to_string(id));
}

TaskInstance& Scheduler::instance_mut(uint64_t id) {
  return const_cast<TaskInstance&>(std::as_const(*this).instance(id));
}

std::string Scheduler::to_json() const {
  json list = json::array();
  for (const auto& t : instances_) {
    list.push_back({{"id", t.id},
                    {"kind", to_string(t.kind)},
                    {"target", t.target},
                    {"day", t.day.to_string()},
                    {"state", to_string(t.state)},
                    {"priority", t.priority},
                    {"dependencies", t.dependencies},
                    {"attempts", t.attempts},
                    {"last_error", t.last_error}});
  }
  json doc{{"version", 1}, {"next_id", next_id_}, {"round", round_}, {"instances", list}};
  return doc.dump(2) + "\n";
}

Scheduler Scheduler::from_json(std::string_view text, SchedulerConfig config) {
  try {
    json doc = json::parse(text);
    Scheduler s(config);
    s.next_id_ = doc.at("next_id").get<uint64_t>();
    s.round_ = doc.at("round").get<uint64_t>();
    for (const auto& j : doc.at("instances")) {
      TaskInstance t;
      t.id = j.at("id").get<uint64_t>();
      t.kind = kind_from(j.at("kind").get<std::string>());
      t.target = j.at("target").get<std::string>();
      t.day = Day::parse(j.at("day").get<std::string>());
      t.state = state_from(j.at("state").get<std::string>());
      if (t.state == TaskState::running) t.state = TaskState::runnable;
      t.priority = j.at("priority").get<int>();
      t.dependencies = j.at("dependencies").get<std::vector<uint64_t>>();
      t.attempts = j.at("attempts").get<uint32_t>();
      t.last_error = j.at("last_error").get<std::string>();
      s.instances_.push_back(std::move(t));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corruption, std::string("tasks: ") + e.what());
  }
}

void Scheduler::save(const std::filesystem::path& path) const { write_text_atomic(path, to_json()); }

Scheduler Scheduler::load(const std::filesystem::path& path, SchedulerConfig config) {
  if (!std::filesystem::exists(path)) return Scheduler(config);
  return from_json(read_text_file(path), config);
}

}  // namespace bitup
