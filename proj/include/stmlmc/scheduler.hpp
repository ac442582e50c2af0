#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stmlmc/common.hpp"
#include "stmlmc/random_field.hpp"

namespace stmlmc {

/// Contiguous sample range [begin, end) of one level, run by the level's pool.
struct BatchTask {
  int level = 0;
  int batch = 0;
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
};

struct SchedulePlan {
  std::vector<BatchTask> tasks; ///< ordered by (level, begin)
  std::vector<int> pools;       ///< p_l
  std::vector<Index> batch_size; ///< ceil(N_l / p_l)

  int total_workers() const;
};

/// Splits N_l samples of each level into p_l contiguous batches whose sizes
/// differ by at most one. Sample indices start at offsets[l] (0 when empty).
SchedulePlan plan_batches(std::span<const Index> counts, std::span<const int> pools,
                          std::span<const Index> offsets = {});

/// Pool sizes proportional to N_l * cost_l summing to about `workers`, each at
/// least 1 and at most N_l.
std::vector<int> default_pools(std::span<const Index> counts, std::span<const double> cost_per_sample, int workers);

/// Stream key of sample `index` on level tag `level`.
inline StreamKey seed_for(std::uint64_t master_seed, std::uint32_t level, std::uint64_t index) {
  return StreamKey{master_seed, level, index};
}

template <class Payload>
struct TaskResult {
  int level = 0;
  Index begin = 0;
  Index end = 0;
  std::vector<Payload> payload;
  double seconds = 0.0;
};

struct TraceEntry {
  int level = 0;
  int batch = 0;
  int worker = 0;
  double start = 0.0; ///< seconds since execution start
  double end = 0.0;
};

void write_trace_csv(std::ostream& out, std::span<const TraceEntry> trace);

template <class Payload>
struct Execution {
  std::vector<TaskResult<Payload>> results; ///< same order as plan.tasks
  std::vector<TraceEntry> trace;
};

namespace detail {

struct Failure {
  int level;
  Index index;
  std::string message;
  std::exception_ptr error;
};

/// Rethrows the first failure with a message listing all of them.
[[noreturn]] void raise_failures(std::vector<Failure> failures);

} // namespace detail

/// Runs every task with one worker pool per level (p_l threads). Workers take
/// the next unclaimed batch of their own level. Results are stored by task, so
/// the output does not depend on the interleaving. On failure, workers finish
/// the sample in progress, take no new work, and all failures are reported.
template <class Payload, class Fn>
Execution<Payload> execute(const SchedulePlan& plan, Fn&& task_fn) {
  using Clock = std::chrono::steady_clock;
  Execution<Payload> exec;
  exec.results.resize(plan.tasks.size());
  exec.trace.resize(plan.tasks.size());

  const int levels = static_cast<int>(plan.pools.size());
  std::vector<std::vector<std::size_t>> level_tasks(static_cast<std::size_t>(levels));
  for (std::size_t t = 0; t < plan.tasks.size(); ++t) level_tasks.at(plan.tasks[t].level).push_back(t);
  std::vector<std::atomic<std::size_t>> next(static_cast<std::size_t>(levels));
  for (auto& n : next) n.store(0);

  std::atomic<bool> abort{false};
  std::mutex failure_mutex;
  std::vector<detail::Failure> failures;
  const auto t0 = Clock::now();

  auto worker = [&](int level, int worker_id) {
    const auto& mine = level_tasks[level];
    while (!abort.load()) {
      const std::size_t slot = next[level].fetch_add(1);
      if (slot >= mine.size()) return;
      const std::size_t t = mine[slot];
      const BatchTask& task = plan.tasks[t];
      TaskResult<Payload>& res = exec.results[t];
      res.level = task.level;
      res.begin = task.begin;
      res.end = task.end;
      res.payload.reserve(static_cast<std::size_t>(task.size()));
      const auto start = Clock::now();
      for (Index i = task.begin; i < task.end; ++i) {
        if (abort.load()) break;
        try {
          res.payload.push_back(task_fn(task.level, i));
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          failures.push_back({task.level, i, e.what(), std::current_exception()});
          abort.store(true);
          break;
        }
      }
      const auto stop = Clock::now();
      res.seconds = std::chrono::duration<double>(stop - start).count();
      exec.trace[t] = {task.level, task.batch, worker_id, std::chrono::duration<double>(start - t0).count(),
                       std::chrono::duration<double>(stop - t0).count()};
    }
  };

  std::vector<std::thread> threads;
  int worker_id = 0;
  for (int l = 0; l < levels; ++l)
    for (int p = 0; p < plan.pools[l]; ++p) threads.emplace_back(worker, l, worker_id++);
  for (auto& th : threads) th.join();

  if (!failures.empty()) detail::raise_failures(std::move(failures));
  for (const auto& r : exec.results)
    if (static_cast<Index>(r.payload.size()) != r.end - r.begin) throw Error("scheduler: incomplete batch result");
  return exec;
}

} // namespace stmlmc
