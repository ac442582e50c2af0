#include <doctest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "stmlmc/scheduler.hpp"

using namespace stmlmc;

TEST_CASE("batches cover each level contiguously") {
  const std::vector<Index> counts{10, 7, 1};
  const std::vector<int> pools{3, 2, 4};
  const auto plan = plan_batches(counts, pools);
  CHECK(plan.total_workers() == 9);
  CHECK(plan.batch_size == std::vector<Index>{4, 4, 1});
  std::vector<Index> covered(3, 0);
  int prev_level = -1;
  Index prev_end = 0;
  for (const auto& t : plan.tasks) {
    if (t.level != prev_level) {
      CHECK(t.level > prev_level);
      CHECK(t.begin == 0);
      prev_level = t.level;
    } else {
      CHECK(t.begin == prev_end);
    }
    prev_end = t.end;
    CHECK(t.size() >= 1);
    covered[t.level] += t.size();
  }
  CHECK(covered == counts);
  // sizes within a level differ by at most one
  for (int l = 0; l < 3; ++l) {
    Index lo = 1 << 30, hi = 0;
    for (const auto& t : plan.tasks)
      if (t.level == l) {
        lo = std::min(lo, t.size());
        hi = std::max(hi, t.size());
      }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("batch offsets shift sample indices") {
  const std::vector<Index> counts{4}, offsets{100};
  const std::vector<int> pools{2};
  const auto plan = plan_batches(counts, pools, offsets);
  REQUIRE(plan.tasks.size() == 2);
  CHECK(plan.tasks[0].begin == 100);
  CHECK(plan.tasks[1].end == 104);
  CHECK_THROWS_AS(plan_batches(counts, std::vector<int>{0}), ConfigError);
  CHECK_THROWS_AS(plan_batches(counts, std::vector<int>{1, 1}), ConfigError);
}

TEST_CASE("default pools") {
  const std::vector<Index> counts{4096, 256, 16, 1};
  const std::vector<double> cost{1, 4, 16, 64};
  const auto p = default_pools(counts, cost, 16);
  CHECK(p.size() == 4);
  CHECK(std::accumulate(p.begin(), p.end(), 0) <= 16);
  for (std::size_t l = 0; l < p.size(); ++l) {
    CHECK(p[l] >= 1);
    CHECK(p[l] <= counts[l]);
  }
  CHECK(p[0] >= p[3]);
  CHECK(default_pools(counts, cost, 1) == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("execution stores results by task regardless of interleaving") {
  const std::vector<Index> counts{50, 20};
  const std::vector<int> pools{4, 3};
  const auto plan = plan_batches(counts, pools);
  const auto exec = execute<long>(plan, [](int level, Index i) { return static_cast<long>(level) * 1000 + i; });
  REQUIRE(exec.results.size() == plan.tasks.size());
  for (std::size_t t = 0; t < plan.tasks.size(); ++t) {
    const auto& r = exec.results[t];
    CHECK(r.level == plan.tasks[t].level);
    CHECK(r.begin == plan.tasks[t].begin);
    for (Index i = r.begin; i < r.end; ++i) CHECK(r.payload[i - r.begin] == r.level * 1000 + i);
  }
  std::set<int> workers;
  for (const auto& e : exec.trace) {
    workers.insert(e.worker);
    CHECK(e.end >= e.start);
  }
  CHECK(workers.size() <= 7);
  std::ostringstream csv;
  write_trace_csv(csv, exec.trace);
  CHECK(csv.str().rfind("level,batch,worker,start_s,end_s\n", 0) == 0);
}

TEST_CASE("failures abort the run and keep their category") {
  const std::vector<Index> counts{40};
  const std::vector<int> pools{3};
  const auto plan = plan_batches(counts, pools);
  auto failing = [](int, Index i) -> int {
    if (i == 17) throw SolverError("diverged", 3.5);
    return 0;
  };
  try {
    execute<int>(plan, failing);
    FAIL("expected an exception");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("sample 17") != std::string::npos);
    CHECK(e.last_residual() == 3.5);
  }
  auto config_fail = [](int, Index) -> int { throw ConfigError("bad"); };
  CHECK_THROWS_AS(execute<int>(plan, config_fail), ConfigError);
}

TEST_CASE("seed keys") {
  CHECK(seed_for(5, 2, 9) == StreamKey{5, 2, 9});
}
