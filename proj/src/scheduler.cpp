#include "stmlmc/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace stmlmc {

int SchedulePlan::total_workers() const { return std::accumulate(pools.begin(), pools.end(), 0); }

SchedulePlan plan_batches(std::span<const Index> counts, std::span<const int> pools, std::span<const Index> offsets) {
  if (counts.size() != pools.size()) throw ConfigError("plan_batches: one pool size per level required");
  if (!offsets.empty() && offsets.size() != counts.size()) throw ConfigError("plan_batches: offsets size mismatch");
  SchedulePlan plan;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    const Index n = counts[l];
    if (n < 0) throw ConfigError("plan_batches: negative sample count");
    if (pools[l] < 1) throw ConfigError("plan_batches: pool sizes must be >= 1");
    const Index p = std::max<Index>(1, std::min<Index>(pools[l], n));
    plan.pools.push_back(pools[l]);
    plan.batch_size.push_back(n == 0 ? 0 : (n + p - 1) / p);
    if (n == 0) continue;
    const Index base = offsets.empty() ? 0 : offsets[l];
    const Index q = n / p, r = n % p;
    Index begin = base;
    for (Index j = 0; j < p; ++j) {
      const Index size = q + (j < r ? 1 : 0);
      plan.tasks.push_back({static_cast<int>(l), static_cast<int>(j), begin, begin + size});
      begin += size;
    }
  }
  return plan;
}

std::vector<int> default_pools(std::span<const Index> counts, std::span<const double> cost_per_sample, int workers) {
  const std::size_t L = counts.size();
  std::vector<double> w(L);
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    w[l] = static_cast<double>(counts[l]) * (l < cost_per_sample.size() ? cost_per_sample[l] : 1.0);
    total += w[l];
  }
  std::vector<int> p(L, 1);
  if (workers <= static_cast<int>(L) || total <= 0.0) return p;
  for (std::size_t l = 0; l < L; ++l) {
    const int share = static_cast<int>(std::lround(workers * w[l] / total));
    p[l] = std::clamp<int>(share, 1, std::max<Index>(1, counts[l]));
  }
  int sum = std::accumulate(p.begin(), p.end(), 0);
  while (sum > workers) {
    auto it = std::max_element(p.begin(), p.end());
    if (*it <= 1) break;
    --*it;
    --sum;
  }
  return p;
}

void write_trace_csv(std::ostream& out, std::span<const TraceEntry> trace) {
  out << "level,batch,worker,start_s,end_s\n";
  for (const auto& t : trace) out << t.level << ',' << t.batch << ',' << t.worker << ',' << t.start << ',' << t.end << '\n';
}

namespace detail {

void raise_failures(std::vector<Failure> failures) {
  std::sort(failures.begin(), failures.end(),
            [](const Failure& a, const Failure& b) { return a.level != b.level ? a.level < b.level : a.index < b.index; });
  std::string msg = std::to_string(failures.size()) + " sample solve(s) failed:";
  for (const auto& f : failures)
    msg += " [level " + std::to_string(f.level) + ", sample " + std::to_string(f.index) + "] " + f.message + ";";
  try {
    std::rethrow_exception(failures.front().error);
  } catch (const SolverError& e) {
    throw SolverError(msg, e.last_residual());
  } catch (const EllipticityError&) {
    throw EllipticityError(msg);
  } catch (const ConfigError&) {
    throw ConfigError(msg);
  } catch (...) {
    throw Error(msg);
  }
}

} // namespace detail

} // namespace stmlmc
