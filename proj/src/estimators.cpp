#include "stmlmc/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace stmlmc {

void EstimatorConfig::validate() const {
  if (level < 0) throw ConfigError("estimator level must be >= 0");
  const std::size_t expected = kind == EstimatorKind::mc ? 1 : static_cast<std::size_t>(level) + 1;
  if (samples.size() != expected)
    throw ConfigError("estimator needs " + std::to_string(expected) + " sample count(s), got " +
                      std::to_string(samples.size()));
  for (Index n : samples)
    if (n < 1) throw ConfigError("sample counts must be >= 1");
  if (!pools.empty() && pools.size() != samples.size())
    throw ConfigError("pool spec needs one entry per estimator level");
  for (int p : pools)
    if (p < 1) throw ConfigError("pool sizes must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (memory_budget == 0) throw ConfigError("memory budget must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

struct SamplePayload {
  std::vector<double> field;  ///< sample (MC) or correction (MLMC)
  std::vector<double> second; ///< u_l^2 - (I u_{l-1})^2 (MLMC only)
  double norm = 0.0;
  double fine_seconds = 0.0;
  double coarse_seconds = 0.0;
  int newton = 0;
  int gmres = 0;
};

struct Term {
  int level;
  std::uint32_t tag;
  bool coarse;
  Index samples;
};

struct TermAccumulator {
  std::vector<double> sum;
  std::vector<double> shifted;    ///< MC: sum of (u - shift)
  std::vector<double> shifted_sq; ///< MC: sum of (u - shift)^2
  std::vector<double> second;     ///< MLMC: sum of second-moment corrections
  double norm_mean = 0.0, norm_m2 = 0.0;
  Index count = 0;
  long newton = 0, gmres = 0;
  double seconds = 0.0;
};

EstimatorResult run(const ForwardModel& model, const TransferChain* chain, const EstimatorConfig& config) {
  config.validate();
  const bool mlmc = config.kind == EstimatorKind::mlmc;
  if (config.level > model.finest())
    throw ConfigError("estimator level " + std::to_string(config.level) + " exceeds hierarchy depth " +
                      std::to_string(model.finest()));
  if (mlmc && (chain == nullptr || chain->finest() < config.level))
    throw ConfigError("MLMC needs transfer operators up to level " + std::to_string(config.level));

  std::vector<Term> terms;
  if (mlmc) {
    for (int l = 0; l <= config.level; ++l) {
      const std::uint32_t tag = config.tag_offset + static_cast<std::uint32_t>(config.shared_samples ? config.level : l);
      terms.push_back({l, tag, l > 0, config.samples[l]});
    }
  } else {
    terms.push_back({config.level, config.tag_offset + static_cast<std::uint32_t>(config.level), false, config.samples[0]});
  }
  const std::size_t T = terms.size();
  const int M = model.kl().dimension();
  const auto& H = model.hierarchy();

  std::vector<BochnerNorm> norms;
  for (int l = 0; l <= model.finest(); ++l) norms.emplace_back(model.mass(l), H.level(l).spec.dt);

  std::vector<Index> counts(T);
  std::vector<double> cost_guess(T);
  std::size_t windows = 1;
  for (std::size_t t = 0; t < T; ++t) {
    counts[t] = terms[t].samples;
    const std::size_t size = H.level(terms[t].level).spec.spacetime_size();
    cost_guess[t] = static_cast<double>(size) * (terms[t].coarse ? 1.5 : 1.0);
    const std::size_t bytes = size * sizeof(double) * (mlmc ? 2 : 1);
    const std::size_t per_window = std::max<std::size_t>(1, config.memory_budget / bytes);
    windows = std::max(windows, (static_cast<std::size_t>(counts[t]) + per_window - 1) / per_window);
  }
  const std::vector<int> pools = config.pools.empty() ? default_pools(counts, cost_guess, config.workers) : config.pools;

  std::vector<TermAccumulator> acc(T);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t size = H.level(terms[t].level).spec.spacetime_size();
    acc[t].sum.assign(size, 0.0);
    if (mlmc) {
      acc[t].second.assign(size, 0.0);
    } else {
      acc[t].shifted.assign(size, 0.0);
      acc[t].shifted_sq.assign(size, 0.0);
    }
  }
  std::vector<double> solve_seconds(static_cast<std::size_t>(model.finest()) + 1, 0.0);
  std::vector<long> solve_counts(solve_seconds.size(), 0);

  auto task = [&](int term_index, Index i) {
    const Term& term = terms[term_index];
    const SampleVector y = draw_sample(config.master_seed, term.tag, static_cast<std::uint64_t>(i), M);
    SamplePayload out;
    SolveStats st;
    auto t0 = Clock::now();
    SpaceTimeField u = model.solve(term.level, y.y, &st);
    out.fine_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.newton = st.newton_iterations;
    out.gmres = st.total_gmres_iterations();
    if (!mlmc) {
      out.norm = norms[term.level](u);
      out.field = std::move(u.values);
      return out;
    }
    out.second.resize(u.values.size());
    if (term.coarse) {
      t0 = Clock::now();
      const SpaceTimeField uc = model.solve(term.level - 1, y.y, &st);
      out.coarse_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      out.newton += st.newton_iterations;
      out.gmres += st.total_gmres_iterations();
      const SpaceTimeField ic = spacetime_apply(chain->pair(term.level), Direction::prolongation, uc);
      for (std::size_t k = 0; k < u.values.size(); ++k) {
        out.second[k] = u.values[k] * u.values[k] - ic.values[k] * ic.values[k];
        u.values[k] -= ic.values[k];
      }
    } else {
      for (std::size_t k = 0; k < u.values.size(); ++k) out.second[k] = u.values[k] * u.values[k];
    }
    out.norm = norms[term.level](u);
    out.field = std::move(u.values);
    return out;
  };

  EstimatorResult result;
  result.kind = config.kind;
  result.level = config.level;
  result.master_seed = config.master_seed;

  for (std::size_t w = 0; w < windows; ++w) {
    std::vector<Index> wc(T), wo(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto n = static_cast<long long>(counts[t]);
      wo[t] = static_cast<Index>(n * static_cast<long long>(w) / static_cast<long long>(windows));
      wc[t] = static_cast<Index>(n * static_cast<long long>(w + 1) / static_cast<long long>(windows)) - wo[t];
    }
    const SchedulePlan plan = plan_batches(wc, pools, wo);
    Execution<SamplePayload> exec = execute<SamplePayload>(plan, task);
    for (auto& e : exec.trace) result.trace.push_back(e);

    for (auto& res : exec.results) {
      const std::size_t t = static_cast<std::size_t>(res.level);
      TermAccumulator& a = acc[t];
      const int l = terms[t].level;
      const std::vector<double>* shift = mlmc ? nullptr : &model.unperturbed(l).values;
      a.seconds += res.seconds;
      for (auto& p : res.payload) {
        for (std::size_t k = 0; k < a.sum.size(); ++k) a.sum[k] += p.field[k];
        if (mlmc) {
          for (std::size_t k = 0; k < a.sum.size(); ++k) a.second[k] += p.second[k];
        } else {
          for (std::size_t k = 0; k < a.sum.size(); ++k) {
            const double d = p.field[k] - (*shift)[k];
            a.shifted[k] += d;
            a.shifted_sq[k] += d * d;
          }
        }
        ++a.count;
        const double delta = p.norm - a.norm_mean;
        a.norm_mean += delta / static_cast<double>(a.count);
        a.norm_m2 += delta * (p.norm - a.norm_mean);
        a.newton += p.newton;
        a.gmres += p.gmres;
        solve_seconds[l] += p.fine_seconds;
        ++solve_counts[l];
        if (terms[t].coarse) {
          solve_seconds[l - 1] += p.coarse_seconds;
          ++solve_counts[l - 1];
        }
        result.work_seconds += p.fine_seconds + p.coarse_seconds;
      }
    }
  }

  const LevelSpec& spec = H.level(config.level).spec;
  result.mean = SpaceTimeField(config.level, spec.n_nodes, spec.n_timesteps);
  result.variance = SpaceTimeField(config.level, spec.n_nodes, spec.n_timesteps);

  for (std::size_t t = 0; t < T; ++t) {
    const TermAccumulator& a = acc[t];
    const Term& term = terms[t];
    const LevelSpec& ls = H.level(term.level).spec;
    LevelStatistics s;
    s.level = term.level;
    s.samples = a.count;
    s.tag = term.tag;
    s.mean_correction_norm = a.norm_mean;
    s.var_correction_norm = a.count > 1 ? a.norm_m2 / static_cast<double>(a.count - 1) : 0.0;
    s.newton_iterations = a.newton;
    s.gmres_iterations = a.gmres;
    s.seconds = a.seconds;
    s.fine_solve_seconds = 0.0;
    result.per_level.push_back(s);

    SpaceTimeField level_mean(term.level, ls.n_nodes, ls.n_timesteps);
    const double N = static_cast<double>(a.count);
    for (std::size_t k = 0; k < a.sum.size(); ++k) level_mean.values[k] = a.sum[k] / N;
    result.level_means.push_back(level_mean);
  }

  if (!mlmc) {
    const TermAccumulator& a = acc[0];
    const double N = static_cast<double>(a.count);
    result.mean = result.level_means[0];
    if (a.count > 1)
      for (std::size_t k = 0; k < a.sum.size(); ++k)
        result.variance.values[k] = std::max(0.0, (a.shifted_sq[k] - a.shifted[k] * a.shifted[k] / N) / (N - 1.0));
  } else {
    std::vector<double> second_moment(spec.spacetime_size(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const SpaceTimeField pm = chain->prolong_to(result.level_means[t], config.level);
      for (std::size_t k = 0; k < pm.values.size(); ++k) result.mean.values[k] += pm.values[k];
      const LevelSpec& ls = H.level(terms[t].level).spec;
      SpaceTimeField sm(terms[t].level, ls.n_nodes, ls.n_timesteps);
      const double N = static_cast<double>(acc[t].count);
      for (std::size_t k = 0; k < sm.values.size(); ++k) sm.values[k] = acc[t].second[k] / N;
      const SpaceTimeField psm = chain->prolong_to(sm, config.level);
      for (std::size_t k = 0; k < psm.values.size(); ++k) second_moment[k] += psm.values[k];
    }
    double scale = 0.0;
    for (double v : second_moment) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * scale;
    for (std::size_t k = 0; k < second_moment.size(); ++k) {
      double v = second_moment[k] - result.mean.values[k] * result.mean.values[k];
      if (v < 0.0) {
        if (v >= -tol) {
          ++result.clamped_variance_nodes;
        } else {
          ++result.negative_variance_nodes;
          result.most_negative_variance = std::min(result.most_negative_variance, v);
        }
        v = 0.0;
      }
      result.variance.values[k] = v;
    }
  }

  result.cost_per_sample.assign(static_cast<std::size_t>(config.level) + 1, 0.0);
  result.solve_counts.assign(solve_counts.begin(), solve_counts.begin() + config.level + 1);
  for (int l = 0; l <= config.level; ++l)
    if (solve_counts[l] > 0) result.cost_per_sample[l] = solve_seconds[l] / static_cast<double>(solve_counts[l]);
  for (auto& s : result.per_level) {
    s.fine_solve_seconds = result.cost_per_sample[s.level];
    s.coarse_solve_seconds = s.level > 0 && mlmc ? result.cost_per_sample[s.level - 1] : 0.0;
  }
  return result;
}

} // namespace

EstimatorResult mc_estimate(const ForwardModel& model, const EstimatorConfig& config) {
  if (config.kind != EstimatorKind::mc) throw ConfigError("mc_estimate needs an MC configuration");
  return run(model, nullptr, config);
}

EstimatorResult mlmc_estimate(const ForwardModel& model, const TransferChain& chain, const EstimatorConfig& config) {
  if (config.kind != EstimatorKind::mlmc) throw ConfigError("mlmc_estimate needs an MLMC configuration");
  return run(model, &chain, config);
}

EstimatorResult estimate(const ForwardModel& model, const TransferChain& chain, const EstimatorConfig& config) {
  return config.kind == EstimatorKind::mc ? mc_estimate(model, config) : mlmc_estimate(model, chain, config);
}

std::vector<Index> sample_counts(int L, double n_coarse, double beta) {
  if (L < 0) throw ConfigError("sample_counts: L must be >= 0");
  if (!(beta > 1.0)) throw ConfigError("sample_counts: beta must exceed 1");
  if (!(n_coarse >= 1.0)) throw ConfigError("sample_counts: N_coarse must be >= 1");
  std::vector<Index> n;
  for (int l = 0; l <= L; ++l)
    n.push_back(std::max<Index>(1, static_cast<Index>(std::llround(n_coarse * std::pow(beta, -l)))));
  return n;
}

BochnerNorm::BochnerNorm(const SparseOperator& mass, double dt) : weight_(mass), dt_(dt) {}

BochnerNorm::BochnerNorm(const SparseOperator& mass, const SparseOperator& stiffness, double dt)
    : weight_(add(1.0, mass, 1.0, stiffness)), dt_(dt) {}

double BochnerNorm::squared(std::span<const double> v) const {
  const std::size_t n = static_cast<std::size_t>(weight_.rows());
  if (n == 0 || v.size() % n != 0) throw ConfigError("BochnerNorm: field size does not match the level");
  std::vector<double> mv(n);
  double s = 0.0;
  for (std::size_t k = 0; k < v.size() / n; ++k) {
    const auto vk = v.subspan(k * n, n);
    weight_.multiply(vk, mv);
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) q += vk[i] * mv[i];
    s += dt_ * q;
  }
  return s;
}

double BochnerNorm::operator()(std::span<const double> v) const { return std::sqrt(std::max(0.0, squared(v))); }

double rmse(std::span<const SpaceTimeField> estimates, const SpaceTimeField& reference, const BochnerNorm& norm) {
  if (estimates.empty()) throw ConfigError("rmse: no estimates");
  double s = 0.0;
  std::vector<double> e(reference.values.size());
  for (const auto& est : estimates) {
    if (est.level != reference.level || est.values.size() != reference.values.size())
      throw ConfigError("rmse: estimate on level " + std::to_string(est.level) + ", reference on level " +
                        std::to_string(reference.level));
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = est.values[k] - reference.values[k];
    s += norm.squared(e);
  }
  return std::sqrt(s / static_cast<double>(estimates.size()));
}

WorkReport work_report(std::span<const double> w_prime, std::span<const Index> mlmc_samples, Index mc_samples) {
  if (w_prime.empty() || w_prime.size() != mlmc_samples.size())
    throw ConfigError("work_report: need one cost and one sample count per level");
  for (double w : w_prime)
    if (!(w > 0.0)) throw ConfigError("work_report: per-sample costs must be positive");
  WorkReport r;
  r.w_prime.assign(w_prime.begin(), w_prime.end());
  r.samples.assign(mlmc_samples.begin(), mlmc_samples.end());
  r.mc_samples = mc_samples;
  const std::size_t L = w_prime.size() - 1;
  for (std::size_t l = 0; l <= L; ++l) {
    r.w_level.push_back(w_prime[l] + (l > 0 ? w_prime[l - 1] : 0.0));
    r.w_mlmc += r.w_level[l] * static_cast<double>(mlmc_samples[l]);
  }
  r.w_mc = w_prime[L] * static_cast<double>(mc_samples);
  for (std::size_t l = 0; l < L; ++l) r.gamma_d += std::log2(w_prime[l + 1] / w_prime[l]);
  if (L > 0) r.gamma_d /= static_cast<double>(L);
  return r;
}

WorkReport asymptotic_work(std::span<const double> w_prime) {
  if (w_prime.empty()) throw ConfigError("asymptotic_work: need at least one level");
  const int L = static_cast<int>(w_prime.size()) - 1;
  WorkReport r;
  r.w_prime.assign(w_prime.begin(), w_prime.end());
  r.w_level = r.w_prime;
  for (int l = 0; l <= L; ++l) r.samples.push_back(static_cast<Index>(std::llround(std::exp2(4.0 * (L - l)))));
  for (int l = 0; l < L; ++l) r.w_mlmc += w_prime[l] * std::exp2(4.0 * (L - l));
  r.mc_samples = r.samples.front();
  r.w_mc = w_prime[L] * std::exp2(4.0 * L);
  for (int l = 0; l < L; ++l) r.gamma_d += std::log2(w_prime[l + 1] / w_prime[l]);
  if (L > 0) r.gamma_d /= L;
  return r;
}

WorkReport work_model(double gamma_d, int L) {
  if (L < 0) throw ConfigError("work_model: L must be >= 0");
  std::vector<double> w;
  for (int l = 0; l <= L; ++l) w.push_back(std::exp2(gamma_d * l));
  WorkReport r = asymptotic_work(w);
  r.gamma_d = gamma_d;
  return r;
}

} // namespace stmlmc
