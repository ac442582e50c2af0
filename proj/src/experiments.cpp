#include "stmlmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "stmlmc/fem_assembly.hpp"
#include "stmlmc/output.hpp"

namespace stmlmc {

std::unique_ptr<Experiment> make_experiment(const ExperimentConfig& config, int finest_level) {
  const GeometryConfig g = config.geometry();
  const int finest = finest_level < 0 ? g.levels : finest_level;
  auto e = std::make_unique<Experiment>();
  e->hierarchy = build_hierarchy(g.dim, finest, g.base_elements, g.extent, g.end_time, g.base_timesteps);
  const KLOptions kl = config.kl_options();
  e->kl = config.kl_enabled() ? KLExpansion::build(e->hierarchy, config.covariance(), kl)
                              : KLExpansion::deterministic(e->hierarchy, kl.g0);
  e->model = std::make_unique<ForwardModel>(e->hierarchy, e->kl, config.problem());
  e->chain = TransferChain(e->hierarchy, config.transfer());
  return e;
}

RunSettings run_settings(const ExperimentConfig& config) {
  RunSettings r;
  r.seed = config.estimator().seed;
  const SchedulerSettings s = config.scheduler();
  r.workers = s.workers;
  r.pools = s.pools;
  r.memory_budget = s.memory_mb << 20;
  return r;
}

namespace {

EstimatorConfig estimator_config(EstimatorKind kind, int level, std::vector<Index> samples, std::uint32_t tag_offset,
                                 const RunSettings& run) {
  EstimatorConfig c;
  c.kind = kind;
  c.level = level;
  c.samples = std::move(samples);
  c.master_seed = run.seed;
  c.tag_offset = tag_offset;
  c.workers = run.workers;
  if (run.pools.size() == c.samples.size()) c.pools = run.pools;
  c.memory_budget = run.memory_budget;
  return c;
}

Index controlled_samples(int level) { return static_cast<Index>(std::llround(std::exp2(4.0 * level))); }

} // namespace

EstimatorResult reference_estimate(const Experiment& experiment, int level, Index samples, const RunSettings& run) {
  return mc_estimate(*experiment.model,
                     estimator_config(EstimatorKind::mc, level, {samples}, kReferenceTagOffset, run));
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ControlledStudy controlled_convergence(const Experiment& experiment, int L, int repetitions, double beta,
                                       const EstimatorResult& reference, const RunSettings& run) {
  const int R = reference.level;
  if (L > R) throw ConfigError("controlled convergence: reference level must be >= L");
  const auto& H = experiment.hierarchy;
  const BochnerNorm norm(experiment.model->mass(R), H.level(R).spec.dt);
  ControlledStudy study;
  study.reference_level = R;
  study.reference_samples = reference.per_level.front().samples;

  std::vector<double> levels, log_mc, log_mlmc;
  std::vector<double> seconds(static_cast<std::size_t>(L) + 1, 0.0);
  std::vector<long> solves(seconds.size(), 0);
  for (int l = 0; l <= L; ++l) {
    for (EstimatorKind kind : {EstimatorKind::mc, EstimatorKind::mlmc}) {
      ControlledRow row;
      row.kind = kind;
      row.level = l;
      row.samples = kind == EstimatorKind::mc ? std::vector<Index>{controlled_samples(l)}
                                              : sample_counts(l, static_cast<double>(controlled_samples(l)), beta);
      std::vector<SpaceTimeField> estimates;
      double cost = 0.0;
      long count = 0;
      for (int r = 0; r < repetitions; ++r) {
        const auto offset = static_cast<std::uint32_t>(r + 1) * kRepetitionTagStride;
        const EstimatorResult res = estimate(*experiment.model, experiment.chain,
                                             estimator_config(kind, l, row.samples, offset, run));
        estimates.push_back(experiment.chain.prolong_to(res.mean, R));
        for (int j = 0; j <= l; ++j) {
          seconds[j] += res.cost_per_sample[j] * static_cast<double>(res.solve_counts[j]);
          solves[j] += res.solve_counts[j];
        }
        cost += res.cost_per_sample[l] * static_cast<double>(res.solve_counts[l]);
        count += res.solve_counts[l];
      }
      row.rmse = rmse(estimates, reference.mean, norm);
      row.seconds_per_sample = count > 0 ? cost / static_cast<double>(count) : 0.0;
      (kind == EstimatorKind::mc ? log_mc : log_mlmc).push_back(std::log2(row.rmse));
      study.rows.push_back(std::move(row));
    }
    levels.push_back(l);
  }
  for (std::size_t j = 0; j < seconds.size(); ++j)
    study.cost_per_level.push_back(solves[j] > 0 ? seconds[j] / static_cast<double>(solves[j]) : 0.0);
  if (L > 0) {
    study.slope_mc = fit_slope(levels, log_mc);
    study.slope_mlmc = fit_slope(levels, log_mlmc);
  }
  return study;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

std::string join(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

int cmd_kl_spectrum(const ExperimentConfig& cfg, std::ostream& log) {
  const auto e = make_experiment(cfg);
  const auto dir = ensure_directory(cfg.output().dir);
  auto out = open_output(dir / "kl_spectrum.csv");
  write_header(out, cfg, cfg.estimator().seed, "kl-spectrum");
  out << "# M = " << e->kl.dimension() << "\n# s = " << format_double(e->kl.s())
      << "\n# ellipticity_ratio = " << format_double(e->kl.ellipticity_ratio()) << '\n';
  out << "k[-],lambda[-]\n";
  for (std::size_t k = 0; k < e->kl.lambdas().size(); ++k) out << k + 1 << ',' << format_double(e->kl.lambdas()[k]) << '\n';
  log << "KL dimension M = " << e->kl.dimension() << ", s = " << e->kl.s()
      << ", ellipticity ratio = " << e->kl.ellipticity_ratio() << '\n';
  return 0;
}

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log) {
  const EstimatorSettings est = cfg.estimator();
  const auto e = make_experiment(cfg);
  const int level = est.level;
  const std::vector<double> y(static_cast<std::size_t>(e->kl.dimension()), 0.0);
  SolveStats st;
  const SpaceTimeField u = e->model->solve(level, y, &st);
  const auto dir = ensure_directory(cfg.output().dir);
  {
    auto out = open_output(dir / "solve.csv");
    write_header(out, cfg, est.seed, "solve");
    out << "level[-],nodes[-],timesteps[-],newton_iterations[-],gmres_iterations[-],max_abs_u[u]\n";
    double umax = 0.0;
    for (double v : u.values) umax = std::max(umax, std::abs(v));
    out << level << ',' << u.n << ',' << u.m << ',' << st.newton_iterations << ',' << st.total_gmres_iterations() << ','
        << format_double(umax) << '\n';
  }
  if (cfg.output().timings) {
    auto out = open_output(dir / "solve_timings.csv");
    out << "level[-],newton_iterations[-],total_gmres_iterations[-],seconds[s]\n";
    out << level << ',' << st.newton_iterations << ',' << st.total_gmres_iterations() << ',' << format_double(st.seconds)
        << '\n';
  }
  const OutputSettings o = cfg.output();
  if (o.vtk) write_field_steps(dir, "solution", e->hierarchy.level(level), u, o.vtk_steps, "stmlmc solve seed " + std::to_string(est.seed));
  log << "solved level " << level << " (" << u.n << " nodes x " << u.m << " steps), Newton " << st.newton_iterations
      << ", GMRES " << st.total_gmres_iterations() << '\n';
  return 0;
}

int cmd_estimate(const ExperimentConfig& cfg, EstimatorKind kind, std::ostream& log) {
  EstimatorSettings est = cfg.estimator();
  est.kind = kind;
  const auto e = make_experiment(cfg, est.level);
  const RunSettings run = run_settings(cfg);
  std::vector<Index> samples = est.resolved_samples();
  if (kind == EstimatorKind::mc && samples.size() != 1) samples = {samples.front()};
  const EstimatorResult res =
      estimate(*e->model, e->chain, estimator_config(kind, est.level, samples, 0, run));

  const std::string name = kind == EstimatorKind::mc ? "mc" : "mlmc";
  const auto dir = ensure_directory(cfg.output().dir);
  {
    auto out = open_output(dir / (name + "_levels.csv"));
    write_header(out, cfg, est.seed, name);
    out << "# KL dimension M = " << e->kl.dimension() << ", s = " << format_double(e->kl.s()) << '\n';
    out << "# clamped_variance_nodes = " << res.clamped_variance_nodes
        << ", negative_variance_nodes = " << res.negative_variance_nodes
        << ", most_negative_variance = " << format_double(res.most_negative_variance) << '\n';
    write_level_table(out, res);
  }
  const OutputSettings o = cfg.output();
  if (o.timings) {
    auto timing = open_output(dir / (name + "_timings.csv"));
    write_timing_table(timing, res);
    auto trace = open_output(dir / (name + "_trace.csv"));
    write_trace_csv(trace, res.trace);
  }
  if (o.vtk) {
    const std::string title = "stmlmc " + name + " seed " + std::to_string(est.seed);
    const LevelMesh& mesh = e->hierarchy.level(est.level);
    write_field_steps(dir, name + "_mean", mesh, res.mean, o.vtk_steps, title);
    write_field_steps(dir, name + "_variance", mesh, res.variance, o.vtk_steps, title);
    if (kind == EstimatorKind::mlmc)
      for (const auto& c : res.level_means) {
        std::vector<int> steps;
        if (!o.vtk_steps.empty())
          for (int k : o.vtk_steps) steps.push_back(std::max(1, k * c.m / res.mean.m));
        write_field_steps(dir, "mlmc_correction_l" + std::to_string(c.level), e->hierarchy.level(c.level), c, steps,
                          title);
      }
  }
  log << name << " on level " << est.level << " with N = [" << join(samples) << "] done; work "
      << res.work_seconds << " s\n";
  return 0;
}

ControlledStudy run_study(const ExperimentConfig& cfg, std::unique_ptr<Experiment>& e, std::ostream& log) {
  const EstimatorSettings est = cfg.estimator();
  const int R = std::max(est.reference_level, est.level);
  e = make_experiment(cfg, R);
  const RunSettings run = run_settings(cfg);
  log << "reference: level " << R << ", " << est.reference_samples << " samples\n";
  const EstimatorResult ref = reference_estimate(*e, R, est.reference_samples, run);
  return controlled_convergence(*e, est.level, est.repetitions, est.beta, ref, run);
}

int cmd_convergence(const ExperimentConfig& cfg, std::ostream& log) {
  std::unique_ptr<Experiment> e;
  const ControlledStudy study = run_study(cfg, e, log);
  const auto dir = ensure_directory(cfg.output().dir);
  auto out = open_output(dir / "convergence.csv");
  write_header(out, cfg, cfg.estimator().seed, "convergence");
  out << "# reference_level = " << study.reference_level << ", reference_samples = " << study.reference_samples << '\n';
  out << "# slope_mc = " << format_double(study.slope_mc) << ", slope_mlmc = " << format_double(study.slope_mlmc)
      << '\n';
  out << "method[-],level[-],samples[-],rmse[u*cm^(d/2)*ms^(1/2)]\n";
  for (const auto& r : study.rows)
    out << (r.kind == EstimatorKind::mc ? "mc" : "mlmc") << ',' << r.level << ',' << join(r.samples) << ','
        << format_double(r.rmse) << '\n';
  log << "fitted slopes: MC " << study.slope_mc << ", MLMC " << study.slope_mlmc << '\n';
  return 0;
}

int cmd_work(const ExperimentConfig& cfg, std::ostream& log) {
  std::unique_ptr<Experiment> e;
  const EstimatorSettings est = cfg.estimator();
  const ControlledStudy study = run_study(cfg, e, log);
  const std::vector<double>& w_prime = study.cost_per_level;

  const auto dir = ensure_directory(cfg.output().dir);
  {
    auto out = open_output(dir / "work_timings.csv");
    write_header(out, cfg, est.seed, "work (measured)");
    out << "level[-],w_prime[s],mc_samples[-],mlmc_samples[-],w_mc[s],w_mlmc[s],ratio[-],rmse_mc[u*cm^(d/2)*ms^(1/2)],"
           "rmse_mlmc[u*cm^(d/2)*ms^(1/2)]\n";
    for (int L = 0; L <= est.level; ++L) {
      const auto counts = sample_counts(L, std::exp2(4.0 * L), est.beta);
      const WorkReport w = work_report(std::span<const double>(w_prime.data(), L + 1), counts,
                                       static_cast<Index>(std::llround(std::exp2(4.0 * L))));
      double rmc = 0, rml = 0;
      for (const auto& r : study.rows)
        if (r.level == L) (r.kind == EstimatorKind::mc ? rmc : rml) = r.rmse;
      out << L << ',' << format_double(w_prime[L]) << ',' << w.mc_samples << ',' << join(counts) << ','
          << format_double(w.w_mc) << ',' << format_double(w.w_mlmc) << ',' << format_double(w.w_mlmc / w.w_mc) << ','
          << format_double(rmc) << ',' << format_double(rml) << '\n';
      if (L == est.level)
        log << "L = " << L << ": W_MLMC / W_MC = " << w.w_mlmc / w.w_mc << ", measured gamma_d = " << w.gamma_d << '\n';
    }
  }
  {
    auto out = open_output(dir / "work_model.csv");
    write_header(out, cfg, est.seed, "work (model)");
    out << "gamma_d[-],L[-],w_mc[units],w_mlmc[units],ratio[-]\n";
    for (double gd : {2.0, 3.0, 4.0})
      for (int L = 1; L <= 6; ++L) {
        const WorkReport w = work_model(gd, L);
        out << format_double(gd) << ',' << L << ',' << format_double(w.w_mc) << ',' << format_double(w.w_mlmc) << ','
            << format_double(w.w_mlmc / w.w_mc) << '\n';
      }
  }
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
  (void)cfg;
  int failures = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    log << (ok ? "PASS " : "FAIL ") << name << " (" << detail << ")\n";
    if (!ok) ++failures;
  };

  for (int d = 1; d <= 3; ++d) {
    const auto h = build_hierarchy(d, 2, 2, 1.0, 1.0, 2);
    check("nesting d=" + std::to_string(d), verify_nesting(h), "uniform refinement");
    const auto M = assemble_mass(h.level(2));
    double total = 0.0;
    for (double v : M.values()) total += v;
    check("mass total d=" + std::to_string(d), std::abs(total - 1.0) <= 1e-12, "sum M = " + format_double(total));
  }

  const auto h = build_hierarchy(1, 2, 31, 1.0, 0.64, 4);
  KLOptions ko;
  ko.auto_s = true;
  const KLExpansion kl = KLExpansion::build(h, CovarianceModel{0.25}, ko);
  check("KL ellipticity", kl.ellipticity_ratio() <= 1.0 + 1e-12, "ratio " + format_double(kl.ellipticity_ratio()));

  ProblemSpec heat;
  heat.forcing = ForcingKind::cosine;
  const ForwardModel model(h, kl, heat);
  const auto y = draw_sample(1, 0, 0, kl.dimension()).y;
  const auto sys = model.system(2, kl.realize(y, 2));
  const SpaceTimeField a = newton_solve(sys, SpaceTimeField(2, sys.n(), sys.m()), heat.solver);
  const SpaceTimeField b = sequential_solve(sys, heat.solver);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
  check("monolithic vs sequential", diff <= 1e-8, "max diff " + format_double(diff));

  const TransferChain chain(h);
  EstimatorConfig ec;
  ec.kind = EstimatorKind::mlmc;
  ec.level = 2;
  ec.samples = {4, 4, 4};
  ec.shared_samples = true;
  const auto ml = mlmc_estimate(model, chain, ec);
  EstimatorConfig mc = ec;
  mc.kind = EstimatorKind::mc;
  mc.samples = {4};
  mc.shared_samples = false;
  const auto mcr = mc_estimate(model, mc);
  double tdiff = 0.0;
  for (std::size_t i = 0; i < ml.mean.values.size(); ++i)
    tdiff = std::max(tdiff, std::abs(ml.mean.values[i] - mcr.mean.values[i]));
  check("telescoping", tdiff <= 1e-12, "max diff " + format_double(tdiff));

  bool work_ok = true;
  for (int L = 1; L <= 6; ++L) {
    work_ok = work_ok && work_model(4.0, L).w_mlmc == L * std::exp2(4.0 * L);
    work_ok = work_ok && work_model(2.0, L).w_mlmc == (std::exp2(4.0 * L) - std::exp2(2.0 * L)) / (1.0 - std::exp2(-2.0));
  }
  check("work model closed forms", work_ok, "L <= 6");

  log << (failures == 0 ? "all checks passed\n" : std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 4;
}

} // namespace

int run_command(const std::string& command, const ExperimentConfig& base, std::ostream& log) {
  ExperimentConfig config = base;
  if (command == "mc" || command == "mlmc") config.set("estimator.kind", command);
  config.validate();
  if (command == "kl-spectrum") return cmd_kl_spectrum(config, log);
  if (command == "solve") return cmd_solve(config, log);
  if (command == "mc") return cmd_estimate(config, EstimatorKind::mc, log);
  if (command == "mlmc") return cmd_estimate(config, EstimatorKind::mlmc, log);
  if (command == "convergence") return cmd_convergence(config, log);
  if (command == "work") return cmd_work(config, log);
  if (command == "verify") return cmd_verify(config, log);
  throw ConfigError("unknown subcommand '" + command + "'");
}

} // namespace stmlmc
