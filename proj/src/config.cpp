#include "stmlmc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace stmlmc {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"geometry.dim", "1"},
      {"geometry.extent", "1"},
      {"geometry.base_elements", "31"},
      {"geometry.levels", "3"},
      {"geometry.end_time", "0.64"},
      {"geometry.base_timesteps", "4"},
      {"kl.enabled", "true"},
      {"kl.sigma_kl", "0.25"},
      {"kl.trace_tol", "1e-2"},
      {"kl.max_rank", "200"},
      {"kl.s", "auto"},
      {"kl.delta", "0.5"},
      {"kl.g0", "3.325e-3"},
      {"kl.amplitude", "auto"},
      {"kl.mass_weighted", "false"},
      {"ion.alpha", "1.4e-3"},
      {"ion.u_rest", "0"},
      {"ion.u_th", "28"},
      {"ion.u_peak", "115"},
      {"stimulus.x0", "0,0,0"},
      {"stimulus.sigma", "0.5"},
      {"stimulus.t1", "0.005"},
      {"forcing.kind", "stimulus"},
      {"forcing.amplitude", "1"},
      {"solver.method", "monolithic"},
      {"solver.newton_tol", "1e-10"},
      {"solver.gmres_rtol", "1e-10"},
      {"solver.max_newton", "30"},
      {"solver.restart", "30"},
      {"solver.max_iterations", "3000"},
      {"solver.time_partitions", "1"},
      {"solver.warm_start", "true"},
      {"transfer.projection", "exact"},
      {"transfer.temporal", "zero_initial"},
      {"estimator.kind", "mlmc"},
      {"estimator.level", "auto"},
      {"estimator.samples", ""},
      {"estimator.n_coarse", "auto"},
      {"estimator.beta", "16"},
      {"estimator.repetitions", "5"},
      {"estimator.seed", "12345"},
      {"estimator.reference_level", "5"},
      {"estimator.reference_samples", "16384"},
      {"scheduler.workers", "1"},
      {"scheduler.pools", ""},
      {"scheduler.memory_mb", "256"},
      {"output.dir", "out"},
      {"output.vtk", "true"},
      {"output.vtk_steps", ""},
      {"output.timings", "false"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw ConfigError(key + ": value must be finite");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

} // namespace

std::vector<Index> EstimatorSettings::resolved_samples() const {
  if (!samples.empty()) return samples;
  if (kind == EstimatorKind::mc) return {static_cast<Index>(std::llround(std::exp2(4.0 * level)))};
  const double nc = n_coarse > 0.0 ? n_coarse : std::exp2(4.0 * level);
  return sample_counts(level, nc, beta);
}

ExperimentConfig::ExperimentConfig() : values_(defaults()) {}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return from_stream(in);
}

ExperimentConfig ExperimentConfig::from_stream(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must belong to a [section]");
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.get_value<std::string>());
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = trim(value);
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

GeometryConfig ExperimentConfig::geometry() const {
  GeometryConfig g;
  g.dim = parse_number<int>("geometry.dim", get("geometry.dim"));
  g.extent = parse_number<double>("geometry.extent", get("geometry.extent"));
  g.base_elements = parse_number<int>("geometry.base_elements", get("geometry.base_elements"));
  g.levels = parse_number<int>("geometry.levels", get("geometry.levels"));
  g.end_time = parse_number<double>("geometry.end_time", get("geometry.end_time"));
  g.base_timesteps = parse_number<int>("geometry.base_timesteps", get("geometry.base_timesteps"));
  if (g.dim < 1 || g.dim > 3) throw ConfigError("geometry.dim must be 1, 2 or 3");
  if (!(g.extent > 0.0)) throw ConfigError("geometry.extent must be positive");
  if (g.base_elements < 1) throw ConfigError("geometry.base_elements must be >= 1");
  if (g.levels < 0) throw ConfigError("geometry.levels must be >= 0");
  if (!(g.end_time > 0.0)) throw ConfigError("geometry.end_time must be positive");
  if (g.base_timesteps < 1) throw ConfigError("geometry.base_timesteps must be >= 1");
  return g;
}

CovarianceModel ExperimentConfig::covariance() const {
  CovarianceModel c;
  c.sigma_kl = parse_number<double>("kl.sigma_kl", get("kl.sigma_kl"));
  if (!(c.sigma_kl > 0.0)) throw ConfigError("kl.sigma_kl must be positive");
  return c;
}

bool ExperimentConfig::kl_enabled() const { return parse_bool("kl.enabled", get("kl.enabled")); }

KLOptions ExperimentConfig::kl_options() const {
  KLOptions o;
  o.trace_tol = parse_number<double>("kl.trace_tol", get("kl.trace_tol"));
  o.max_rank = parse_number<int>("kl.max_rank", get("kl.max_rank"));
  o.delta = parse_number<double>("kl.delta", get("kl.delta"));
  o.g0 = parse_number<double>("kl.g0", get("kl.g0"));
  o.mass_weighted = parse_bool("kl.mass_weighted", get("kl.mass_weighted"));
  if (get("kl.s") == "auto") {
    o.auto_s = true;
  } else {
    o.s = parse_number<double>("kl.s", get("kl.s"));
    if (o.s < 0.0) throw ConfigError("kl.s must be non-negative or 'auto'");
  }
  if (get("kl.amplitude") != "auto") {
    o.amplitude = parse_number<double>("kl.amplitude", get("kl.amplitude"));
    if (!(o.amplitude > 0.0)) throw ConfigError("kl.amplitude must be positive or 'auto'");
  }
  if (!(o.trace_tol > 0.0 && o.trace_tol < 1.0)) throw ConfigError("kl.trace_tol must lie in (0, 1)");
  if (o.max_rank < 1) throw ConfigError("kl.max_rank must be >= 1");
  if (!(o.delta > 0.0 && o.delta < 1.0)) throw ConfigError("kl.delta must lie in (0, 1)");
  if (!(o.g0 > 0.0)) throw ConfigError("kl.g0 must be positive");
  return o;
}

ProblemSpec ExperimentConfig::problem() const {
  ProblemSpec p;
  p.ion.alpha = parse_number<double>("ion.alpha", get("ion.alpha"));
  p.ion.u_rest = parse_number<double>("ion.u_rest", get("ion.u_rest"));
  p.ion.u_th = parse_number<double>("ion.u_th", get("ion.u_th"));
  p.ion.u_peak = parse_number<double>("ion.u_peak", get("ion.u_peak"));
  try {
    p.ion.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[ion] ") + e.what());
  }

  const auto x0 = split(get("stimulus.x0"));
  if (x0.empty() || x0.size() > 3) throw ConfigError("stimulus.x0 needs 1 to 3 comma-separated coordinates");
  for (std::size_t k = 0; k < x0.size(); ++k) p.stimulus.x0[k] = parse_number<double>("stimulus.x0", x0[k]);
  p.stimulus.sigma = parse_number<double>("stimulus.sigma", get("stimulus.sigma"));
  p.stimulus.t1 = parse_number<double>("stimulus.t1", get("stimulus.t1"));
  p.stimulus.u_rest = p.ion.u_rest;
  p.stimulus.u_peak = p.ion.u_peak;
  p.stimulus.validate();

  const std::string& kind = get("forcing.kind");
  if (kind == "stimulus")
    p.forcing = ForcingKind::stimulus;
  else if (kind == "cosine")
    p.forcing = ForcingKind::cosine;
  else
    throw ConfigError("forcing.kind must be 'stimulus' or 'cosine'");
  p.forcing_amplitude = parse_number<double>("forcing.amplitude", get("forcing.amplitude"));

  const std::string& method = get("solver.method");
  if (method == "monolithic")
    p.method = SolverMethod::monolithic;
  else if (method == "sequential")
    p.method = SolverMethod::sequential;
  else
    throw ConfigError("solver.method must be 'monolithic' or 'sequential'");
  p.solver.newton_tol = parse_number<double>("solver.newton_tol", get("solver.newton_tol"));
  p.solver.gmres_rtol = parse_number<double>("solver.gmres_rtol", get("solver.gmres_rtol"));
  p.solver.max_newton = parse_number<int>("solver.max_newton", get("solver.max_newton"));
  p.solver.gmres_restart = parse_number<int>("solver.restart", get("solver.restart"));
  p.solver.gmres_max_iterations = parse_number<int>("solver.max_iterations", get("solver.max_iterations"));
  p.solver.time_partitions = parse_number<int>("solver.time_partitions", get("solver.time_partitions"));
  p.warm_start = parse_bool("solver.warm_start", get("solver.warm_start"));
  if (!(p.solver.newton_tol > 0.0)) throw ConfigError("solver.newton_tol must be positive");
  if (!(p.solver.gmres_rtol > 0.0 && p.solver.gmres_rtol < 1.0)) throw ConfigError("solver.gmres_rtol must lie in (0, 1)");
  if (p.solver.max_newton < 1) throw ConfigError("solver.max_newton must be >= 1");
  if (p.solver.gmres_restart < 1) throw ConfigError("solver.restart must be >= 1");
  if (p.solver.gmres_max_iterations < 1) throw ConfigError("solver.max_iterations must be >= 1");
  if (p.solver.time_partitions < 1) throw ConfigError("solver.time_partitions must be >= 1");
  return p;
}

TransferOptions ExperimentConfig::transfer() const {
  TransferOptions t;
  const std::string& proj = get("transfer.projection");
  if (proj == "exact")
    t.projection = ProjectionMode::exact;
  else if (proj == "lumped")
    t.projection = ProjectionMode::lumped;
  else
    throw ConfigError("transfer.projection must be 'exact' or 'lumped'");
  const std::string& temporal = get("transfer.temporal");
  if (temporal == "zero_initial")
    t.temporal = TemporalMode::zero_initial;
  else if (temporal == "constant_extension")
    t.temporal = TemporalMode::constant_extension;
  else
    throw ConfigError("transfer.temporal must be 'zero_initial' or 'constant_extension'");
  return t;
}

EstimatorSettings ExperimentConfig::estimator() const {
  EstimatorSettings e;
  const std::string& kind = get("estimator.kind");
  if (kind == "mc")
    e.kind = EstimatorKind::mc;
  else if (kind == "mlmc")
    e.kind = EstimatorKind::mlmc;
  else
    throw ConfigError("estimator.kind must be 'mc' or 'mlmc'");
  const int levels = geometry().levels;
  e.level = get("estimator.level") == "auto" ? levels : parse_number<int>("estimator.level", get("estimator.level"));
  if (e.level < 0 || e.level > levels)
    throw ConfigError("estimator.level must lie in [0, geometry.levels]");
  for (const auto& s : split(get("estimator.samples"))) e.samples.push_back(parse_number<Index>("estimator.samples", s));
  for (Index n : e.samples)
    if (n < 1) throw ConfigError("estimator.samples entries must be >= 1");
  const std::size_t expected = e.kind == EstimatorKind::mc ? 1 : static_cast<std::size_t>(e.level) + 1;
  if (!e.samples.empty() && e.samples.size() != expected)
    throw ConfigError("estimator.samples needs " + std::to_string(expected) + " entries for this estimator");
  if (get("estimator.n_coarse") != "auto") {
    e.n_coarse = parse_number<double>("estimator.n_coarse", get("estimator.n_coarse"));
    if (!(e.n_coarse >= 1.0)) throw ConfigError("estimator.n_coarse must be >= 1");
  }
  e.beta = parse_number<double>("estimator.beta", get("estimator.beta"));
  if (!(e.beta > 1.0)) throw ConfigError("estimator.beta must exceed 1");
  e.repetitions = parse_number<int>("estimator.repetitions", get("estimator.repetitions"));
  if (e.repetitions < 1) throw ConfigError("estimator.repetitions must be >= 1");
  e.seed = parse_number<std::uint64_t>("estimator.seed", get("estimator.seed"));
  e.reference_level = parse_number<int>("estimator.reference_level", get("estimator.reference_level"));
  if (e.reference_level < 0) throw ConfigError("estimator.reference_level must be >= 0");
  e.reference_samples = parse_number<Index>("estimator.reference_samples", get("estimator.reference_samples"));
  if (e.reference_samples < 1) throw ConfigError("estimator.reference_samples must be >= 1");
  return e;
}

SchedulerSettings ExperimentConfig::scheduler() const {
  SchedulerSettings s;
  s.workers = parse_number<int>("scheduler.workers", get("scheduler.workers"));
  if (s.workers < 1) throw ConfigError("scheduler.workers must be >= 1");
  for (const auto& p : split(get("scheduler.pools"))) s.pools.push_back(parse_number<int>("scheduler.pools", p));
  for (int p : s.pools)
    if (p < 1) throw ConfigError("scheduler.pools entries must be >= 1");
  s.memory_mb = parse_number<std::size_t>("scheduler.memory_mb", get("scheduler.memory_mb"));
  if (s.memory_mb < 1) throw ConfigError("scheduler.memory_mb must be >= 1");
  return s;
}

OutputSettings ExperimentConfig::output() const {
  OutputSettings o;
  o.dir = get("output.dir");
  if (o.dir.empty()) throw ConfigError("output.dir must not be empty");
  o.vtk = parse_bool("output.vtk", get("output.vtk"));
  o.timings = parse_bool("output.timings", get("output.timings"));
  for (const auto& s : split(get("output.vtk_steps"))) {
    o.vtk_steps.push_back(parse_number<int>("output.vtk_steps", s));
    if (o.vtk_steps.back() < 1) throw ConfigError("output.vtk_steps entries are 1-based time steps");
  }
  return o;
}

void ExperimentConfig::validate() const {
  geometry();
  covariance();
  kl_options();
  kl_enabled();
  problem();
  transfer();
  estimator();
  scheduler();
  output();
}

void ExperimentConfig::write_provenance(std::ostream& out) const {
  for (const auto& [key, value] : values_)
    if (key.rfind("scheduler.", 0) != 0 && key != "output.dir") out << "# " << key << " = " << value << '\n';
}

void ExperimentConfig::write_ini(std::ostream& out) const {
  std::string section;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << '[' << s << "]\n";
      section = s;
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
}

} // namespace stmlmc
