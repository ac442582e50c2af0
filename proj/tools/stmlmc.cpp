#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stmlmc/common.hpp"
#include "stmlmc/experiments.hpp"
#include "stmlmc/output.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string seed;
  std::string levels;
  std::string samples;
  std::string pools;
  std::string out;
  std::string workers;
  std::vector<std::string> set;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "INI experiment file");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--levels", o.levels, "finest level L");
  cmd->add_option("--samples", o.samples, "sample counts N or N_0,...,N_L");
  cmd->add_option("--pool-spec", o.pools, "workers per level p_0,...,p_L");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "total worker threads");
  cmd->add_option("--set", o.set, "override section.key=value")->take_all();
}

stmlmc::ExperimentConfig resolve(const Overrides& o) {
  stmlmc::ExperimentConfig cfg = o.config.empty() ? stmlmc::ExperimentConfig() : stmlmc::ExperimentConfig::from_file(o.config);
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw stmlmc::ConfigError("--set expects section.key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.seed.empty()) cfg.set("estimator.seed", o.seed);
  if (!o.levels.empty()) {
    cfg.set("geometry.levels", o.levels);
    cfg.set("estimator.level", o.levels);
  }
  if (!o.samples.empty()) cfg.set("estimator.samples", o.samples);
  if (!o.pools.empty()) cfg.set("scheduler.pools", o.pools);
  if (!o.out.empty()) cfg.set("output.dir", o.out);
  if (!o.workers.empty()) cfg.set("scheduler.workers", o.workers);
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time multilevel Monte Carlo for parabolic problems with random coefficients"};
  app.require_subcommand(1);
  Overrides o;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"kl-spectrum", "write the KL eigenvalue spectrum"},
      {"solve", "solve one unperturbed space-time system"},
      {"mc", "single-level Monte Carlo estimate"},
      {"mlmc", "multilevel Monte Carlo estimate"},
      {"convergence", "controlled RMSE convergence study"},
      {"work", "measured and modelled work comparison"},
      {"verify", "quick built-in consistency checks"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o);
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    stmlmc::ExperimentConfig cfg = resolve(o);
    if (command == "mc" || command == "mlmc") cfg.set("estimator.kind", command);
    cfg.validate();
    const auto dir = stmlmc::ensure_directory(cfg.output().dir);
    {
      std::ofstream ini(dir / "config.resolved.ini");
      cfg.write_ini(ini);
    }
    return stmlmc::run_command(command, cfg, std::cout);
  } catch (const stmlmc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const stmlmc::EllipticityError& e) {
    std::cerr << "ellipticity error: " << e.what() << '\n';
    return 2;
  } catch (const stmlmc::MeshError& e) {
    std::cerr << "mesh error: " << e.what() << '\n';
    return 2;
  } catch (const stmlmc::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const stmlmc::AssemblyError& e) {
    std::cerr << "assembly error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
