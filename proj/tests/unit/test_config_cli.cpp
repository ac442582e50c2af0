#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "stmlmc/config.hpp"
#include "stmlmc/experiments.hpp"

using namespace stmlmc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stmlmc_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STMLMC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("defaults describe the 1D monodomain experiment") {
  const ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  const auto g = cfg.geometry();
  CHECK(g.dim == 1);
  CHECK(g.base_elements == 31);
  CHECK(g.end_time == 0.64);
  CHECK(g.base_timesteps == 4);
  const auto p = cfg.problem();
  CHECK(p.ion.alpha == 1.4e-3);
  CHECK(p.ion.u_th == 28.0);
  CHECK(p.ion.u_peak == 115.0);
  CHECK(cfg.kl_options().g0 == 3.325e-3);
  CHECK(cfg.kl_options().delta == 0.5);
  CHECK(cfg.covariance().sigma_kl == 0.25);
  const auto e = cfg.estimator();
  CHECK(e.resolved_samples() == std::vector<Index>{4096, 256, 16, 1});
}

TEST_CASE("INI parsing and overrides") {
  std::istringstream in("[geometry]\ndim = 2\nlevels = 1\n[estimator]\nkind = mc\nlevel = 1\n[ion]\nalpha = 0\n");
  auto cfg = ExperimentConfig::from_stream(in);
  CHECK(cfg.geometry().dim == 2);
  CHECK(cfg.estimator().kind == EstimatorKind::mc);
  CHECK(cfg.estimator().resolved_samples() == std::vector<Index>{16});
  CHECK(cfg.problem().ion.linear());
  cfg.set("estimator.samples", "5");
  CHECK(cfg.estimator().resolved_samples() == std::vector<Index>{5});
  CHECK(cfg.get("geometry.dim") == "2");
}

TEST_CASE("invalid configuration names the field") {
  auto expect_error = [](const std::string& key, const std::string& value, const std::string& needle) {
    ExperimentConfig cfg;
    bool thrown = false;
    try {
      cfg.set(key, value);
      cfg.validate();
    } catch (const ConfigError& e) {
      thrown = true;
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
    CHECK_MESSAGE(thrown, key);
  };
  expect_error("geometry.nonsense", "1", "geometry.nonsense");
  expect_error("geometry.dim", "x", "geometry.dim");
  expect_error("kl.delta", "1.5", "kl.delta");
  expect_error("ion.u_th", "500", "ion");
  expect_error("estimator.samples", "4,4", "estimator.samples");
  expect_error("estimator.level", "9", "estimator.level");
  expect_error("solver.method", "magic", "solver.method");
  expect_error("scheduler.workers", "0", "scheduler.workers");
  expect_error("stimulus.sigma", "-1", "stimulus.sigma");

  std::istringstream orphan("dim = 2\n");
  CHECK_THROWS_AS(ExperimentConfig::from_stream(orphan), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("provenance excludes scheduler settings") {
  ExperimentConfig a, b;
  b.set("scheduler.workers", "8");
  std::ostringstream pa, pb, ini;
  a.write_provenance(pa);
  b.write_provenance(pb);
  CHECK(pa.str() == pb.str());
  CHECK(pa.str().find("scheduler") == std::string::npos);
  CHECK(pa.str().find("output.dir") == std::string::npos);
  CHECK(pa.str().find("# kl.g0 = 3.325e-3") != std::string::npos);
  b.write_ini(ini);
  std::istringstream back(ini.str());
  const auto c = ExperimentConfig::from_stream(back);
  CHECK(c.scheduler().workers == 8);
}

TEST_CASE("zero stimulus without ionic current gives an all-zero solve") {
  const auto dir = scratch("zero");
  ExperimentConfig cfg;
  cfg.set("ion.alpha", "0");
  cfg.set("ion.u_peak", "0");
  cfg.set("geometry.levels", "1");
  cfg.set("estimator.level", "1");
  cfg.set("output.dir", dir.string());
  std::ostringstream log;
  CHECK(run_command("solve", cfg, log) == 0);
  const std::string vtk = slurp(dir / "solution_step8.vtk");
  const auto pos = vtk.find("LOOKUP_TABLE default\n");
  REQUIRE(pos != std::string::npos);
  std::istringstream values(vtk.substr(pos + 21));
  double v;
  int count = 0;
  while (values >> v) {
    CHECK(v == 0.0);
    ++count;
  }
  CHECK(count == 63);
  CHECK(slurp(dir / "solve.csv").find("max_abs_u[u]") != std::string::npos);
}

TEST_CASE("mlmc artifacts are reproducible and carry provenance") {
  const auto d1 = scratch("mlmc1"), d2 = scratch("mlmc2");
  ExperimentConfig cfg;
  cfg.set("geometry.levels", "2");
  cfg.set("estimator.level", "2");
  cfg.set("estimator.samples", "8,4,2");
  cfg.set("output.vtk_steps", "4,8");
  cfg.set("output.timings", "true");
  cfg.set("output.dir", d1.string());
  std::ostringstream log;
  REQUIRE(run_command("mlmc", cfg, log) == 0);
  cfg.set("output.dir", d2.string());
  cfg.set("scheduler.workers", "3");
  REQUIRE(run_command("mlmc", cfg, log) == 0);
  const std::string a = slurp(d1 / "mlmc_levels.csv");
  CHECK(a == slurp(d2 / "mlmc_levels.csv"));
  CHECK(a.find("# master_seed = 12345") != std::string::npos);
  CHECK(a.find("level[-],samples[-]") != std::string::npos);
  std::istringstream rows(a);
  std::string line;
  int data = 0;
  while (std::getline(rows, line))
    if (!line.empty() && line[0] != '#' && std::isdigit(static_cast<unsigned char>(line[0]))) ++data;
  CHECK(data == 3);
  CHECK(fs::exists(d1 / "mlmc_mean_step4.vtk"));
  CHECK(fs::exists(d1 / "mlmc_variance_step8.vtk"));
  CHECK(fs::exists(d1 / "mlmc_correction_l0_step1.vtk"));
  CHECK(fs::exists(d1 / "mlmc_correction_l2_step8.vtk"));
  CHECK(slurp(d1 / "mlmc_timings.csv").find("wall_seconds[s]") != std::string::npos);
}

TEST_CASE("kl-spectrum and verify subcommands") {
  const auto dir = scratch("kl");
  ExperimentConfig cfg;
  cfg.set("output.dir", dir.string());
  std::ostringstream log;
  CHECK(run_command("kl-spectrum", cfg, log) == 0);
  CHECK(slurp(dir / "kl_spectrum.csv").find("k[-],lambda[-]") != std::string::npos);
  CHECK(run_command("verify", cfg, log) == 0);
  CHECK_THROWS_AS(run_command("bogus", cfg, log), ConfigError);
}

TEST_CASE("CLI exit codes") {
  const auto dir = scratch("cli");
  const std::string out = " --out " + dir.string();
  CHECK(run_cli("kl-spectrum" + out) == 0);
  CHECK(run_cli("kl-spectrum --set geometry.dim=7" + out) == 2);
  CHECK(run_cli("kl-spectrum --config /nonexistent.ini" + out) == 2);
  CHECK(run_cli("kl-spectrum --set kl.s=5" + out) == 2);
  CHECK(run_cli("solve --set solver.max_newton=1 --levels 1" + out) == 3);
  CHECK(run_cli("mlmc --levels 1 --samples 4,2 --pool-spec 1,1 --workers 2 --seed 7 --set output.vtk=false" + out) == 0);
  CHECK(fs::exists(dir / "config.resolved.ini"));
  CHECK(slurp(dir / "mlmc_levels.csv").find("# master_seed = 7") != std::string::npos);
  CHECK(run_cli("verify" + out) == 0);
  CHECK(run_cli("nonsense" + out) != 0);
}
