#include "stmlmc/output.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

namespace stmlmc {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::filesystem::path ensure_directory(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

void write_header(std::ostream& out, const ExperimentConfig& config, std::uint64_t seed, const std::string& what) {
  out << "# stmlmc " << what << '\n';
  out << "# master_seed = " << seed << '\n';
  config.write_provenance(out);
}

void write_level_table(std::ostream& out, const EstimatorResult& result) {
  out << "level[-],samples[-],stream_tag[-],mean_correction_norm[u*cm^(d/2)*ms^(1/2)],"
         "var_correction_norm[u^2*cm^d*ms],newton_iterations[-],gmres_iterations[-]\n";
  for (const auto& s : result.per_level)
    out << s.level << ',' << s.samples << ',' << s.tag << ',' << format_double(s.mean_correction_norm) << ','
        << format_double(s.var_correction_norm) << ',' << s.newton_iterations << ',' << s.gmres_iterations << '\n';
}

void write_timing_table(std::ostream& out, const EstimatorResult& result) {
  out << "level[-],samples[-],wall_seconds[s],fine_solve_seconds[s],coarse_solve_seconds[s]\n";
  for (const auto& s : result.per_level)
    out << s.level << ',' << s.samples << ',' << format_double(s.seconds) << ','
        << format_double(s.fine_solve_seconds) << ',' << format_double(s.coarse_solve_seconds) << '\n';
}

void write_field_steps(const std::filesystem::path& dir, const std::string& prefix, const LevelMesh& mesh,
                       const SpaceTimeField& field, std::span<const int> steps, const std::string& title) {
  std::vector<int> chosen(steps.begin(), steps.end());
  if (chosen.empty()) chosen.push_back(field.m);
  for (int k : chosen) {
    if (k < 1 || k > field.m)
      throw ConfigError("output.vtk_steps: step " + std::to_string(k) + " outside 1.." + std::to_string(field.m));
    const auto path = dir / (prefix + "_step" + std::to_string(k) + ".vtk");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    write_vtk(out, mesh, field.block(k - 1), prefix, title + " step " + std::to_string(k));
  }
}

} // namespace stmlmc
