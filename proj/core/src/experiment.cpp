#include "varoc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace varoc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* kind_name(RegularizationKind k) {
  switch (k) {
    case RegularizationKind::diffusion_variable:
      return "diffusion";
    case RegularizationKind::energy_constant:
      return "energy";
    case RegularizationKind::l2_constant:
      return "l2";
  }
  return "diffusion";
}

RegularizationKind kind_from_name(const std::string& s) {
  if (s == "diffusion") return RegularizationKind::diffusion_variable;
  if (s == "energy") return RegularizationKind::energy_constant;
  if (s == "l2") return RegularizationKind::l2_constant;
  throw std::invalid_argument("unknown regularization kind: " + s);
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

} // namespace

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  out << "dim = " << dim << "\n";
  out << "target = " << target << "\n";
  out << "regularization = " << kind_name(regularization) << "\n";
  out << "refinement = " << refinement << "\n";
  out << "theta = " << format_double(theta) << "\n";
  out << "solvers = " << join(solvers, ',') << "\n";
  out << "max_levels = " << max_levels << "\n";
  out << "tol = " << format_double(tol) << "\n";
  out << "dof_budget = " << dof_budget << "\n";
  out << "quad_depth = " << quad_depth << "\n";
  out << "initial_elements = " << initial_elements << "\n";
  out << "output_dir = " << output_dir << "\n";
  out << "seed = " << seed << "\n";
  return out.str();
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig c;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key = value, got: " + t);
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "dim") {
      c.dim = std::stoi(value);
    } else if (key == "target") {
      c.target = value;
    } else if (key == "regularization") {
      c.regularization = kind_from_name(value);
    } else if (key == "refinement") {
      if (value != "adaptive" && value != "uniform") {
        throw std::invalid_argument("config: refinement must be adaptive|uniform");
      }
      c.refinement = value;
    } else if (key == "theta") {
      c.theta = std::stod(value);
    } else if (key == "solvers") {
      c.solvers = split(value, ',');
    } else if (key == "max_levels") {
      c.max_levels = std::stoi(value);
    } else if (key == "tol") {
      c.tol = std::stod(value);
    } else if (key == "dof_budget") {
      c.dof_budget = std::stoll(value);
    } else if (key == "quad_depth") {
      c.quad_depth = std::stoi(value);
    } else if (key == "initial_elements") {
      c.initial_elements = std::stoi(value);
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else if (key == "seed") {
      c.seed = std::stoull(value);
    } else {
      throw std::invalid_argument("config: unknown key: " + key);
    }
  }
  return c;
}

TargetFunction make_benchmark_target(int dim, const std::string& name) {
  if (dim < 1 || dim > 3) {
    throw std::invalid_argument("make_benchmark_target: dim must be 1, 2 or 3");
  }
  if (name == "box") {
    const std::vector<double> lo(static_cast<std::size_t>(dim), 0.25);
    const std::vector<double> hi(static_cast<std::size_t>(dim), 0.75);
    return TargetFunction::box(lo, hi);
  }
  if (name.rfind("box:", 0) == 0) {
    const auto parts = split(name.substr(4), ',');
    if (parts.size() != 2 * static_cast<std::size_t>(dim)) {
      throw std::invalid_argument(
          "make_benchmark_target: box needs 2*dim comma-separated bounds");
    }
    std::vector<double> lo, hi;
    for (int i = 0; i < dim; ++i) lo.push_back(std::stod(parts[static_cast<std::size_t>(i)]));
    for (int i = 0; i < dim; ++i) {
      hi.push_back(std::stod(parts[static_cast<std::size_t>(dim + i)]));
    }
    return TargetFunction::box(lo, hi);
  }
  if (name == "smooth") {
    // Product of sines: in H^1_0, first-order convergence under rho = h^2.
    auto value = [dim](std::span<const double> x) {
      double v = 1.0;
      for (int k = 0; k < dim; ++k) v *= std::sin(std::numbers::pi * x[static_cast<std::size_t>(k)]);
      return v;
    };
    auto gradient = [dim, value](std::span<const double> x, std::span<double> g) {
      for (int k = 0; k < dim; ++k) {
        double v = std::numbers::pi;
        for (int j = 0; j < dim; ++j) {
          const double xj = x[static_cast<std::size_t>(j)];
          v *= j == k ? std::cos(std::numbers::pi * xj)
                      : std::sin(std::numbers::pi * xj);
        }
        g[static_cast<std::size_t>(k)] = v;
      }
    };
    return TargetFunction::smooth(value, gradient);
  }
  throw std::invalid_argument("make_benchmark_target: unknown target: " + name);
}

SimplicialMesh make_initial_mesh(int dim, Index initial_elements) {
  switch (dim) {
    case 1:
      return build_interval_mesh(initial_elements);
    case 2:
      return build_unit_square_mesh();
    case 3:
      return build_unit_cube_mesh(initial_elements);
    default:
      throw std::invalid_argument("make_initial_mesh: dim must be 1, 2 or 3");
  }
}

void write_levels_csv(std::ostream& out, std::span<const RunRecord> records) {
  out << "level,N,dofs,h_min,h_max,error,its_pcg,its_cg,its_gmres,its_bpcg,seconds\n";
  char buf[256];
  for (const RunRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.12g,%.12g,%.12g,%d,%d,%d,%d,%.3f\n",
                  r.level, r.elements, r.dofs, r.h_min, r.h_max, r.error,
                  r.its_pcg, r.its_cg, r.its_gmres, r.its_bpcg, r.seconds);
    out << buf;
  }
}

void write_levels_csv_file(const std::string& path,
                           std::span<const RunRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_levels_csv(out, records);
}

namespace {

DriverOptions options_from_config(const ExperimentConfig& config) {
  DriverOptions opts;
  opts.rule.theta = config.theta;
  opts.max_levels = config.max_levels;
  opts.solver_tol = config.tol;
  opts.dof_budget = config.dof_budget;
  opts.quad.subdivision_depth = config.quad_depth;
  opts.solvers.pcg = false;
  opts.solvers.cg = false;
  opts.solvers.gmres = false;
  opts.solvers.bpcg = false;
  for (const std::string& s : config.solvers) {
    if (s == "pcg") {
      opts.solvers.pcg = true;
    } else if (s == "cg") {
      opts.solvers.cg = true;
    } else if (s == "gmres") {
      opts.solvers.gmres = true;
    } else if (s == "bpcg") {
      opts.solvers.bpcg = true;
    } else {
      throw std::invalid_argument("unknown solver: " + s);
    }
  }
  if (!opts.solvers.pcg && !opts.solvers.cg && !opts.solvers.gmres &&
      !opts.solvers.bpcg && config.regularization != RegularizationKind::l2_constant) {
    throw std::invalid_argument("no solver selected");
  }
  return opts;
}

} // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 std::vector<RunRecord>& records) {
  const SimplicialMesh mesh = make_initial_mesh(config.dim, config.initial_elements);
  const TargetFunction target = make_benchmark_target(config.dim, config.target);
  const DriverOptions opts = options_from_config(config);

  if (config.refinement == "adaptive") {
    if (config.regularization != RegularizationKind::diffusion_variable) {
      throw std::invalid_argument(
          "adaptive refinement runs the variable (diffusion) regularization");
    }
    records = adaptive_solve(mesh, target, opts);
  } else {
    records = uniform_solve(mesh, target, config.regularization, opts);
  }

  ExperimentSummary summary;
  if (records.size() >= 2) {
    const std::size_t window = std::min<std::size_t>(5, records.size());
    summary.fitted_rate = fit_rate(records, RecordField::dofs, RecordField::error,
                                   window);
  }
  for (const RunRecord& r : records) {
    summary.max_iterations["pcg"] = std::max(summary.max_iterations["pcg"], r.its_pcg);
    summary.max_iterations["cg"] = std::max(summary.max_iterations["cg"], r.its_cg);
    summary.max_iterations["gmres"] =
        std::max(summary.max_iterations["gmres"], r.its_gmres);
    summary.max_iterations["bpcg"] =
        std::max(summary.max_iterations["bpcg"], r.its_bpcg);
  }
  if (!records.empty() && records.back().solver_failure) {
    summary.note = "solver failure, partial records";
  }

  std::filesystem::create_directories(config.output_dir);
  write_levels_csv_file(config.output_dir + "/levels.csv", records);
  std::ofstream sum(config.output_dir + "/summary.txt");
  sum << "levels = " << records.size() << "\n";
  sum << "fitted_rate = " << format_double(summary.fitted_rate) << "\n";
  for (const auto& [k, v] : summary.max_iterations) {
    sum << "max_its_" << k << " = " << v << "\n";
  }
  if (!summary.note.empty()) sum << "note = " << summary.note << "\n";
  return summary;
}

ComparisonCurves compare_regularizations(int dim, int max_levels,
                                         std::int64_t dof_budget,
                                         const std::string& csv_path) {
  const SimplicialMesh mesh = make_initial_mesh(dim, 4);
  const TargetFunction target = make_benchmark_target(dim, "box");

  DriverOptions opts;
  opts.max_levels = max_levels;
  opts.dof_budget = dof_budget;
  opts.solvers.pcg = true;

  ComparisonCurves curves;
  curves.energy_uniform =
      uniform_solve(mesh, target, RegularizationKind::energy_constant, opts);
  curves.l2_uniform =
      uniform_solve(mesh, target, RegularizationKind::l2_constant, opts);
  curves.diffusion_adaptive = adaptive_solve(mesh, target, opts);

  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + csv_path);
    out << "curve,level,dofs,elements,error\n";
    char buf[160];
    auto dump = [&](const char* name, std::span<const RunRecord> recs) {
      for (const RunRecord& r : recs) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%.12g\n", name, r.level,
                      r.dofs, r.elements, r.error);
        out << buf;
      }
    };
    dump("l2_uniform", curves.l2_uniform);
    dump("energy_uniform", curves.energy_uniform);
    dump("diffusion_adaptive", curves.diffusion_adaptive);
  }
  return curves;
}

SolverStudy solver_study(int max_levels_adaptive, int max_levels_uniform,
                         std::int64_t dof_budget, const std::string& csv_dir) {
  const SimplicialMesh mesh = build_unit_cube_mesh(4);
  const TargetFunction target = make_benchmark_target(3, "box");

  DriverOptions adaptive_opts;
  adaptive_opts.max_levels = max_levels_adaptive;
  adaptive_opts.dof_budget = dof_budget;
  adaptive_opts.solvers.pcg = true;
  adaptive_opts.solvers.cg = true;
  adaptive_opts.solvers.gmres = true;
  adaptive_opts.solvers.bpcg = true;

  DriverOptions uniform_opts = adaptive_opts;
  uniform_opts.max_levels = max_levels_uniform;
  uniform_opts.solvers.cg = false;

  SolverStudy study;
  study.adaptive = adaptive_solve(mesh, target, adaptive_opts);
  study.uniform = uniform_solve(mesh, target, RegularizationKind::energy_constant,
                                uniform_opts);
  if (!csv_dir.empty()) {
    std::filesystem::create_directories(csv_dir);
    write_levels_csv_file(csv_dir + "/solver_study_adaptive.csv", study.adaptive);
    write_levels_csv_file(csv_dir + "/solver_study_uniform.csv", study.uniform);
  }
  return study;
}

} // namespace varoc
