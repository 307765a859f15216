#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "varoc/adaptivity.hpp"

namespace varoc {

/// Everything one benchmark run needs, serializable to a flat key = value
/// text file (round-trip exact).
struct ExperimentConfig {
  int dim = 2;
  std::string target = "box";       // "box" | "smooth" | "box:l,...,u,..."
  RegularizationKind regularization = RegularizationKind::diffusion_variable;
  std::string refinement = "adaptive"; // "adaptive" | "uniform"
  double theta = 0.5;
  std::vector<std::string> solvers = {"pcg"};
  int max_levels = 14;
  double tol = 1e-6;
  std::int64_t dof_budget = 2000000;
  int quad_depth = 6;
  int initial_elements = 4; // 1D segment count / 3D cubes per edge
  std::string output_dir = ".";
  std::uint64_t seed = 0;

  std::string to_text() const;
  static ExperimentConfig from_text(const std::string& text);

  bool operator==(const ExperimentConfig&) const = default;
};

/// The named benchmark targets: box indicators of (0.25,0.75)^n and the
/// smooth product-of-sines state.
TargetFunction make_benchmark_target(int dim, const std::string& name);

SimplicialMesh make_initial_mesh(int dim, Index initial_elements);

struct ExperimentSummary {
  double fitted_rate = 0.0;
  std::map<std::string, int> max_iterations;
  std::string note;
};

/// Runs the configured experiment, writes <out>/levels.csv and
/// <out>/summary.txt, and returns the per-level records.
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 std::vector<RunRecord>& records);

/// Error-vs-dofs curves for the three regularizations (L2 with rho=h^4 and
/// energy with rho=h^2 under uniform refinement, the variable scheme under
/// adaptive refinement), one CSV keyed by dofs.
struct ComparisonCurves {
  std::vector<RunRecord> l2_uniform;
  std::vector<RunRecord> energy_uniform;
  std::vector<RunRecord> diffusion_adaptive;
};
ComparisonCurves compare_regularizations(int dim, int max_levels,
                                         std::int64_t dof_budget,
                                         const std::string& csv_path = "");

/// Iteration-count study of the three solver strategies on the 3D
/// benchmark, adaptive and uniform refinements.
struct SolverStudy {
  std::vector<RunRecord> adaptive;
  std::vector<RunRecord> uniform;
};
SolverStudy solver_study(int max_levels_adaptive, int max_levels_uniform,
                         std::int64_t dof_budget,
                         const std::string& csv_dir = "");

void write_levels_csv(std::ostream& out, std::span<const RunRecord> records);
void write_levels_csv_file(const std::string& path,
                           std::span<const RunRecord> records);

} // namespace varoc
