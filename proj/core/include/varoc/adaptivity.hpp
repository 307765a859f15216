#pragma once

#include <optional>
#include <vector>

#include "varoc/ocp.hpp"

namespace varoc {

/// Maximum marking strategy: mark element l when eta_l > theta * max eta.
struct MarkingRule {
  double theta = 0.5;
};

/// One level of an adaptive or uniform run; the row schema of the solver
/// tables plus timing.
struct RunRecord {
  int level = 0;
  Index elements = 0;       // N
  Index dofs = 0;           // interior vertices (system size)
  Index vertices = 0;       // total vertices, boundary included
  double h_min = 0.0;
  double h_max = 0.0;
  double error = 0.0;       // eta = ||u_h - target||_L2
  int marked = 0;           // elements marked on this level
  int its_pcg = 0;          // 0 = solver not run on this level
  int its_cg = 0;
  int its_gmres = 0;
  int its_bpcg = 0;
  bool solver_failure = false;
  double seconds = 0.0;
};

/// Local error indicators eta_l = ||u_h - target||_{L2(tau_l)}.
std::vector<double> compute_indicators(const OcpProblem& problem,
                                       std::span<const double> state);

/// Elements with eta_l > theta * max eta (argmax fallback at theta = 1).
/// All-zero indicators return the empty set.
std::vector<Index> mark(std::span<const double> indicators,
                        const MarkingRule& rule);

enum class RegularizationKind {
  diffusion_variable, // rho(x) = h_l^2 per element
  energy_constant,    // rho = h^2, h the current global mesh size
  l2_constant,        // rho = h^4 with the L2 penalty baseline system
};

struct SolverSelection {
  bool pcg = true;
  bool cg = false;
  bool gmres = false;
  bool bpcg = false;
  // Unpreconditioned CG iteration counts explode on fine levels; skip the
  // CG run once the system is larger than this.
  Index cg_dof_cap = 50000;
};

struct DriverOptions {
  MarkingRule rule{0.5};
  int max_levels = 14; // number of refinement steps after the initial level
  double solver_tol = 1e-6;
  int solver_max_iterations = 30000;
  SolverSelection solvers{};
  std::int64_t dof_budget = 2000000;
  QuadratureSpec quad{};
  InnerSolveMode inner = InnerSolveMode::cholesky;
  double bp_delta = 0.5;
};

/// solve -> indicate -> mark -> refine loop with the variable (per-element)
/// regularization rebuilt from the new geometry after every refinement.
/// Returns one record per level, the initial mesh included.
std::vector<RunRecord> adaptive_solve(const SimplicialMesh& initial_mesh,
                                      const TargetFunction& target,
                                      const DriverOptions& options);

/// Uniform refinement baseline with the requested regularization kind,
/// parameter recomputed from the current global mesh size on every level.
std::vector<RunRecord> uniform_solve(const SimplicialMesh& initial_mesh,
                                     const TargetFunction& target,
                                     RegularizationKind kind,
                                     const DriverOptions& options);

enum class RecordField { dofs, elements, error, h_min };

/// Least-squares slope of log(y) against log(x) over the last `window`
/// records (all records when window == 0).
double fit_rate(std::span<const RunRecord> records,
                RecordField x_field = RecordField::dofs,
                RecordField y_field = RecordField::error,
                std::size_t window = 0);

} // namespace varoc
