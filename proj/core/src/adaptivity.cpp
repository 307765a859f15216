#include "varoc/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace varoc {

std::vector<double> compute_indicators(const OcpProblem& problem,
                                       std::span<const double> state) {
  const SimplicialMesh& mesh = *problem.mesh;
  std::vector<double> eta(static_cast<std::size_t>(mesh.num_elements()), 0.0);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    eta[static_cast<std::size_t>(e)] = std::sqrt(element_l2_error_sq(
        mesh, *problem.dofs, e, state, *problem.target, problem.quad));
  }
  return eta;
}

std::vector<Index> mark(std::span<const double> indicators,
                        const MarkingRule& rule) {
  if (indicators.empty()) {
    throw std::invalid_argument("mark: empty indicator list");
  }
  if (!(rule.theta > 0.0 && rule.theta <= 1.0)) {
    throw std::invalid_argument("mark: theta must be in (0,1]");
  }
  const double max_eta = *std::max_element(indicators.begin(), indicators.end());
  std::vector<Index> marked;
  if (max_eta == 0.0) return marked; // converged
  const double threshold = rule.theta * max_eta;
  for (std::size_t e = 0; e < indicators.size(); ++e) {
    if (indicators[e] > threshold) marked.push_back(static_cast<Index>(e));
  }
  if (marked.empty()) {
    // theta = 1 with strict inequality marks nothing; fall back to the
    // argmax set so the loop makes progress.
    for (std::size_t e = 0; e < indicators.size(); ++e) {
      if (indicators[e] == max_eta) marked.push_back(static_cast<Index>(e));
    }
  }
  return marked;
}

namespace {

struct LevelResult {
  RunRecord record;
  std::vector<double> state;
  std::vector<double> indicators;
  bool usable = false;
};

LevelResult solve_level(const SimplicialMesh& mesh, const TargetFunction& target,
                        RegularizationKind kind, const DriverOptions& options,
                        int level) {
  LevelResult out;
  const auto t0 = std::chrono::steady_clock::now();
  const DofMap dofs = DofMap::interior(mesh);

  RunRecord& rec = out.record;
  rec.level = level;
  rec.elements = mesh.num_elements();
  rec.dofs = dofs.num_dofs();
  rec.vertices = mesh.num_vertices();
  rec.h_min = mesh.min_mesh_size();
  rec.h_max = mesh.max_mesh_size();

  auto global_cell_sq = [&mesh]() {
    double vmax = 0.0;
    for (Index e = 0; e < mesh.num_elements(); ++e) {
      vmax = std::max(vmax, mesh.element_volume(e));
    }
    return dyadic_cell_extent_sq(mesh.dim(), vmax);
  };

  auto run_solvers = [&]() -> bool {
    if (kind == RegularizationKind::l2_constant) {
      const double h_sq = global_cell_sq();
      const OcpSolution sol = solve_l2_regularization_baseline(
          mesh, dofs, target, h_sq * h_sq, options.quad,
          L2BaselineMethod::schur_pcg);
      if (!sol.report.converged) return false;
      out.state = sol.state;
      return true;
    }
    OcpProblem problem;
    problem.mesh = &mesh;
    problem.dofs = &dofs;
    problem.target = &target;
    problem.quad = options.quad;
    if (kind == RegularizationKind::diffusion_variable) {
      problem.rho =
          build_regularization_field(mesh, RegularizationMode::variable_local);
    } else {
      problem.rho = build_regularization_field(mesh, RegularizationMode::constant,
                                               global_cell_sq());
    }
    const DiscreteSystem sys = build_system(problem, options.inner);

    bool have_state = false;
    auto adopt = [&](const OcpSolution& sol) {
      if (!have_state && sol.report.converged) {
        out.state = sol.state;
        have_state = true;
      }
    };
    if (options.solvers.pcg) {
      const OcpSolution sol =
          solve_schur(sys, SchurMethod::pcg_lump, options.solver_tol,
                      options.solver_max_iterations);
      rec.its_pcg = sol.report.iterations;
      adopt(sol);
    }
    if (options.solvers.cg && sys.dofs <= options.solvers.cg_dof_cap) {
      const OcpSolution sol = solve_schur(sys, SchurMethod::cg, options.solver_tol,
                                          options.solver_max_iterations);
      rec.its_cg = sol.report.iterations;
      adopt(sol);
    }
    if (options.solvers.gmres) {
      const OcpSolution sol = solve_coupled_gmres(sys, options.solver_tol,
                                                  options.solver_max_iterations);
      rec.its_gmres = sol.report.iterations;
      adopt(sol);
    }
    if (options.solvers.bpcg) {
      const OcpSolution sol =
          solve_coupled_bpcg(sys, options.bp_delta, options.solver_tol,
                             options.solver_max_iterations);
      rec.its_bpcg = sol.report.iterations;
      adopt(sol);
    }
    return have_state;
  };

  bool ok = false;
  try {
    ok = run_solvers();
  } catch (const std::exception&) {
    // Factorization breakdown (extreme coefficient range) or an inner solve
    // failure: stop here and keep the completed levels.
    ok = false;
  }
  if (!ok) {
    rec.solver_failure = true;
    return out;
  }

  out.indicators.resize(static_cast<std::size_t>(mesh.num_elements()));
  double sum_sq = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const double sq =
        element_l2_error_sq(mesh, dofs, e, out.state, target, options.quad);
    out.indicators[static_cast<std::size_t>(e)] = std::sqrt(sq);
    sum_sq += sq;
  }
  rec.error = std::sqrt(sum_sq);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
  out.usable = true;
  return out;
}

std::vector<RunRecord> drive(const SimplicialMesh& initial_mesh,
                             const TargetFunction& target,
                             RegularizationKind kind, bool adaptive,
                             const DriverOptions& options) {
  std::vector<RunRecord> records;
  SimplicialMesh mesh = initial_mesh;
  for (int level = 0;; ++level) {
    {
      const DofMap probe = DofMap::interior(mesh);
      if (static_cast<std::int64_t>(probe.num_dofs()) > options.dof_budget) {
        break; // level over budget is skipped
      }
    }
    LevelResult lr = solve_level(mesh, target, kind, options, level);
    if (!lr.usable) {
      records.push_back(lr.record);
      break; // solver failure: keep partial records
    }
    RunRecord rec = lr.record;
    if (level >= options.max_levels) {
      records.push_back(rec);
      break;
    }
    std::vector<Index> marked;
    if (adaptive) {
      marked = mark(lr.indicators, options.rule);
    } else {
      marked.resize(static_cast<std::size_t>(mesh.num_elements()));
      std::iota(marked.begin(), marked.end(), Index{0});
    }
    rec.marked = static_cast<int>(marked.size());
    records.push_back(rec);
    if (marked.empty()) break; // all indicators zero: converged
    mesh = refine_halving(mesh, marked);
  }
  return records;
}

} // namespace

std::vector<RunRecord> adaptive_solve(const SimplicialMesh& initial_mesh,
                                      const TargetFunction& target,
                                      const DriverOptions& options) {
  return drive(initial_mesh, target, RegularizationKind::diffusion_variable,
               /*adaptive=*/true, options);
}

std::vector<RunRecord> uniform_solve(const SimplicialMesh& initial_mesh,
                                     const TargetFunction& target,
                                     RegularizationKind kind,
                                     const DriverOptions& options) {
  return drive(initial_mesh, target, kind, /*adaptive=*/false, options);
}

double fit_rate(std::span<const RunRecord> records, RecordField x_field,
                RecordField y_field, std::size_t window) {
  auto value = [](const RunRecord& r, RecordField f) -> double {
    switch (f) {
      case RecordField::dofs:
        return static_cast<double>(r.dofs);
      case RecordField::elements:
        return static_cast<double>(r.elements);
      case RecordField::error:
        return r.error;
      case RecordField::h_min:
        return r.h_min;
    }
    return 0.0;
  };
  std::vector<std::pair<double, double>> pts;
  for (const RunRecord& r : records) {
    const double x = value(r, x_field), y = value(r, y_field);
    if (x > 0.0 && y > 0.0) pts.emplace_back(std::log(x), std::log(y));
  }
  if (window > 0 && pts.size() > window) {
    pts.erase(pts.begin(), pts.end() - static_cast<std::ptrdiff_t>(window));
  }
  if (pts.size() < 2) {
    throw std::invalid_argument("fit_rate: need at least two usable records");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace varoc
