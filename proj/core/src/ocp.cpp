#include "varoc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace varoc {

void DiscreteSystem::apply_weighted_stiffness_inverse(std::span<const double> x,
                                                      std::span<double> y) const {
  if (inner_mode == InnerSolveMode::cholesky) {
    weighted_stiffness_factor->solve(x, y);
    return;
  }
  std::fill(y.begin(), y.end(), 0.0);
  LinearOperator a = make_operator(weighted_stiffness);
  a.symmetric = true;
  LinearOperator jacobi{dofs, true,
                        [this](std::span<const double> r, std::span<double> z) {
                          for (std::size_t i = 0; i < r.size(); ++i) {
                            z[i] = r[i] / weighted_stiffness_diag[i];
                          }
                        }};
  KrylovOptions opts;
  opts.tol = 1e-12;
  opts.max_iterations = 100000;
  const SolverReport rep = pcg(a, jacobi, x, y, opts);
  if (!rep.converged) {
    throw std::runtime_error("inner weighted-stiffness solve did not converge");
  }
}

const char* DiscreteSystem::inner_mode_name() const {
  return inner_mode == InnerSolveMode::cholesky ? "cholesky" : "jacobi-pcg";
}

DiscreteSystem build_system(const OcpProblem& problem, InnerSolveMode inner) {
  if (problem.mesh == nullptr || problem.dofs == nullptr ||
      problem.target == nullptr) {
    throw std::invalid_argument("build_system: incomplete problem");
  }
  if (problem.dofs->mesh_revision() != problem.mesh->revision()) {
    throw std::invalid_argument("build_system: dof map from a different mesh");
  }
  if (problem.rho.values.size() !=
      static_cast<std::size_t>(problem.mesh->num_elements())) {
    throw std::invalid_argument(
        "build_system: regularization field does not match element count");
  }
  DiscreteSystem sys;
  sys.dofs = problem.dofs->num_dofs();
  sys.mesh_revision = problem.mesh->revision();
  sys.stiffness = assemble_stiffness(*problem.mesh, *problem.dofs);
  sys.weighted_stiffness =
      assemble_weighted_stiffness(*problem.mesh, *problem.dofs, problem.rho);
  sys.mass = assemble_mass(*problem.mesh, *problem.dofs);
  sys.lumped_mass = lump_mass(sys.mass);
  sys.load = assemble_load(*problem.mesh, *problem.dofs, *problem.target,
                           problem.quad);
  sys.inner_mode = inner;
  if (inner == InnerSolveMode::cholesky) {
    sys.weighted_stiffness_factor =
        std::make_shared<SpdFactorization>(sys.weighted_stiffness);
  } else {
    sys.weighted_stiffness_diag = sys.weighted_stiffness.diagonal();
  }
  return sys;
}

LinearOperator schur_operator(const DiscreteSystem& sys) {
  LinearOperator op;
  op.n = sys.dofs;
  op.symmetric = true;
  op.apply_fn = [&sys](std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    std::vector<double> t(n), w(n);
    sys.stiffness.apply(x, t);
    sys.apply_weighted_stiffness_inverse(t, w);
    sys.stiffness.apply(w, y);
    sys.mass.apply(x, t);
    for (std::size_t i = 0; i < n; ++i) y[i] += t[i];
  };
  return op;
}

namespace {

OcpSolution finish_solution(const DiscreteSystem& sys, std::vector<double> u,
                            std::vector<double> p, SolverReport report) {
  OcpSolution sol;
  sol.state = std::move(u);
  sol.adjoint = std::move(p);
  sol.report = std::move(report);
  sol.report.inner_mode = sys.inner_mode_name();
  const BlockResiduals res = verify_coupled_residuals(sys, sol.state, sol.adjoint);
  sol.residual_primal = res.primal;
  sol.residual_adjoint = res.adjoint;
  return sol;
}

} // namespace

OcpSolution solve_schur(const DiscreteSystem& sys, SchurMethod method,
                        double tol, int max_iterations) {
  const std::size_t n = static_cast<std::size_t>(sys.dofs);
  std::vector<double> u(n, 0.0);
  const LinearOperator op = schur_operator(sys);
  KrylovOptions opts{tol, max_iterations};
  SolverReport report;
  if (method == SchurMethod::cg) {
    report = cg(op, sys.load, u, opts);
    report.solver = "cg";
  } else {
    const LinearOperator prec = make_operator(sys.lumped_mass, /*inverse=*/true);
    report = pcg(op, prec, sys.load, u, opts);
    report.solver = "pcg_lump";
  }
  // p = -K_rho^{-1} K u from the first block equation.
  std::vector<double> p(n, 0.0), t(n);
  sys.stiffness.apply(u, t);
  sys.apply_weighted_stiffness_inverse(t, p);
  for (double& v : p) v = -v;
  return finish_solution(sys, std::move(u), std::move(p), std::move(report));
}

OcpSolution solve_coupled_gmres(const DiscreteSystem& sys, double tol,
                                int max_iterations) {
  const std::size_t n = static_cast<std::size_t>(sys.dofs);
  // Unknown ordering (p, u); block rows (K_rho p + K u, -K p + M u) = (0, f).
  LinearOperator op;
  op.n = 2 * sys.dofs;
  op.apply_fn = [&sys, n](std::span<const double> x, std::span<double> y) {
    std::vector<double> w(n);
    const auto xp = x.subspan(0, n);
    const auto xu = x.subspan(n, n);
    sys.weighted_stiffness.apply(xp, y.subspan(0, n));
    sys.stiffness.apply(xu, w);
    for (std::size_t i = 0; i < n; ++i) y[i] += w[i];
    sys.stiffness.apply(xp, w);
    sys.mass.apply(xu, y.subspan(n, n));
    for (std::size_t i = 0; i < n; ++i) y[n + i] -= w[i];
  };
  LinearOperator prec;
  prec.n = 2 * sys.dofs;
  prec.apply_fn = [&sys, n](std::span<const double> r, std::span<double> z) {
    sys.apply_weighted_stiffness_inverse(r.subspan(0, n), z.subspan(0, n));
    const auto lump = sys.lumped_mass.entries();
    for (std::size_t i = 0; i < n; ++i) z[n + i] = r[n + i] / lump[i];
  };
  std::vector<double> rhs(2 * n, 0.0);
  std::copy(sys.load.begin(), sys.load.end(),
            rhs.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> x(2 * n, 0.0);
  SolverReport report = gmres(op, prec, rhs, x, KrylovOptions{tol, max_iterations});
  report.solver = "gmres_block";
  std::vector<double> p(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> u(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
  return finish_solution(sys, std::move(u), std::move(p), std::move(report));
}

OcpSolution solve_coupled_bpcg(const DiscreteSystem& sys, double delta,
                               double tol, int max_iterations) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("solve_coupled_bpcg: delta must be in (0,1)");
  }
  const std::size_t n = static_cast<std::size_t>(sys.dofs);
  BramblePasciakParts parts;
  parts.k_rho = &sys.weighted_stiffness;
  parts.k = &sys.stiffness;
  parts.m = &sys.mass;
  // C = delta * K_rho, so C < K_rho holds exactly and both C^{-1} and
  // (K_rho - C)^{-1} reuse the same inverse operation.
  parts.apply_c_inv = [&sys, delta](std::span<const double> r,
                                    std::span<double> z) {
    sys.apply_weighted_stiffness_inverse(r, z);
    scale(1.0 / delta, z);
  };
  parts.apply_p1_inv = [&sys, delta](std::span<const double> r,
                                     std::span<double> z) {
    sys.apply_weighted_stiffness_inverse(r, z);
    scale(1.0 / (1.0 - delta), z);
  };
  parts.lumped_mass = sys.lumped_mass.entries();

  std::vector<double> p(n, 0.0), u(n, 0.0);
  SolverReport report =
      bp_cg(parts, sys.load, p, u, KrylovOptions{tol, max_iterations});
  return finish_solution(sys, std::move(u), std::move(p), std::move(report));
}

std::vector<double> recover_control(const DiscreteSystem& sys,
                                    const OcpSolution& solution) {
  const std::size_t n = static_cast<std::size_t>(sys.dofs);
  std::vector<double> rhs(n), z(n, 0.0);
  sys.stiffness.apply(solution.state, rhs);
  LinearOperator m = make_operator(sys.mass);
  m.symmetric = true;
  const LinearOperator prec = make_operator(sys.lumped_mass, /*inverse=*/true);
  KrylovOptions opts;
  opts.tol = 1e-10;
  opts.max_iterations = 10000;
  const SolverReport rep = pcg(m, prec, rhs, z, opts);
  if (!rep.converged) {
    throw std::runtime_error("recover_control: mass solve did not converge");
  }
  return z;
}

OcpSolution solve_l2_regularization_baseline(
    const SimplicialMesh& mesh, const DofMap& dofs, const TargetFunction& target,
    double rho_const, const QuadratureSpec& quad, L2BaselineMethod method,
    double tol, int max_iterations) {
  if (!(rho_const > 0.0)) {
    throw std::invalid_argument(
        "solve_l2_regularization_baseline: rho must be positive");
  }
  const Index m = dofs.num_dofs();
  const std::size_t n = static_cast<std::size_t>(m);
  const CsrMatrix k = assemble_stiffness(mesh, dofs);
  const CsrMatrix mass = assemble_mass(mesh, dofs);
  const std::vector<double> f = assemble_load(mesh, dofs, target, quad);

  // Block system, unknowns (u, p):  K u + (1/rho) M p = 0,  K p - M u = -f.
  OcpSolution sol;
  sol.state.assign(n, 0.0);
  sol.adjoint.assign(n, 0.0);

  if (method == L2BaselineMethod::schur_pcg) {
    // Exact elimination of the adjoint: (rho K M^{-1} K + M) u = f, with
    // p = -rho M^{-1} K u.  With rho ~ h^4 the penalty term is spectrally a
    // mass matrix, so lump-preconditioned CG stays at O(1) iterations.
    const DiagonalMatrix lump = lump_mass(mass);
    LinearOperator mass_op = make_operator(mass);
    mass_op.symmetric = true;
    const LinearOperator lump_inv = make_operator(lump, /*inverse=*/true);
    auto mass_solve = [&](std::span<const double> r, std::span<double> z) {
      std::fill(z.begin(), z.end(), 0.0);
      KrylovOptions inner{1e-12, 10000};
      const SolverReport rep = pcg(mass_op, lump_inv, r, z, inner);
      if (!rep.converged) {
        throw std::runtime_error("l2 baseline: mass solve did not converge");
      }
    };
    LinearOperator op;
    op.n = m;
    op.symmetric = true;
    op.apply_fn = [&](std::span<const double> x, std::span<double> y) {
      std::vector<double> t(n), w(n);
      k.apply(x, t);
      mass_solve(t, w);
      k.apply(w, y);
      mass.apply(x, t);
      for (std::size_t i = 0; i < n; ++i) y[i] = rho_const * y[i] + t[i];
    };
    SolverReport report =
        pcg(op, lump_inv, f, sol.state, KrylovOptions{tol, max_iterations});
    report.solver = "l2_baseline_schur_pcg";
    sol.report = std::move(report);
    std::vector<double> t(n);
    k.apply(sol.state, t);
    mass_solve(t, sol.adjoint);
    for (double& v : sol.adjoint) v *= -rho_const;
  } else if (method == L2BaselineMethod::sparse_direct) {
    std::vector<Triplet> t;
    t.reserve(2 * static_cast<std::size_t>(k.num_nonzeros() + mass.num_nonzeros()));
    const auto append_block = [&](const CsrMatrix& a, Index row0, Index col0,
                                  double factor) {
      const auto offsets = a.row_offsets();
      const auto cols = a.col_indices();
      const auto vals = a.values();
      for (Index row = 0; row < a.dim(); ++row) {
        for (std::int64_t kk = offsets[static_cast<std::size_t>(row)];
             kk < offsets[static_cast<std::size_t>(row) + 1]; ++kk) {
          t.push_back({row0 + row, col0 + cols[static_cast<std::size_t>(kk)],
                       factor * vals[static_cast<std::size_t>(kk)]});
        }
      }
    };
    append_block(k, 0, 0, 1.0);
    append_block(mass, 0, m, 1.0 / rho_const);
    append_block(mass, m, 0, -1.0);
    append_block(k, m, m, 1.0);
    const CsrMatrix block = CsrMatrix::from_triplets(2 * m, std::move(t));
    std::vector<double> rhs(2 * n, 0.0), x(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) rhs[n + i] = -f[i];
    try {
      SparseLuFactorization lu(block);
      lu.solve(rhs, x);
      sol.report.converged = true;
    } catch (const std::runtime_error&) {
      sol.report.breakdown = true; // singular block system
      return sol;
    }
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n),
              sol.state.begin());
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(n), x.end(),
              sol.adjoint.begin());
    sol.report.solver = "l2_baseline_direct";
    sol.report.dim = 2 * m;
    sol.report.inner_mode = "sparse-lu";
  } else {
    const SpdFactorization k_factor(k);
    const DiagonalMatrix lump = lump_mass(mass);
    LinearOperator op;
    op.n = 2 * m;
    op.apply_fn = [&](std::span<const double> x, std::span<double> y) {
      std::vector<double> w(n);
      const auto xu = x.subspan(0, n);
      const auto xp = x.subspan(n, n);
      k.apply(xu, y.subspan(0, n));
      mass.apply(xp, w);
      for (std::size_t i = 0; i < n; ++i) y[i] += w[i] / rho_const;
      k.apply(xp, y.subspan(n, n));
      mass.apply(xu, w);
      for (std::size_t i = 0; i < n; ++i) y[n + i] -= w[i];
    };
    LinearOperator prec;
    prec.n = 2 * m;
    prec.apply_fn = [&](std::span<const double> r, std::span<double> z) {
      k_factor.solve(r.subspan(0, n), z.subspan(0, n));
      lump.apply_inverse(r.subspan(n, n), z.subspan(n, n));
    };
    std::vector<double> rhs(2 * n, 0.0), x(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) rhs[n + i] = -f[i];
    SolverReport report = gmres(op, prec, rhs, x, KrylovOptions{tol, max_iterations});
    report.solver = "l2_baseline_gmres";
    sol.report = std::move(report);
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n),
              sol.state.begin());
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(n), x.end(),
              sol.adjoint.begin());
  }

  // Residuals of the two baseline block equations.
  std::vector<double> r1(n), r2(n), w(n);
  k.apply(sol.state, r1);
  mass.apply(sol.adjoint, w);
  for (std::size_t i = 0; i < n; ++i) r1[i] += w[i] / rho_const;
  k.apply(sol.adjoint, r2);
  mass.apply(sol.state, w);
  for (std::size_t i = 0; i < n; ++i) r2[i] += f[i] - w[i];
  const double fn = norm2(f);
  sol.residual_primal = norm2(r1) / std::max(fn, 1e-300);
  sol.residual_adjoint = norm2(r2) / std::max(fn, 1e-300);
  return sol;
}

BlockResiduals verify_coupled_residuals(const DiscreteSystem& sys,
                                        std::span<const double> u,
                                        std::span<const double> p) {
  const std::size_t n = static_cast<std::size_t>(sys.dofs);
  std::vector<double> r1(n), r2(n), w(n);
  // K_rho p + K u = 0
  sys.weighted_stiffness.apply(p, r1);
  sys.stiffness.apply(u, w);
  double scale1 = std::max(norm2(r1), norm2(w));
  for (std::size_t i = 0; i < n; ++i) r1[i] += w[i];
  // M u - K p = f
  sys.mass.apply(u, r2);
  sys.stiffness.apply(p, w);
  for (std::size_t i = 0; i < n; ++i) r2[i] -= w[i] + sys.load[i];
  const double fn = norm2(sys.load);
  BlockResiduals res;
  res.primal = scale1 > 0.0 ? norm2(r1) / scale1 : norm2(r1);
  res.adjoint = fn > 0.0 ? norm2(r2) / fn : norm2(r2);
  return res;
}

} // namespace varoc
