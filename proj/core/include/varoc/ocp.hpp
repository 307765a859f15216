#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "varoc/assembly.hpp"
#include "varoc/cholesky.hpp"
#include "varoc/csr.hpp"
#include "varoc/solvers.hpp"

namespace varoc {

/// One discrete optimal control problem: mesh, interior dof map, target,
/// per-element regularization and quadrature settings.
struct OcpProblem {
  const SimplicialMesh* mesh = nullptr;
  const DofMap* dofs = nullptr;
  const TargetFunction* target = nullptr;
  RegularizationField rho;
  QuadratureSpec quad;
};

enum class InnerSolveMode {
  cholesky,   // direct factorization of the weighted stiffness matrix
  jacobi_pcg, // inner PCG with Jacobi preconditioner, tol 1e-12
};

/// All matrices and vectors of the discrete optimality system, assembled
/// once per mesh and immutable afterwards.  Multiple solves may run against
/// the same system concurrently.
struct DiscreteSystem {
  Index dofs = 0;
  std::uint64_t mesh_revision = 0;
  CsrMatrix stiffness;          // K
  CsrMatrix weighted_stiffness; // K_rho, gradients weighted by 1/rho(x)
  CsrMatrix mass;               // M
  DiagonalMatrix lumped_mass;
  std::vector<double> load; // f
  std::shared_ptr<SpdFactorization> weighted_stiffness_factor;
  std::vector<double> weighted_stiffness_diag; // Jacobi inner mode
  InnerSolveMode inner_mode = InnerSolveMode::cholesky;

  /// y = K_rho^{-1} x via the configured inner mode.
  void apply_weighted_stiffness_inverse(std::span<const double> x,
                                        std::span<double> y) const;
  const char* inner_mode_name() const;
};

DiscreteSystem build_system(const OcpProblem& problem,
                            InnerSolveMode inner = InnerSolveMode::cholesky);

/// Matrix-free reduced operator  y = M x + K K_rho^{-1} K x.  Never formed
/// explicitly; the triple product fills in.
LinearOperator schur_operator(const DiscreteSystem& sys);

struct OcpSolution {
  std::vector<double> state;   // u
  std::vector<double> adjoint; // p
  std::vector<double> control; // z, filled by recover_control
  SolverReport report;
  // Relative residuals of the two block equations, re-checked post-solve.
  double residual_primal = 0.0;
  double residual_adjoint = 0.0;
};

enum class SchurMethod { cg, pcg_lump };

/// Solve the reduced equation (M + K K_rho^{-1} K) u = f, then recover the
/// adjoint p = -K_rho^{-1} K u.
OcpSolution solve_schur(const DiscreteSystem& sys, SchurMethod method,
                        double tol = 1e-6, int max_iterations = 10000);

/// GMRES on the coupled block system with the block diagonal preconditioner
/// diag(K_rho-hat, lump[M]).
OcpSolution solve_coupled_gmres(const DiscreteSystem& sys, double tol = 1e-6,
                                int max_iterations = 10000);

/// CG on the transformed coupled system, C = delta * K_rho with
/// 0 < delta < 1 so that C < K_rho holds exactly.
OcpSolution solve_coupled_bpcg(const DiscreteSystem& sys, double delta = 0.5,
                               double tol = 1e-6, int max_iterations = 10000);

/// Nodal control coefficients: solve M z = K u to 1e-10.
std::vector<double> recover_control(const DiscreteSystem& sys,
                                    const OcpSolution& solution);

enum class L2BaselineMethod { schur_pcg, sparse_direct, gmres };

/// Comparison baseline with the L2 penalty and constant parameter:
/// K u + (1/rho) M p = 0,  K p - M u = -f.  The default eliminates the
/// adjoint exactly, (rho K M^{-1} K + M) u = f, and runs lump-preconditioned
/// CG with mass solves done to 1e-12; sparse_direct factors the block system,
/// gmres uses the diag(K-hat, lump[M]) preconditioner.
OcpSolution solve_l2_regularization_baseline(
    const SimplicialMesh& mesh, const DofMap& dofs,
    const TargetFunction& target, double rho_const,
    const QuadratureSpec& quad = {},
    L2BaselineMethod method = L2BaselineMethod::schur_pcg,
    double tol = 1e-10, int max_iterations = 20000);

/// Relative residuals of both block equations for a computed pair (u, p).
struct BlockResiduals {
  double primal = 0.0;  // || K_rho p + K u || / scale
  double adjoint = 0.0; // || M u - K p - f || / ||f||
};
BlockResiduals verify_coupled_residuals(const DiscreteSystem& sys,
                                        std::span<const double> u,
                                        std::span<const double> p);

} // namespace varoc
