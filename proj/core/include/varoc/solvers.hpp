#pragma once

#include <functional>
#include <span>
#include <string>

#include "varoc/csr.hpp"

namespace varoc {

struct SolverReport {
  std::string solver;
  Index dim = 0;
  int iterations = 0;
  double relative_residual = 0.0; // final relative preconditioned residual
  bool converged = false;
  bool breakdown = false;
  bool stagnated = false;
  std::string inner_mode; // how inner inverse operations were realized

  /// "solver,dofs,iterations,residual"
  std::string csv_row() const;
};

struct KrylovOptions {
  double tol = 1e-6; // stop when the preconditioned residual drops by 1/tol
  int max_iterations = 10000;
};

/// Plain conjugate gradients for SPD operators.  Stops on
/// ||r_k|| <= tol*||r_0||; flags breakdown when p'Ap <= 0.
SolverReport cg(const LinearOperator& a, std::span<const double> b,
                std::span<double> x, const KrylovOptions& opts = {});

/// Preconditioned CG; prec applies the inverse of the preconditioner.
/// Stops on sqrt(r'z) reduced by tol.
SolverReport pcg(const LinearOperator& a, const LinearOperator& prec,
                 std::span<const double> b, std::span<double> x,
                 const KrylovOptions& opts = {});

/// Unrestarted left-preconditioned GMRES with modified Gram-Schmidt and a
/// single reorthogonalization pass when orthogonality degrades.  Reports
/// stagnation when the residual makes no progress over 50 iterations.
SolverReport gmres(const LinearOperator& a, const LinearOperator& prec,
                   std::span<const double> b, std::span<double> x,
                   const KrylovOptions& opts = {});

/// Ingredients of the transformed saddle-point solve.  apply_c_inv applies
/// the inverse of the scaled spd matrix C (C < K_rho in operator order),
/// apply_p1_inv the inverse of K_rho - C (first preconditioner block), and
/// lumped_mass holds the diagonal preconditioner of the second block.
struct BramblePasciakParts {
  const CsrMatrix* k_rho = nullptr;
  const CsrMatrix* k = nullptr;
  const CsrMatrix* m = nullptr;
  std::function<void(std::span<const double>, std::span<double>)> apply_c_inv;
  std::function<void(std::span<const double>, std::span<double>)> apply_p1_inv;
  std::span<const double> lumped_mass;
};

/// CG on the transformed symmetric positive definite coupled system.
/// f is the load of the second block equation; on return p and u hold the
/// adjoint and state coefficients.  Loss of positivity in the transformed
/// operator or preconditioner sets the breakdown flag (C too close to or
/// exceeding K_rho).
SolverReport bp_cg(const BramblePasciakParts& parts, std::span<const double> f,
                   std::span<double> p, std::span<double> u,
                   const KrylovOptions& opts = {});

/// k-step Lanczos estimates of the extreme eigenvalues of a symmetric
/// operator (optionally preconditioned); used for scaling heuristics and
/// definiteness probes.
struct EigenEstimate {
  double min = 0.0;
  double max = 0.0;
};
EigenEstimate lanczos_eigen_estimate(const LinearOperator& a, int steps,
                                     std::uint64_t seed = 1234);

} // namespace varoc
