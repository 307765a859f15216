#include "varoc/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace varoc {

std::string SolverReport::csv_row() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6e", solver.c_str(), dim,
                iterations, relative_residual);
  return buf;
}

namespace {

void check_dims(const LinearOperator& a, std::span<const double> b,
                std::span<double> x, const char* who) {
  if (b.size() != static_cast<std::size_t>(a.n) ||
      x.size() != static_cast<std::size_t>(a.n)) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

} // namespace

SolverReport cg(const LinearOperator& a, std::span<const double> b,
                std::span<double> x, const KrylovOptions& opts) {
  check_dims(a, b, x, "cg");
  const std::size_t n = b.size();
  SolverReport report;
  report.solver = "cg";
  report.dim = a.n;

  std::vector<double> r(n), p(n), q(n);
  a.apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  double rr = dot(r, r);
  const double norm0 = std::sqrt(rr);
  if (norm0 == 0.0) {
    report.converged = true;
    return report;
  }
  std::copy(r.begin(), r.end(), p.begin());
  for (int k = 1; k <= opts.max_iterations; ++k) {
    a.apply(p, q);
    const double pq = dot(p, q);
    if (pq <= 0.0) {
      report.iterations = k - 1;
      report.breakdown = true;
      report.relative_residual = std::sqrt(rr) / norm0;
      return report;
    }
    const double alpha = rr / pq;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    const double rr_new = dot(r, r);
    report.iterations = k;
    report.relative_residual = std::sqrt(rr_new) / norm0;
    if (report.relative_residual <= opts.tol) {
      report.converged = true;
      return report;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return report;
}

SolverReport pcg(const LinearOperator& a, const LinearOperator& prec,
                 std::span<const double> b, std::span<double> x,
                 const KrylovOptions& opts) {
  check_dims(a, b, x, "pcg");
  const std::size_t n = b.size();
  SolverReport report;
  report.solver = "pcg";
  report.dim = a.n;

  std::vector<double> r(n), z(n), p(n), q(n);
  a.apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  prec.apply(r, z);
  double rz = dot(r, z);
  if (rz < 0.0) {
    report.breakdown = true;
    return report;
  }
  const double norm0 = std::sqrt(rz);
  if (norm0 == 0.0) {
    report.converged = true;
    return report;
  }
  std::copy(z.begin(), z.end(), p.begin());
  for (int k = 1; k <= opts.max_iterations; ++k) {
    a.apply(p, q);
    const double pq = dot(p, q);
    if (pq <= 0.0) {
      report.iterations = k - 1;
      report.breakdown = true;
      report.relative_residual = std::sqrt(std::max(rz, 0.0)) / norm0;
      return report;
    }
    const double alpha = rz / pq;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    prec.apply(r, z);
    const double rz_new = dot(r, z);
    report.iterations = k;
    if (rz_new < 0.0) {
      report.breakdown = true;
      return report;
    }
    report.relative_residual = std::sqrt(rz_new) / norm0;
    if (report.relative_residual <= opts.tol) {
      report.converged = true;
      return report;
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return report;
}

SolverReport gmres(const LinearOperator& a, const LinearOperator& prec,
                   std::span<const double> b, std::span<double> x,
                   const KrylovOptions& opts) {
  check_dims(a, b, x, "gmres");
  const std::size_t n = b.size();
  SolverReport report;
  report.solver = "gmres";
  report.dim = a.n;

  std::vector<double> t(n), z(n);
  a.apply(x, t);
  for (std::size_t i = 0; i < n; ++i) t[i] = b[i] - t[i];
  prec.apply(t, z);
  const double beta = norm2(z);
  if (beta == 0.0) {
    report.converged = true;
    return report;
  }

  std::vector<std::vector<double>> basis;
  basis.emplace_back(z);
  scale(1.0 / beta, basis[0]);

  // Hessenberg columns, Givens rotations, and transformed rhs.
  std::vector<std::vector<double>> hcols;
  std::vector<double> cs, sn;
  std::vector<double> g{beta};

  double best_residual = 1.0;
  int since_progress = 0;
  int iterations = 0;

  for (int j = 0; j < opts.max_iterations; ++j) {
    a.apply(basis[static_cast<std::size_t>(j)], t);
    prec.apply(t, z);
    std::vector<double> h(static_cast<std::size_t>(j) + 2, 0.0);
    // Modified Gram-Schmidt with one reorthogonalization pass when the
    // residual orthogonality against the basis exceeds 1e-8.
    for (int i = 0; i <= j; ++i) {
      const double hij = dot(basis[static_cast<std::size_t>(i)], z);
      h[static_cast<std::size_t>(i)] = hij;
      axpy(-hij, basis[static_cast<std::size_t>(i)], z);
    }
    const double znorm = norm2(z);
    double ortho_loss = 0.0;
    if (znorm > 0.0) {
      for (int i = 0; i <= j; ++i) {
        ortho_loss = std::max(
            ortho_loss, std::abs(dot(basis[static_cast<std::size_t>(i)], z)) / znorm);
      }
    }
    if (ortho_loss > 1e-8) {
      for (int i = 0; i <= j; ++i) {
        const double corr = dot(basis[static_cast<std::size_t>(i)], z);
        h[static_cast<std::size_t>(i)] += corr;
        axpy(-corr, basis[static_cast<std::size_t>(i)], z);
      }
    }
    h[static_cast<std::size_t>(j) + 1] = norm2(z);

    // Apply accumulated Givens rotations, then the new one.
    for (int i = 0; i < j; ++i) {
      const double tmp = cs[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)] +
                         sn[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i) + 1];
      h[static_cast<std::size_t>(i) + 1] =
          -sn[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)] +
          cs[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i) + 1];
      h[static_cast<std::size_t>(i)] = tmp;
    }
    const double denom = std::hypot(h[static_cast<std::size_t>(j)],
                                    h[static_cast<std::size_t>(j) + 1]);
    double c = 1.0, s = 0.0;
    if (denom > 0.0) {
      c = h[static_cast<std::size_t>(j)] / denom;
      s = h[static_cast<std::size_t>(j) + 1] / denom;
    }
    cs.push_back(c);
    sn.push_back(s);
    h[static_cast<std::size_t>(j)] = denom;
    h[static_cast<std::size_t>(j) + 1] = 0.0;
    g.push_back(-s * g[static_cast<std::size_t>(j)]);
    g[static_cast<std::size_t>(j)] *= c;
    hcols.push_back(std::move(h));

    iterations = j + 1;
    const double residual = std::abs(g[static_cast<std::size_t>(j) + 1]) / beta;
    report.relative_residual = residual;
    report.iterations = iterations;

    if (residual <= opts.tol) {
      report.converged = true;
      break;
    }
    if (residual < best_residual * (1.0 - 1e-12)) {
      best_residual = residual;
      since_progress = 0;
    } else if (++since_progress >= 50) {
      report.stagnated = true;
      break;
    }
    if (hcols.back()[static_cast<std::size_t>(j) + 1] == 0.0 &&
        norm2(z) == 0.0) {
      // Exact solution in the current space.
      report.converged = residual <= opts.tol;
      break;
    }
    basis.emplace_back(z);
    scale(1.0 / norm2(basis.back()), basis.back());
  }

  // Back substitution for the least-squares coefficients.
  const int m = iterations;
  std::vector<double> y(static_cast<std::size_t>(m), 0.0);
  for (int i = m - 1; i >= 0; --i) {
    double sum = g[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < m; ++k) {
      sum -= hcols[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
             y[static_cast<std::size_t>(k)];
    }
    const double diag = hcols[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(i)] = diag != 0.0 ? sum / diag : 0.0;
  }
  for (int i = 0; i < m; ++i) {
    axpy(y[static_cast<std::size_t>(i)], basis[static_cast<std::size_t>(i)], x);
  }
  return report;
}

SolverReport bp_cg(const BramblePasciakParts& parts, std::span<const double> f,
                   std::span<double> p, std::span<double> u,
                   const KrylovOptions& opts) {
  if (parts.k_rho == nullptr || parts.k == nullptr || parts.m == nullptr) {
    throw std::invalid_argument("bp_cg: missing matrix blocks");
  }
  const Index n = parts.k->dim();
  const std::size_t ns = static_cast<std::size_t>(n);
  if (f.size() != ns || p.size() != ns || u.size() != ns ||
      parts.lumped_mass.size() != ns) {
    throw std::invalid_argument("bp_cg: dimension mismatch");
  }

  // Transformed operator: with t = (K_rho p + K u, K p - M u) the image is
  // (K_rho c - t1, K c - t2) where c = C^{-1} t1.
  LinearOperator op;
  op.n = 2 * n;
  op.symmetric = true;
  op.apply_fn = [&parts, n, ns](std::span<const double> xv, std::span<double> yv) {
    std::vector<double> t1(ns), t2(ns), c(ns), w(ns);
    const auto xp = xv.subspan(0, ns);
    const auto xu = xv.subspan(ns, ns);
    parts.k_rho->apply(xp, t1);
    parts.k->apply(xu, w);
    for (std::size_t i = 0; i < ns; ++i) t1[i] += w[i];
    parts.k->apply(xp, t2);
    parts.m->apply(xu, w);
    for (std::size_t i = 0; i < ns; ++i) t2[i] -= w[i];
    parts.apply_c_inv(t1, c);
    parts.k_rho->apply(c, w);
    for (std::size_t i = 0; i < ns; ++i) yv[i] = w[i] - t1[i];
    parts.k->apply(c, w);
    for (std::size_t i = 0; i < ns; ++i) yv[ns + i] = w[i] - t2[i];
  };

  LinearOperator prec;
  prec.n = 2 * n;
  prec.symmetric = true;
  prec.apply_fn = [&parts, ns](std::span<const double> rv, std::span<double> zv) {
    parts.apply_p1_inv(rv.subspan(0, ns), zv.subspan(0, ns));
    for (std::size_t i = 0; i < ns; ++i) {
      zv[ns + i] = rv[ns + i] / parts.lumped_mass[i];
    }
  };

  // Right-hand side of the transformed system: (0, f).
  std::vector<double> rhs(2 * ns, 0.0);
  std::copy(f.begin(), f.end(), rhs.begin() + static_cast<std::ptrdiff_t>(ns));
  std::vector<double> xv(2 * ns, 0.0);
  std::copy(p.begin(), p.end(), xv.begin());
  std::copy(u.begin(), u.end(), xv.begin() + static_cast<std::ptrdiff_t>(ns));

  SolverReport report = pcg(op, prec, rhs, xv, opts);
  report.solver = "bp_cg";
  report.dim = 2 * n;
  std::copy(xv.begin(), xv.begin() + static_cast<std::ptrdiff_t>(ns), p.begin());
  std::copy(xv.begin() + static_cast<std::ptrdiff_t>(ns), xv.end(), u.begin());
  return report;
}

EigenEstimate lanczos_eigen_estimate(const LinearOperator& a, int steps,
                                     std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(a.n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n), v_prev(n, 0.0), w(n);
  for (double& x : v) x = dist(rng);
  scale(1.0 / norm2(v), v);

  std::vector<double> alpha, beta;
  double beta_prev = 0.0;
  const int m = std::min<int>(steps, static_cast<int>(n));
  for (int j = 0; j < m; ++j) {
    a.apply(v, w);
    const double aj = dot(v, w);
    alpha.push_back(aj);
    for (std::size_t i = 0; i < n; ++i) w[i] -= aj * v[i] + beta_prev * v_prev[i];
    const double bj = norm2(w);
    if (bj < 1e-14) break;
    beta.push_back(bj);
    beta_prev = bj;
    v_prev = v;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / bj;
  }

  const int k = static_cast<int>(alpha.size());
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    tri(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < k) {
      tri(i, i + 1) = beta[static_cast<std::size_t>(i)];
      tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
  EigenEstimate out;
  out.min = es.eigenvalues().minCoeff();
  out.max = es.eigenvalues().maxCoeff();
  return out;
}

} // namespace varoc
