#pragma once

#include <memory>
#include <span>
#include <stdexcept>

#include "varoc/csr.hpp"

namespace varoc {

/// Thrown when a matrix handed to the sparse Cholesky factorization is not
/// numerically positive definite.  pivot is the first nonpositive diagonal
/// entry when one exists, -1 otherwise.
class NotPositiveDefiniteError : public std::runtime_error {
public:
  NotPositiveDefiniteError(const std::string& what, Index pivot)
      : std::runtime_error(what), pivot_(pivot) {}
  Index pivot() const { return pivot_; }

private:
  Index pivot_;
};

/// Sparse Cholesky factorization with fill-reducing ordering, built once and
/// reused for repeated solves.
class SpdFactorization {
public:
  explicit SpdFactorization(const CsrMatrix& a);
  ~SpdFactorization();
  SpdFactorization(SpdFactorization&&) noexcept;
  SpdFactorization& operator=(SpdFactorization&&) noexcept;
  SpdFactorization(const SpdFactorization&) = delete;
  SpdFactorization& operator=(const SpdFactorization&) = delete;

  Index dim() const;
  void solve(std::span<const double> b, std::span<double> x) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Sparse LU for the (nonsymmetric) block systems that are solved directly.
class SparseLuFactorization {
public:
  explicit SparseLuFactorization(const CsrMatrix& a);
  ~SparseLuFactorization();
  SparseLuFactorization(SparseLuFactorization&&) noexcept;
  SparseLuFactorization& operator=(SparseLuFactorization&&) noexcept;
  SparseLuFactorization(const SparseLuFactorization&) = delete;
  SparseLuFactorization& operator=(const SparseLuFactorization&) = delete;

  Index dim() const;
  void solve(std::span<const double> b, std::span<double> x) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace varoc
