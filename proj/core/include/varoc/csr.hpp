#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "varoc/mesh.hpp"

namespace varoc {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix, square.  Column indices are sorted within
/// each row and duplicate entries have been accumulated; entries that sum to
/// exactly zero are dropped.
class CsrMatrix {
public:
  CsrMatrix() = default;

  static CsrMatrix from_triplets(Index n, std::vector<Triplet> triplets);
  static CsrMatrix identity(Index n);

  Index dim() const { return n_; }
  std::int64_t num_nonzeros() const {
    return static_cast<std::int64_t>(values_.size());
  }

  void apply(std::span<const double> x, std::span<double> y) const;

  /// Exact transpose-compare; tol=0 demands bitwise symmetric values.
  bool is_symmetric(double tol = 0.0) const;

  double coeff(Index row, Index col) const; // 0 if not stored

  std::span<const std::int64_t> row_offsets() const { return row_offsets_; }
  std::span<const Index> col_indices() const { return cols_; }
  std::span<const double> values() const { return values_; }

  std::vector<double> diagonal() const;

private:
  Index n_ = 0;
  std::vector<std::int64_t> row_offsets_{0};
  std::vector<Index> cols_;
  std::vector<double> values_;
};

/// y = alpha*A*x + beta*y convenience wrappers live on the operator side;
/// the diagonal matrix is used for lumped-mass preconditioning.
class DiagonalMatrix {
public:
  DiagonalMatrix() = default;
  explicit DiagonalMatrix(std::vector<double> d) : d_(std::move(d)) {}

  Index dim() const { return static_cast<Index>(d_.size()); }
  std::span<const double> entries() const { return d_; }

  void apply(std::span<const double> x, std::span<double> y) const;
  void apply_inverse(std::span<const double> x, std::span<double> y) const;

private:
  std::vector<double> d_;
};

/// Matrix-free linear operator: dimension plus an apply contract y := A x.
struct LinearOperator {
  Index n = 0;
  bool symmetric = false;
  std::function<void(std::span<const double>, std::span<double>)> apply_fn;

  void apply(std::span<const double> x, std::span<double> y) const {
    apply_fn(x, y);
  }
};

LinearOperator make_operator(const CsrMatrix& a);
LinearOperator make_operator(const DiagonalMatrix& d, bool inverse = false);
LinearOperator make_identity_operator(Index n);

// Small dense-vector helpers shared by the solvers.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);

} // namespace varoc
