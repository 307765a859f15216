#include "varoc/csr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace varoc {

CsrMatrix CsrMatrix::from_triplets(Index n, std::vector<Triplet> triplets) {
  if (n < 0) throw std::invalid_argument("CsrMatrix: negative dimension");
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n) {
      throw std::out_of_range("CsrMatrix: triplet index out of range");
    }
  }
  // Stable sort keeps the insertion order of equal keys, so accumulation is
  // deterministic and transposed entry pairs sum in the same order.
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& a, const Triplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });
  CsrMatrix m;
  m.n_ = n;
  m.row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  m.cols_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  std::size_t i = 0;
  for (Index row = 0; row < n; ++row) {
    while (i < triplets.size() && triplets[i].row == row) {
      const Index col = triplets[i].col;
      double sum = 0.0;
      while (i < triplets.size() && triplets[i].row == row && triplets[i].col == col) {
        sum += triplets[i].value;
        ++i;
      }
      if (sum != 0.0) {
        m.cols_.push_back(col);
        m.values_.push_back(sum);
      }
    }
    m.row_offsets_[static_cast<std::size_t>(row) + 1] =
        static_cast<std::int64_t>(m.cols_.size());
  }
  return m;
}

CsrMatrix CsrMatrix::identity(Index n) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, std::move(t));
}

void CsrMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (Index row = 0; row < n_; ++row) {
    double sum = 0.0;
    const auto begin = row_offsets_[static_cast<std::size_t>(row)];
    const auto end = row_offsets_[static_cast<std::size_t>(row) + 1];
    for (std::int64_t k = begin; k < end; ++k) {
      sum += values_[static_cast<std::size_t>(k)] *
             x[static_cast<std::size_t>(cols_[static_cast<std::size_t>(k)])];
    }
    y[static_cast<std::size_t>(row)] = sum;
  }
}

double CsrMatrix::coeff(Index row, Index col) const {
  const auto begin = cols_.begin() + row_offsets_[static_cast<std::size_t>(row)];
  const auto end = cols_.begin() + row_offsets_[static_cast<std::size_t>(row) + 1];
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - cols_.begin())];
}

bool CsrMatrix::is_symmetric(double tol) const {
  for (Index row = 0; row < n_; ++row) {
    const auto begin = row_offsets_[static_cast<std::size_t>(row)];
    const auto end = row_offsets_[static_cast<std::size_t>(row) + 1];
    for (std::int64_t k = begin; k < end; ++k) {
      const Index col = cols_[static_cast<std::size_t>(k)];
      const double v = values_[static_cast<std::size_t>(k)];
      if (std::abs(v - coeff(col, row)) > tol) return false;
    }
  }
  return true;
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(static_cast<std::size_t>(n_), 0.0);
  for (Index row = 0; row < n_; ++row) d[static_cast<std::size_t>(row)] = coeff(row, row);
  return d;
}

void DiagonalMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < d_.size(); ++i) y[i] = d_[i] * x[i];
}

void DiagonalMatrix::apply_inverse(std::span<const double> x,
                                   std::span<double> y) const {
  for (std::size_t i = 0; i < d_.size(); ++i) y[i] = x[i] / d_[i];
}

LinearOperator make_operator(const CsrMatrix& a) {
  return {a.dim(), false,
          [&a](std::span<const double> x, std::span<double> y) { a.apply(x, y); }};
}

LinearOperator make_operator(const DiagonalMatrix& d, bool inverse) {
  if (inverse) {
    return {d.dim(), true,
            [&d](std::span<const double> x, std::span<double> y) {
              d.apply_inverse(x, y);
            }};
  }
  return {d.dim(), true,
          [&d](std::span<const double> x, std::span<double> y) { d.apply(x, y); }};
}

LinearOperator make_identity_operator(Index n) {
  return {n, true, [](std::span<const double> x, std::span<double> y) {
            std::copy(x.begin(), x.end(), y.begin());
          }};
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

} // namespace varoc
