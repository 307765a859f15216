#include "varoc/cholesky.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace varoc {

namespace {

Eigen::SparseMatrix<double> to_eigen(const CsrMatrix& a,
                                     const std::vector<double>* scale = nullptr) {
  const Index n = a.dim();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(a.num_nonzeros()));
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (Index row = 0; row < n; ++row) {
    for (std::int64_t k = offsets[static_cast<std::size_t>(row)];
         k < offsets[static_cast<std::size_t>(row) + 1]; ++k) {
      const Index col = cols[static_cast<std::size_t>(k)];
      double v = vals[static_cast<std::size_t>(k)];
      if (scale) {
        v *= (*scale)[static_cast<std::size_t>(row)] *
             (*scale)[static_cast<std::size_t>(col)];
      }
      triplets.emplace_back(row, col, v);
    }
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

} // namespace

// The adaptive meshes produce weighted stiffness matrices whose entries span
// the square of the mesh-size range; symmetric Jacobi equilibration keeps the
// Cholesky pivots away from cancellation at extreme grading.
struct SpdFactorization::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  std::vector<double> scale; // 1/sqrt(diag)
  Index n = 0;
};

SpdFactorization::SpdFactorization(const CsrMatrix& a) : impl_(new Impl) {
  impl_->n = a.dim();
  impl_->scale.resize(static_cast<std::size_t>(a.dim()));
  for (Index i = 0; i < a.dim(); ++i) {
    const double d = a.coeff(i, i);
    if (!(d > 0.0)) {
      throw NotPositiveDefiniteError(
          "sparse Cholesky failed: nonpositive diagonal entry", i);
    }
    impl_->scale[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(d);
  }
  impl_->ldlt.compute(to_eigen(a, &impl_->scale));
  if (impl_->ldlt.info() != Eigen::Success ||
      impl_->ldlt.vectorD().minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError(
        "sparse Cholesky failed: matrix is not positive definite", -1);
  }
}

SpdFactorization::~SpdFactorization() = default;
SpdFactorization::SpdFactorization(SpdFactorization&&) noexcept = default;
SpdFactorization& SpdFactorization::operator=(SpdFactorization&&) noexcept = default;

Index SpdFactorization::dim() const { return impl_->n; }

void SpdFactorization::solve(std::span<const double> b, std::span<double> x) const {
  Eigen::VectorXd bs(impl_->n);
  for (Index i = 0; i < impl_->n; ++i) {
    bs[i] = b[static_cast<std::size_t>(i)] * impl_->scale[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd xs = impl_->ldlt.solve(bs);
  for (Index i = 0; i < impl_->n; ++i) {
    x[static_cast<std::size_t>(i)] = xs[i] * impl_->scale[static_cast<std::size_t>(i)];
  }
}

struct SparseLuFactorization::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  Index n = 0;
  bool ok = false;
};

SparseLuFactorization::SparseLuFactorization(const CsrMatrix& a) : impl_(new Impl) {
  impl_->n = a.dim();
  auto m = to_eigen(a);
  impl_->lu.analyzePattern(m);
  impl_->lu.factorize(m);
  if (impl_->lu.info() != Eigen::Success) {
    throw std::runtime_error("sparse LU failed: matrix is singular");
  }
  impl_->ok = true;
}

SparseLuFactorization::~SparseLuFactorization() = default;
SparseLuFactorization::SparseLuFactorization(SparseLuFactorization&&) noexcept = default;
SparseLuFactorization& SparseLuFactorization::operator=(SparseLuFactorization&&) noexcept =
    default;

Index SparseLuFactorization::dim() const { return impl_->n; }

void SparseLuFactorization::solve(std::span<const double> b,
                                  std::span<double> x) const {
  Eigen::Map<const Eigen::VectorXd> bm(b.data(), impl_->n);
  Eigen::Map<Eigen::VectorXd> xm(x.data(), impl_->n);
  xm = impl_->lu.solve(bm);
}

} // namespace varoc
