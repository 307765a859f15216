#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "varoc/csr.hpp"
#include "varoc/mesh.hpp"

namespace varoc {

/// Maps mesh vertices to contiguous equation numbers.  The interior map
/// excludes boundary vertices (homogeneous Dirichlet data is eliminated);
/// the all-vertices map is used by tests and export.
class DofMap {
public:
  static DofMap interior(const SimplicialMesh& mesh);
  static DofMap all_vertices(const SimplicialMesh& mesh);

  Index num_dofs() const { return num_dofs_; }
  Index dof_of_vertex(Index v) const {
    return dof_of_vertex_[static_cast<std::size_t>(v)];
  }
  Index vertex_of_dof(Index d) const {
    return vertex_of_dof_[static_cast<std::size_t>(d)];
  }
  std::uint64_t mesh_revision() const { return mesh_revision_; }

private:
  Index num_dofs_ = 0;
  std::uint64_t mesh_revision_ = 0;
  std::vector<Index> dof_of_vertex_;
  std::vector<Index> vertex_of_dof_;
};

/// Desired state: an axis-aligned box indicator or a smooth callable with
/// its exact gradient.
class TargetFunction {
public:
  using Scalar = std::function<double(std::span<const double>)>;
  using Gradient =
      std::function<void(std::span<const double>, std::span<double>)>;

  static TargetFunction box(std::span<const double> lo,
                            std::span<const double> hi);
  static TargetFunction smooth(Scalar value, Gradient gradient);

  bool is_box() const { return is_box_; }
  std::span<const double> box_lo() const { return {lo_.data(), dim_}; }
  std::span<const double> box_hi() const { return {hi_.data(), dim_}; }

  double value(std::span<const double> x) const;
  void gradient(std::span<const double> x, std::span<double> g) const;

private:
  bool is_box_ = false;
  std::size_t dim_ = 0;
  std::array<double, 3> lo_{};
  std::array<double, 3> hi_{};
  Scalar value_;
  Gradient gradient_;
};

enum class RegularizationMode {
  variable_local, // rho = h_l^2 per element
  constant,       // rho = parameter everywhere
  scaled_local,   // rho = parameter * h_l^2
};

/// Piecewise constant regularization parameter, one strictly positive value
/// per element (units: length^2).
struct RegularizationField {
  RegularizationMode mode = RegularizationMode::variable_local;
  double parameter = 1.0;
  std::vector<double> values;
};

/// Squared local length scale used by the regularization: the width of the
/// dyadic grid cell the element descends from, (n! vol)^{2/n}.
double dyadic_cell_extent_sq(int dim, double volume);

RegularizationField build_regularization_field(const SimplicialMesh& mesh,
                                               RegularizationMode mode,
                                               double parameter = 1.0);

/// Controls the recursive subdivision used for integrals against box
/// indicator targets: straddling elements are split to depth
/// subdivision_depth (2^{n*depth} leaf cells at most), the midpoint rule is
/// applied on the leaves.  max_leaf_cells guards against runaway recursion.
struct QuadratureSpec {
  int subdivision_depth = 6;
  std::int64_t max_leaf_cells = std::int64_t(1) << 26;
};

CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, const DofMap& dofs);
CsrMatrix assemble_weighted_stiffness(const SimplicialMesh& mesh,
                                      const DofMap& dofs,
                                      const RegularizationField& rho);
CsrMatrix assemble_mass(const SimplicialMesh& mesh, const DofMap& dofs);

/// Row sums of a symmetric nonnegative matrix as a diagonal matrix; throws
/// if a row sum is not positive.
DiagonalMatrix lump_mass(const CsrMatrix& m);

std::vector<double> assemble_load(const SimplicialMesh& mesh,
                                  const DofMap& dofs,
                                  const TargetFunction& target,
                                  const QuadratureSpec& quad = {});

/// Squared local error ||u_h - target||^2 on element e, where u_h is the P1
/// function with the given interior coefficients (boundary values zero).
double element_l2_error_sq(const SimplicialMesh& mesh, const DofMap& dofs,
                           Index e, std::span<const double> coeffs,
                           const TargetFunction& target,
                           const QuadratureSpec& quad = {});

double global_l2_error(const SimplicialMesh& mesh, const DofMap& dofs,
                       std::span<const double> coeffs,
                       const TargetFunction& target,
                       const QuadratureSpec& quad = {});

} // namespace varoc
