#include "varoc/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace varoc {

DofMap DofMap::interior(const SimplicialMesh& mesh) {
  DofMap map;
  map.mesh_revision_ = mesh.revision();
  map.dof_of_vertex_.assign(static_cast<std::size_t>(mesh.num_vertices()), -1);
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.is_boundary_vertex(v)) {
      map.dof_of_vertex_[static_cast<std::size_t>(v)] = map.num_dofs_++;
      map.vertex_of_dof_.push_back(v);
    }
  }
  return map;
}

DofMap DofMap::all_vertices(const SimplicialMesh& mesh) {
  DofMap map;
  map.mesh_revision_ = mesh.revision();
  map.num_dofs_ = mesh.num_vertices();
  map.dof_of_vertex_.resize(static_cast<std::size_t>(mesh.num_vertices()));
  map.vertex_of_dof_.resize(static_cast<std::size_t>(mesh.num_vertices()));
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    map.dof_of_vertex_[static_cast<std::size_t>(v)] = v;
    map.vertex_of_dof_[static_cast<std::size_t>(v)] = v;
  }
  return map;
}

TargetFunction TargetFunction::box(std::span<const double> lo,
                                   std::span<const double> hi) {
  if (lo.size() != hi.size() || lo.empty() || lo.size() > 3) {
    throw std::invalid_argument("TargetFunction::box: bad corner dimensions");
  }
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i]) || lo[i] < 0.0 || hi[i] > 1.0) {
      throw std::invalid_argument(
          "TargetFunction::box: corners must satisfy 0 <= lo < hi <= 1");
    }
  }
  TargetFunction t;
  t.is_box_ = true;
  t.dim_ = lo.size();
  std::copy(lo.begin(), lo.end(), t.lo_.begin());
  std::copy(hi.begin(), hi.end(), t.hi_.begin());
  return t;
}

TargetFunction TargetFunction::smooth(Scalar value, Gradient gradient) {
  if (!value) throw std::invalid_argument("TargetFunction::smooth: null callable");
  TargetFunction t;
  t.value_ = std::move(value);
  t.gradient_ = std::move(gradient);
  return t;
}

double TargetFunction::value(std::span<const double> x) const {
  if (is_box_) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] <= lo_[i] || x[i] >= hi_[i]) return 0.0;
    }
    return 1.0;
  }
  return value_(x);
}

void TargetFunction::gradient(std::span<const double> x, std::span<double> g) const {
  if (is_box_ || !gradient_) {
    throw std::logic_error("TargetFunction: gradient not available");
  }
  gradient_(x, g);
}

double dyadic_cell_extent_sq(int dim, double volume) {
  switch (dim) {
    case 1:
      return volume * volume;
    case 2:
      return 2.0 * volume; // (2 vol)^{2/2}, exact
    default:
      return std::cbrt(6.0 * volume) * std::cbrt(6.0 * volume);
  }
}

RegularizationField build_regularization_field(const SimplicialMesh& mesh,
                                               RegularizationMode mode,
                                               double parameter) {
  if (mode != RegularizationMode::variable_local && parameter <= 0.0) {
    throw std::invalid_argument("regularization parameter must be positive");
  }
  RegularizationField field;
  field.mode = mode;
  field.parameter = parameter;
  field.values.resize(static_cast<std::size_t>(mesh.num_elements()));
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    // Local length scale: the grid cell width the element descends from,
    // h_l = (n! vol)^{1/n}.  On the structured benchmark meshes this is the
    // dyadic lattice spacing (1/4, 1/8, ...), which is also the mesh-size
    // convention behind the reference iteration counts and error levels the
    // solver studies are compared against.
    const double cell_sq = dyadic_cell_extent_sq(mesh.dim(), mesh.element_volume(e));
    switch (mode) {
      case RegularizationMode::variable_local:
        field.values[static_cast<std::size_t>(e)] = cell_sq;
        break;
      case RegularizationMode::constant:
        field.values[static_cast<std::size_t>(e)] = parameter;
        break;
      case RegularizationMode::scaled_local:
        field.values[static_cast<std::size_t>(e)] = parameter * cell_sq;
        break;
    }
  }
  return field;
}

namespace {

constexpr std::size_t kMaxCorners = 4;

struct LocalGradients {
  // Row i holds grad(lambda_i); volume is the simplex measure.
  double g[kMaxCorners][3];
  double volume;
};

LocalGradients barycentric_gradients(const SimplicialMesh& mesh, Index e) {
  const int dim = mesh.dim();
  const auto el = mesh.element(e);
  double x[kMaxCorners][3] = {};
  for (int i = 0; i <= dim; ++i) {
    const auto v = mesh.vertex(el[static_cast<std::size_t>(i)]);
    for (int k = 0; k < dim; ++k) x[i][k] = v[static_cast<std::size_t>(k)];
  }
  LocalGradients out{};
  if (dim == 1) {
    const double d = x[1][0] - x[0][0];
    out.volume = std::abs(d);
    out.g[1][0] = 1.0 / d;
    out.g[0][0] = -out.g[1][0];
  } else if (dim == 2) {
    const double a11 = x[1][0] - x[0][0], a12 = x[1][1] - x[0][1];
    const double a21 = x[2][0] - x[0][0], a22 = x[2][1] - x[0][1];
    const double det = a11 * a22 - a12 * a21;
    out.volume = 0.5 * std::abs(det);
    // Rows of the inverse edge matrix.
    out.g[1][0] = a22 / det;
    out.g[1][1] = -a21 / det;
    out.g[2][0] = -a12 / det;
    out.g[2][1] = a11 / det;
    for (int k = 0; k < 2; ++k) out.g[0][k] = -(out.g[1][k] + out.g[2][k]);
  } else {
    double a[3][3];
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) a[i][k] = x[i + 1][k] - x[0][k];
    }
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    out.volume = std::abs(det) / 6.0;
    // Cofactor matrix over det = transpose of the inverse of the edge
    // matrix; its rows are the barycentric gradients.
    const double cof[3][3] = {
        {(a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det,
         -(a[1][0] * a[2][2] - a[1][2] * a[2][0]) / det,
         (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det},
        {-(a[0][1] * a[2][2] - a[0][2] * a[2][1]) / det,
         (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det,
         -(a[0][0] * a[2][1] - a[0][1] * a[2][0]) / det},
        {(a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det,
         -(a[0][0] * a[1][2] - a[0][2] * a[1][0]) / det,
         (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det}};
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) out.g[i + 1][k] = cof[i][k];
    }
    for (int k = 0; k < 3; ++k) {
      out.g[0][k] = -(out.g[1][k] + out.g[2][k] + out.g[3][k]);
    }
  }
  return out;
}

void check_assembly_inputs(const SimplicialMesh& mesh, const DofMap& dofs) {
  if (dofs.mesh_revision() != mesh.revision()) {
    throw std::invalid_argument("assembly: dof map built for a different mesh");
  }
  if (dofs.num_dofs() == 0) {
    throw std::runtime_error("assembly: mesh has no interior vertices");
  }
}

// Sparsity pattern from vertex adjacency, then one numeric pass per matrix.
struct Pattern {
  std::vector<std::int64_t> offsets;
  std::vector<Index> cols;
};

Pattern build_pattern(const SimplicialMesh& mesh, const DofMap& dofs) {
  const int nv = mesh.dim() + 1;
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(dofs.num_dofs()));
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    Index local[kMaxCorners];
    for (int i = 0; i < nv; ++i) {
      local[i] = dofs.dof_of_vertex(el[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < nv; ++i) {
      if (local[i] < 0) continue;
      for (int j = 0; j < nv; ++j) {
        if (local[j] >= 0) adj[static_cast<std::size_t>(local[i])].push_back(local[j]);
      }
    }
  }
  Pattern p;
  p.offsets.assign(static_cast<std::size_t>(dofs.num_dofs()) + 1, 0);
  for (std::size_t r = 0; r < adj.size(); ++r) {
    auto& row = adj[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    p.offsets[r + 1] = p.offsets[r] + static_cast<std::int64_t>(row.size());
  }
  p.cols.resize(static_cast<std::size_t>(p.offsets.back()));
  for (std::size_t r = 0; r < adj.size(); ++r) {
    std::copy(adj[r].begin(), adj[r].end(),
              p.cols.begin() + static_cast<std::ptrdiff_t>(p.offsets[r]));
  }
  return p;
}

class PatternAccumulator {
public:
  PatternAccumulator(const SimplicialMesh& mesh, const DofMap& dofs)
      : pattern_(build_pattern(mesh, dofs)),
        values_(pattern_.cols.size(), 0.0) {}

  void add(Index row, Index col, double value) {
    const auto begin = pattern_.cols.begin() +
                       static_cast<std::ptrdiff_t>(pattern_.offsets[static_cast<std::size_t>(row)]);
    const auto end = pattern_.cols.begin() +
                     static_cast<std::ptrdiff_t>(pattern_.offsets[static_cast<std::size_t>(row) + 1]);
    const auto it = std::lower_bound(begin, end, col);
    values_[static_cast<std::size_t>(it - pattern_.cols.begin())] += value;
  }

  CsrMatrix finish(Index n) {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (Index row = 0; row < n; ++row) {
      for (std::int64_t k = pattern_.offsets[static_cast<std::size_t>(row)];
           k < pattern_.offsets[static_cast<std::size_t>(row) + 1]; ++k) {
        t.push_back({row, pattern_.cols[static_cast<std::size_t>(k)],
                     values_[static_cast<std::size_t>(k)]});
      }
    }
    return CsrMatrix::from_triplets(n, std::move(t));
  }

private:
  Pattern pattern_;
  std::vector<double> values_;
};

CsrMatrix assemble_weighted(const SimplicialMesh& mesh, const DofMap& dofs,
                            const std::vector<double>* inv_weight) {
  check_assembly_inputs(mesh, dofs);
  const int nv = mesh.dim() + 1;
  PatternAccumulator acc(mesh, dofs);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto lg = barycentric_gradients(mesh, e);
    const double w = inv_weight ? (*inv_weight)[static_cast<std::size_t>(e)] : 1.0;
    const auto el = mesh.element(e);
    Index local[kMaxCorners];
    for (int i = 0; i < nv; ++i) {
      local[i] = dofs.dof_of_vertex(el[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < nv; ++i) {
      if (local[i] < 0) continue;
      for (int j = 0; j < nv; ++j) {
        if (local[j] < 0) continue;
        double gg = 0.0;
        for (int k = 0; k < mesh.dim(); ++k) gg += lg.g[i][k] * lg.g[j][k];
        acc.add(local[i], local[j], w * lg.volume * gg);
      }
    }
  }
  return acc.finish(dofs.num_dofs());
}

} // namespace

CsrMatrix assemble_stiffness(const SimplicialMesh& mesh, const DofMap& dofs) {
  return assemble_weighted(mesh, dofs, nullptr);
}

CsrMatrix assemble_weighted_stiffness(const SimplicialMesh& mesh,
                                      const DofMap& dofs,
                                      const RegularizationField& rho) {
  if (rho.values.size() != static_cast<std::size_t>(mesh.num_elements())) {
    throw std::invalid_argument(
        "assemble_weighted_stiffness: field size does not match element count");
  }
  std::vector<double> inv(rho.values.size());
  for (std::size_t e = 0; e < rho.values.size(); ++e) {
    if (!(rho.values[e] > 0.0)) {
      throw std::invalid_argument(
          "assemble_weighted_stiffness: nonpositive regularization value");
    }
    inv[e] = 1.0 / rho.values[e];
  }
  return assemble_weighted(mesh, dofs, &inv);
}

CsrMatrix assemble_mass(const SimplicialMesh& mesh, const DofMap& dofs) {
  check_assembly_inputs(mesh, dofs);
  const int nv = mesh.dim() + 1;
  const double scale = 1.0 / static_cast<double>((nv) * (nv + 1));
  PatternAccumulator acc(mesh, dofs);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const double vol = mesh.element_volume(e);
    const auto el = mesh.element(e);
    Index local[kMaxCorners];
    for (int i = 0; i < nv; ++i) {
      local[i] = dofs.dof_of_vertex(el[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < nv; ++i) {
      if (local[i] < 0) continue;
      for (int j = 0; j < nv; ++j) {
        if (local[j] < 0) continue;
        acc.add(local[i], local[j], vol * scale * (i == j ? 2.0 : 1.0));
      }
    }
  }
  return acc.finish(dofs.num_dofs());
}

DiagonalMatrix lump_mass(const CsrMatrix& m) {
  std::vector<double> d(static_cast<std::size_t>(m.dim()), 0.0);
  const auto offsets = m.row_offsets();
  const auto vals = m.values();
  for (Index row = 0; row < m.dim(); ++row) {
    double sum = 0.0;
    for (std::int64_t k = offsets[static_cast<std::size_t>(row)];
         k < offsets[static_cast<std::size_t>(row) + 1]; ++k) {
      sum += vals[static_cast<std::size_t>(k)];
    }
    if (!(sum > 0.0)) {
      throw std::runtime_error("lump_mass: nonpositive row sum at row " +
                               std::to_string(row));
    }
    d[static_cast<std::size_t>(row)] = sum;
  }
  return DiagonalMatrix(std::move(d));
}

namespace {

// ---- quadrature ----------------------------------------------------------

struct QuadPoint {
  double bary[kMaxCorners];
  double weight; // weights sum to one, scale by the element volume
};

// Degree >= 2 rules per dimension (degree 5 / 4 / 2).
std::span<const QuadPoint> smooth_rule(int dim) {
  static const QuadPoint line[3] = {
      {{0.5 - 0.5 * 0.7745966692414834, 0.5 + 0.5 * 0.7745966692414834, 0, 0},
       5.0 / 18.0},
      {{0.5, 0.5, 0, 0}, 8.0 / 18.0},
      {{0.5 + 0.5 * 0.7745966692414834, 0.5 - 0.5 * 0.7745966692414834, 0, 0},
       5.0 / 18.0},
  };
  static constexpr double a = 0.445948490915965;
  static constexpr double wa = 0.223381589678011;
  static constexpr double b = 0.091576213509771;
  static constexpr double wb = 0.109951743655322;
  static const QuadPoint tri[6] = {
      {{1 - 2 * a, a, a, 0}, wa}, {{a, 1 - 2 * a, a, 0}, wa},
      {{a, a, 1 - 2 * a, 0}, wa}, {{1 - 2 * b, b, b, 0}, wb},
      {{b, 1 - 2 * b, b, 0}, wb}, {{b, b, 1 - 2 * b, 0}, wb},
  };
  static constexpr double ta = 0.5854101966249685;
  static constexpr double tb = 0.1381966011250105;
  static const QuadPoint tet[4] = {
      {{ta, tb, tb, tb}, 0.25},
      {{tb, ta, tb, tb}, 0.25},
      {{tb, tb, ta, tb}, 0.25},
      {{tb, tb, tb, ta}, 0.25},
  };
  switch (dim) {
    case 1:
      return {line, 3};
    case 2:
      return {tri, 6};
    default:
      return {tet, 4};
  }
}

struct Corners {
  double x[kMaxCorners][3];
  int dim;
};

Corners element_corners(const SimplicialMesh& mesh, Index e) {
  Corners c{};
  c.dim = mesh.dim();
  const auto el = mesh.element(e);
  for (int i = 0; i <= c.dim; ++i) {
    const auto v = mesh.vertex(el[static_cast<std::size_t>(i)]);
    for (int k = 0; k < c.dim; ++k) c.x[i][k] = v[static_cast<std::size_t>(k)];
  }
  return c;
}

void bary_to_point(const Corners& c, const double* bary, double* out) {
  for (int k = 0; k < c.dim; ++k) {
    double s = 0.0;
    for (int i = 0; i <= c.dim; ++i) s += bary[i] * c.x[i][k];
    out[k] = s;
  }
}

// ---- box indicator moments ------------------------------------------------
//
// moments[i] = integral over the element of chi_box * lambda_i.  Sub-simplex
// vertices carry their parent barycentric coordinates, so the recursion never
// solves for coordinates; children of regular (red) subdivision average them.

enum class BoxClass { inside, outside, straddle };

struct SubSimplex {
  double x[kMaxCorners][3];
  double bary[kMaxCorners][kMaxCorners];
  double volume;
};

BoxClass classify(const SubSimplex& s, int dim, std::span<const double> lo,
                  std::span<const double> hi) {
  bool all_inside = true;
  for (int i = 0; i <= dim; ++i) {
    for (int k = 0; k < dim; ++k) {
      if (s.x[i][k] < lo[static_cast<std::size_t>(k)] ||
          s.x[i][k] > hi[static_cast<std::size_t>(k)]) {
        all_inside = false;
      }
    }
  }
  if (all_inside) return BoxClass::inside;
  for (int k = 0; k < dim; ++k) {
    bool all_lo = true, all_hi = true;
    for (int i = 0; i <= dim; ++i) {
      if (s.x[i][k] > lo[static_cast<std::size_t>(k)]) all_lo = false;
      if (s.x[i][k] < hi[static_cast<std::size_t>(k)]) all_hi = false;
    }
    if (all_lo || all_hi) return BoxClass::outside;
  }
  return BoxClass::straddle;
}

double simplex_volume(const double x[kMaxCorners][3], int dim) {
  switch (dim) {
    case 1:
      return std::abs(x[1][0] - x[0][0]);
    case 2: {
      const double ax = x[1][0] - x[0][0], ay = x[1][1] - x[0][1];
      const double bx = x[2][0] - x[0][0], by = x[2][1] - x[0][1];
      return 0.5 * std::abs(ax * by - ay * bx);
    }
    default: {
      double a[3], b[3], c[3];
      for (int i = 0; i < 3; ++i) {
        a[i] = x[1][i] - x[0][i];
        b[i] = x[2][i] - x[0][i];
        c[i] = x[3][i] - x[0][i];
      }
      const double det = a[0] * (b[1] * c[2] - b[2] * c[1]) -
                         a[1] * (b[0] * c[2] - b[2] * c[0]) +
                         a[2] * (b[0] * c[1] - b[1] * c[0]);
      return std::abs(det) / 6.0;
    }
  }
}

struct BoxRecursion {
  int dim;
  std::span<const double> lo;
  std::span<const double> hi;
  std::int64_t leaf_budget;

  void accumulate_inside(const SubSimplex& s, double* moments) const {
    const double nv = static_cast<double>(dim + 1);
    for (int i = 0; i <= dim; ++i) {
      double avg = 0.0;
      for (int j = 0; j <= dim; ++j) avg += s.bary[j][i];
      moments[i] += s.volume * avg / nv;
    }
  }

  void accumulate_midpoint(const SubSimplex& s, double* moments) const {
    double centroid[3] = {0, 0, 0};
    const double nv = static_cast<double>(dim + 1);
    for (int k = 0; k < dim; ++k) {
      for (int j = 0; j <= dim; ++j) centroid[k] += s.x[j][k];
      centroid[k] /= nv;
    }
    for (int k = 0; k < dim; ++k) {
      if (centroid[k] <= lo[static_cast<std::size_t>(k)] ||
          centroid[k] >= hi[static_cast<std::size_t>(k)]) {
        return; // centroid outside: midpoint rule contributes nothing
      }
    }
    for (int i = 0; i <= dim; ++i) {
      double avg = 0.0;
      for (int j = 0; j <= dim; ++j) avg += s.bary[j][i];
      moments[i] += s.volume * avg / nv;
    }
  }

  void visit(const SubSimplex& s, int depth, double* moments,
             std::int64_t& leaves) const {
    const BoxClass c = classify(s, dim, lo, hi);
    if (c == BoxClass::outside) return;
    if (c == BoxClass::inside) {
      accumulate_inside(s, moments);
      return;
    }
    if (depth == 0) {
      if (++leaves > leaf_budget) {
        throw std::runtime_error("box quadrature: leaf cell budget exceeded");
      }
      accumulate_midpoint(s, moments);
      return;
    }
    subdivide(s, depth, moments, leaves);
  }

  void subdivide(const SubSimplex& s, int depth, double* moments,
                 std::int64_t& leaves) const;

  SubSimplex make_child(const SubSimplex& s,
                        const std::pair<int, int>* pairs) const {
    SubSimplex child{};
    for (int i = 0; i <= dim; ++i) {
      const auto [a, b] = pairs[i];
      for (int k = 0; k < dim; ++k) child.x[i][k] = 0.5 * (s.x[a][k] + s.x[b][k]);
      for (int k = 0; k <= dim; ++k) {
        child.bary[i][k] = 0.5 * (s.bary[a][k] + s.bary[b][k]);
      }
    }
    child.volume = simplex_volume(child.x, dim);
    return child;
  }
};

void BoxRecursion::subdivide(const SubSimplex& s, int depth, double* moments,
                             std::int64_t& leaves) const {
  using P = std::pair<int, int>;
  if (dim == 1) {
    static constexpr P kids[2][2] = {{{0, 0}, {0, 1}}, {{0, 1}, {1, 1}}};
    for (const auto& k : kids) visit(make_child(s, k), depth - 1, moments, leaves);
  } else if (dim == 2) {
    static constexpr P kids[4][3] = {
        {{0, 0}, {0, 1}, {0, 2}},
        {{1, 1}, {0, 1}, {1, 2}},
        {{2, 2}, {0, 2}, {1, 2}},
        {{0, 1}, {1, 2}, {0, 2}},
    };
    for (const auto& k : kids) visit(make_child(s, k), depth - 1, moments, leaves);
  } else {
    // Four corner cells plus the octahedron split along the (01)-(23)
    // diagonal.
    static constexpr P kids[8][4] = {
        {{0, 0}, {0, 1}, {0, 2}, {0, 3}},
        {{1, 1}, {0, 1}, {1, 2}, {1, 3}},
        {{2, 2}, {0, 2}, {1, 2}, {2, 3}},
        {{3, 3}, {0, 3}, {1, 3}, {2, 3}},
        {{0, 1}, {2, 3}, {0, 2}, {0, 3}},
        {{0, 1}, {2, 3}, {0, 3}, {1, 3}},
        {{0, 1}, {2, 3}, {1, 3}, {1, 2}},
        {{0, 1}, {2, 3}, {1, 2}, {0, 2}},
    };
    for (const auto& k : kids) visit(make_child(s, k), depth - 1, moments, leaves);
  }
}

// moments[i] = \int_tau chi_box lambda_i, i = 0..dim.
void box_moments(const SimplicialMesh& mesh, Index e,
                 std::span<const double> lo, std::span<const double> hi,
                 const QuadratureSpec& quad, double* moments) {
  const int dim = mesh.dim();
  for (int i = 0; i <= dim; ++i) moments[i] = 0.0;
  SubSimplex root{};
  const auto corners = element_corners(mesh, e);
  for (int i = 0; i <= dim; ++i) {
    for (int k = 0; k < dim; ++k) root.x[i][k] = corners.x[i][k];
    root.bary[i][i] = 1.0;
  }
  root.volume = mesh.element_volume(e);
  BoxRecursion rec{dim, lo, hi, quad.max_leaf_cells};
  std::int64_t leaves = 0;
  rec.visit(root, quad.subdivision_depth, moments, leaves);
}

} // namespace

std::vector<double> assemble_load(const SimplicialMesh& mesh, const DofMap& dofs,
                                  const TargetFunction& target,
                                  const QuadratureSpec& quad) {
  check_assembly_inputs(mesh, dofs);
  const int dim = mesh.dim();
  const int nv = dim + 1;
  std::vector<double> f(static_cast<std::size_t>(dofs.num_dofs()), 0.0);
  double moments[kMaxCorners];
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    if (target.is_box()) {
      box_moments(mesh, e, target.box_lo(), target.box_hi(), quad, moments);
    } else {
      const auto corners = element_corners(mesh, e);
      const double vol = mesh.element_volume(e);
      for (int i = 0; i < nv; ++i) moments[i] = 0.0;
      for (const auto& qp : smooth_rule(dim)) {
        double x[3];
        bary_to_point(corners, qp.bary, x);
        const double val =
            target.value({x, static_cast<std::size_t>(dim)}) * qp.weight * vol;
        for (int i = 0; i < nv; ++i) moments[i] += val * qp.bary[i];
      }
    }
    for (int i = 0; i < nv; ++i) {
      const Index dof = dofs.dof_of_vertex(el[static_cast<std::size_t>(i)]);
      if (dof >= 0) f[static_cast<std::size_t>(dof)] += moments[i];
    }
  }
  return f;
}

double element_l2_error_sq(const SimplicialMesh& mesh, const DofMap& dofs,
                           Index e, std::span<const double> coeffs,
                           const TargetFunction& target,
                           const QuadratureSpec& quad) {
  if (coeffs.size() != static_cast<std::size_t>(dofs.num_dofs())) {
    throw std::invalid_argument("element_l2_error_sq: coefficient size mismatch");
  }
  const int dim = mesh.dim();
  const int nv = dim + 1;
  const auto el = mesh.element(e);
  double nodal[kMaxCorners] = {};
  for (int i = 0; i < nv; ++i) {
    const Index dof = dofs.dof_of_vertex(el[static_cast<std::size_t>(i)]);
    nodal[i] = dof >= 0 ? coeffs[static_cast<std::size_t>(dof)] : 0.0;
  }
  const double vol = mesh.element_volume(e);

  if (target.is_box()) {
    // eta^2 = int u^2 - 2 int u ubar + int ubar^2 with the exact local mass
    // matrix for the first term and indicator moments for the others.
    const double scale = vol / static_cast<double>(nv * (nv + 1));
    double uu = 0.0;
    for (int i = 0; i < nv; ++i) {
      for (int j = 0; j < nv; ++j) {
        uu += nodal[i] * nodal[j] * scale * (i == j ? 2.0 : 1.0);
      }
    }
    double moments[kMaxCorners];
    box_moments(mesh, e, target.box_lo(), target.box_hi(), quad, moments);
    double u_ubar = 0.0, box_vol = 0.0;
    for (int i = 0; i < nv; ++i) {
      u_ubar += nodal[i] * moments[i];
      box_vol += moments[i]; // indicator squared = indicator
    }
    return std::max(0.0, uu - 2.0 * u_ubar + box_vol);
  }

  const auto corners = element_corners(mesh, e);
  double sum = 0.0;
  for (const auto& qp : smooth_rule(dim)) {
    double x[3];
    bary_to_point(corners, qp.bary, x);
    double uh = 0.0;
    for (int i = 0; i < nv; ++i) uh += nodal[i] * qp.bary[i];
    const double diff = uh - target.value({x, static_cast<std::size_t>(dim)});
    sum += qp.weight * vol * diff * diff;
  }
  return sum;
}

double global_l2_error(const SimplicialMesh& mesh, const DofMap& dofs,
                       std::span<const double> coeffs,
                       const TargetFunction& target,
                       const QuadratureSpec& quad) {
  double sum = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    sum += element_l2_error_sq(mesh, dofs, e, coeffs, target, quad);
  }
  return std::sqrt(sum);
}

} // namespace varoc
