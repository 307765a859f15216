#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace varoc {

using Index = std::int32_t;

class SimplicialMesh;

namespace detail {
SimplicialMesh refine_generations(const SimplicialMesh& mesh,
                                  std::span<const Index> marked,
                                  int generations);
} // namespace detail

/// Conforming simplicial triangulation of the unit domain (0,1)^n, n = 1,2,3.
///
/// All vertices live on dyadic lattices (coordinates i/2^k), so edge
/// midpoints are exact in double precision and vertex deduplication can key
/// on raw coordinate bits.  Element vertex lists keep the ordering required
/// by the bisection rule: the refinement edge of element e is the edge
/// between local vertex 0 and local vertex tag(e).  Meshes are immutable
/// after construction; refinement returns a new mesh.
class SimplicialMesh {
public:
  int dim() const { return dim_; }
  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_elements() const { return static_cast<Index>(elements_.size()); }
  Index num_interior_vertices() const { return num_interior_; }

  std::span<const double> vertex(Index v) const {
    return {vertices_[static_cast<std::size_t>(v)].data(),
            static_cast<std::size_t>(dim_)};
  }
  std::span<const Index> element(Index e) const {
    return {elements_[static_cast<std::size_t>(e)].data(),
            static_cast<std::size_t>(dim_ + 1)};
  }
  bool is_boundary_vertex(Index v) const {
    return boundary_flag_[static_cast<std::size_t>(v)] != 0;
  }

  /// Local index of the second refinement-edge vertex (the first is local
  /// vertex 0); in 1..dim.
  int bisection_tag(Index e) const { return tags_[static_cast<std::size_t>(e)]; }

  /// Designated bisection edge of element e, as a vertex-id pair.
  std::pair<Index, Index> refinement_edge(Index e) const;

  double element_volume(Index e) const;
  double element_mesh_size(Index e) const; // h = volume^{1/n}
  double min_mesh_size() const;
  double max_mesh_size() const;
  double total_volume() const;

  /// Monotone id stamped at construction; systems assembled from a mesh
  /// carry it so stale pairings can be detected.
  std::uint64_t revision() const { return revision_; }

  /// Construction note (initial grid layout, diagonal convention).
  const std::string& description() const { return description_; }

  /// Conformity test: every facet is shared by at most two elements,
  /// once-seen facets lie on the domain boundary, and no vertex sits at an
  /// edge midpoint (hash-of-faces check).
  bool is_conforming() const;

  /// Minimum interior angle over all elements (radians, n=2) or minimum
  /// inradius/longest-edge ratio (n=3).  For n=1 returns 1.
  double min_shape_quality() const;

private:
  friend SimplicialMesh build_interval_mesh(Index);
  friend SimplicialMesh build_unit_square_mesh();
  friend SimplicialMesh build_unit_cube_mesh(Index);
  friend SimplicialMesh detail::refine_generations(const SimplicialMesh&,
                                                   std::span<const Index>, int);

  SimplicialMesh() = default;
  void stamp_revision();

  int dim_ = 0;
  Index num_interior_ = 0;
  std::uint64_t revision_ = 0;
  std::vector<std::array<double, 3>> vertices_;
  std::vector<std::array<Index, 4>> elements_;
  std::vector<std::int8_t> tags_; // bisection tag, 1..dim
  std::vector<std::uint8_t> boundary_flag_;
  std::string description_;
};

/// Uniform partition of (0,1) into num_elements segments.
SimplicialMesh build_interval_mesh(Index num_elements);

/// 4x4 grid of squares, each split along the lower-left/upper-right
/// diagonal: 32 triangles, 25 vertices, 9 interior vertices.
SimplicialMesh build_unit_square_mesh();

/// m x m x m grid of cubes, each split into 6 tetrahedra sharing the main
/// diagonal (Kuhn split).
SimplicialMesh build_unit_cube_mesh(Index m);

/// Bisect every marked element once (newest-vertex rule for n >= 2) and
/// restore conformity by closure bisections.  Deterministic.
SimplicialMesh refine(const SimplicialMesh& mesh, std::span<const Index> marked);

/// Bisect every marked element n times, halving its mesh size, plus closure.
SimplicialMesh refine_halving(const SimplicialMesh& mesh,
                              std::span<const Index> marked);

/// Halve the mesh size of every element: element count grows by 2^n on the
/// structured meshes above.
SimplicialMesh uniform_refine(const SimplicialMesh& mesh);

struct ElementGeometry {
  Index element = 0;
  double volume = 0.0;
  double mesh_size = 0.0; // volume^{1/n}
  std::array<std::array<double, 3>, 4> vertices{}; // dim+1 entries used
};

ElementGeometry element_geometry(const SimplicialMesh& mesh, Index e);

} // namespace varoc
