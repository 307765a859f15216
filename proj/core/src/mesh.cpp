#include "varoc/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace varoc {

namespace {

std::atomic<std::uint64_t> g_revision_counter{1};

struct VertexKey {
  std::uint64_t bits[3];
  bool operator==(const VertexKey& o) const {
    return bits[0] == o.bits[0] && bits[1] == o.bits[1] && bits[2] == o.bits[2];
  }
};

struct VertexKeyHash {
  std::size_t operator()(const VertexKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t b : k.bits) {
      h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

VertexKey key_of(const std::array<double, 3>& x) {
  VertexKey k;
  for (int i = 0; i < 3; ++i) k.bits[i] = std::bit_cast<std::uint64_t>(x[i]);
  return k;
}

bool on_unit_boundary(const std::array<double, 3>& x, int dim) {
  for (int i = 0; i < dim; ++i) {
    if (x[i] == 0.0 || x[i] == 1.0) return true;
  }
  return false;
}

double signed_volume(const std::array<std::array<double, 3>, 4>& v, int dim) {
  switch (dim) {
    case 1:
      return v[1][0] - v[0][0];
    case 2: {
      const double ax = v[1][0] - v[0][0], ay = v[1][1] - v[0][1];
      const double bx = v[2][0] - v[0][0], by = v[2][1] - v[0][1];
      return 0.5 * (ax * by - ay * bx);
    }
    case 3: {
      double a[3], b[3], c[3];
      for (int i = 0; i < 3; ++i) {
        a[i] = v[1][i] - v[0][i];
        b[i] = v[2][i] - v[0][i];
        c[i] = v[3][i] - v[0][i];
      }
      const double det = a[0] * (b[1] * c[2] - b[2] * c[1]) -
                         a[1] * (b[0] * c[2] - b[2] * c[0]) +
                         a[2] * (b[0] * c[1] - b[1] * c[0]);
      return det / 6.0;
    }
    default:
      return 0.0;
  }
}

void check_marks(const SimplicialMesh& mesh, std::span<const Index> marked) {
  for (Index e : marked) {
    if (e < 0 || e >= mesh.num_elements()) {
      throw std::out_of_range("refine: marked element index out of range");
    }
  }
}

} // namespace

void SimplicialMesh::stamp_revision() {
  revision_ = g_revision_counter.fetch_add(1, std::memory_order_relaxed);
}

std::pair<Index, Index> SimplicialMesh::refinement_edge(Index e) const {
  const auto& el = elements_[static_cast<std::size_t>(e)];
  const int d = tags_[static_cast<std::size_t>(e)];
  return {el[0], el[static_cast<std::size_t>(d)]};
}

double SimplicialMesh::element_volume(Index e) const {
  std::array<std::array<double, 3>, 4> v{};
  const auto& el = elements_[static_cast<std::size_t>(e)];
  for (int i = 0; i <= dim_; ++i) {
    v[static_cast<std::size_t>(i)] =
        vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])];
  }
  return std::abs(signed_volume(v, dim_));
}

double SimplicialMesh::element_mesh_size(Index e) const {
  const double vol = element_volume(e);
  switch (dim_) {
    case 1:
      return vol;
    case 2:
      return std::sqrt(vol);
    default:
      return std::cbrt(vol);
  }
}

double SimplicialMesh::min_mesh_size() const {
  double h = std::numeric_limits<double>::max();
  for (Index e = 0; e < num_elements(); ++e) h = std::min(h, element_mesh_size(e));
  return h;
}

double SimplicialMesh::max_mesh_size() const {
  double h = 0.0;
  for (Index e = 0; e < num_elements(); ++e) h = std::max(h, element_mesh_size(e));
  return h;
}

double SimplicialMesh::total_volume() const {
  double sum = 0.0;
  for (Index e = 0; e < num_elements(); ++e) sum += element_volume(e);
  return sum;
}

bool SimplicialMesh::is_conforming() const {
  const int nv = dim_ + 1;
  struct FacetInfo {
    std::array<Index, 3> verts;
    int count;
  };
  std::unordered_map<std::uint64_t, FacetInfo> facets;
  facets.reserve(elements_.size() * static_cast<std::size_t>(nv));
  auto facet_hash = [](const std::array<Index, 3>& f) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Index v : f) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 0x100000001b3ULL;
    }
    return h;
  };
  for (const auto& el : elements_) {
    for (int skip = 0; skip < nv; ++skip) {
      std::array<Index, 3> f{-1, -1, -1};
      int idx = 0;
      for (int i = 0; i < nv; ++i) {
        if (i != skip) {
          f[static_cast<std::size_t>(idx++)] = el[static_cast<std::size_t>(i)];
        }
      }
      std::sort(f.begin(), f.begin() + dim_);
      const std::uint64_t h = facet_hash(f);
      auto [it, inserted] = facets.try_emplace(h, FacetInfo{f, 0});
      if (!inserted && !(it->second.verts == f)) return false; // collision
      if (++it->second.count > 2) return false;
    }
  }
  for (const auto& [h, info] : facets) {
    if (info.count != 1) continue;
    // A facet seen once must lie in a boundary plane x_k in {0,1}.
    bool on_boundary = false;
    for (int k = 0; k < dim_ && !on_boundary; ++k) {
      for (double plane : {0.0, 1.0}) {
        bool all = true;
        for (int i = 0; i < dim_; ++i) {
          const auto& x =
              vertices_[static_cast<std::size_t>(info.verts[static_cast<std::size_t>(i)])];
          if (x[static_cast<std::size_t>(k)] != plane) {
            all = false;
            break;
          }
        }
        if (all) {
          on_boundary = true;
          break;
        }
      }
    }
    if (!on_boundary) return false;
  }
  // No vertex may sit at the midpoint of an existing edge.
  std::unordered_map<VertexKey, Index, VertexKeyHash> vmap;
  vmap.reserve(vertices_.size());
  for (Index v = 0; v < num_vertices(); ++v) {
    vmap.emplace(key_of(vertices_[static_cast<std::size_t>(v)]), v);
  }
  for (const auto& el : elements_) {
    for (int i = 0; i < nv; ++i) {
      for (int j = i + 1; j < nv; ++j) {
        const auto& a = vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])];
        const auto& b = vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>(j)])];
        const std::array<double, 3> mid{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]),
                                        0.5 * (a[2] + b[2])};
        if (vmap.count(key_of(mid)) != 0) return false;
      }
    }
  }
  return true;
}

double SimplicialMesh::min_shape_quality() const {
  if (dim_ == 1) return 1.0;
  double quality = std::numeric_limits<double>::max();
  for (Index e = 0; e < num_elements(); ++e) {
    const auto el = element(e);
    if (dim_ == 2) {
      for (int i = 0; i < 3; ++i) {
        const auto& p = vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])];
        const auto& q =
            vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>((i + 1) % 3)])];
        const auto& r =
            vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>((i + 2) % 3)])];
        const double ux = q[0] - p[0], uy = q[1] - p[1];
        const double vx = r[0] - p[0], vy = r[1] - p[1];
        const double nu = std::hypot(ux, uy), nv = std::hypot(vx, vy);
        const double c = std::clamp((ux * vx + uy * vy) / (nu * nv), -1.0, 1.0);
        quality = std::min(quality, std::acos(c));
      }
    } else {
      const double vol = element_volume(e);
      double area_sum = 0.0;
      double longest = 0.0;
      for (int skip = 0; skip < 4; ++skip) {
        std::array<const std::array<double, 3>*, 3> f{};
        int idx = 0;
        for (int i = 0; i < 4; ++i) {
          if (i != skip) {
            f[static_cast<std::size_t>(idx++)] =
                &vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])];
          }
        }
        double a[3], b[3];
        for (int i = 0; i < 3; ++i) {
          a[i] = (*f[1])[static_cast<std::size_t>(i)] - (*f[0])[static_cast<std::size_t>(i)];
          b[i] = (*f[2])[static_cast<std::size_t>(i)] - (*f[0])[static_cast<std::size_t>(i)];
        }
        const double cx = a[1] * b[2] - a[2] * b[1];
        const double cy = a[2] * b[0] - a[0] * b[2];
        const double cz = a[0] * b[1] - a[1] * b[0];
        area_sum += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
      }
      for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
          const auto& p = vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])];
          const auto& q = vertices_[static_cast<std::size_t>(el[static_cast<std::size_t>(j)])];
          const double d = std::sqrt((p[0] - q[0]) * (p[0] - q[0]) +
                                     (p[1] - q[1]) * (p[1] - q[1]) +
                                     (p[2] - q[2]) * (p[2] - q[2]));
          longest = std::max(longest, d);
        }
      }
      quality = std::min(quality, 3.0 * vol / area_sum / longest);
    }
  }
  return quality;
}

SimplicialMesh build_interval_mesh(Index num_elements) {
  if (num_elements < 1) {
    throw std::invalid_argument("build_interval_mesh: need at least one element");
  }
  SimplicialMesh m;
  m.dim_ = 1;
  m.vertices_.resize(static_cast<std::size_t>(num_elements) + 1);
  m.boundary_flag_.assign(static_cast<std::size_t>(num_elements) + 1, 0);
  for (Index i = 0; i <= num_elements; ++i) {
    m.vertices_[static_cast<std::size_t>(i)] = {
        static_cast<double>(i) / static_cast<double>(num_elements), 0.0, 0.0};
  }
  m.boundary_flag_.front() = 1;
  m.boundary_flag_.back() = 1;
  m.num_interior_ = num_elements - 1;
  for (Index e = 0; e < num_elements; ++e) {
    m.elements_.push_back({e, e + 1, 0, 0});
    m.tags_.push_back(1);
  }
  m.description_ = "uniform partition of (0,1)";
  m.stamp_revision();
  return m;
}

SimplicialMesh build_unit_square_mesh() {
  SimplicialMesh m;
  m.dim_ = 2;
  const Index g = 4; // 4x4 cells
  auto vid = [g](Index i, Index j) { return j * (g + 1) + i; };
  for (Index j = 0; j <= g; ++j) {
    for (Index i = 0; i <= g; ++i) {
      m.vertices_.push_back(
          {static_cast<double>(i) / g, static_cast<double>(j) / g, 0.0});
    }
  }
  m.boundary_flag_.resize(m.vertices_.size());
  m.num_interior_ = 0;
  for (Index v = 0; v < m.num_vertices(); ++v) {
    const bool b = on_unit_boundary(m.vertices_[static_cast<std::size_t>(v)], 2);
    m.boundary_flag_[static_cast<std::size_t>(v)] = b ? 1 : 0;
    if (!b) ++m.num_interior_;
  }
  // Two triangles per cell, both with the cell diagonal a-c as refinement
  // edge (local vertex 0 to local vertex 2).
  for (Index j = 0; j < g; ++j) {
    for (Index i = 0; i < g; ++i) {
      const Index a = vid(i, j), b = vid(i + 1, j);
      const Index c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m.elements_.push_back({a, b, c, 0});
      m.tags_.push_back(2);
      m.elements_.push_back({a, d, c, 0});
      m.tags_.push_back(2);
    }
  }
  m.description_ = "4x4 grid, lower-left to upper-right diagonals";
  m.stamp_revision();
  return m;
}

SimplicialMesh build_unit_cube_mesh(Index m_cells) {
  if (m_cells < 1) {
    throw std::invalid_argument("build_unit_cube_mesh: need at least one cell per edge");
  }
  SimplicialMesh m;
  m.dim_ = 3;
  const Index g = m_cells;
  auto vid = [g](Index i, Index j, Index k) {
    return (k * (g + 1) + j) * (g + 1) + i;
  };
  for (Index k = 0; k <= g; ++k) {
    for (Index j = 0; j <= g; ++j) {
      for (Index i = 0; i <= g; ++i) {
        m.vertices_.push_back({static_cast<double>(i) / g,
                               static_cast<double>(j) / g,
                               static_cast<double>(k) / g});
      }
    }
  }
  m.boundary_flag_.resize(m.vertices_.size());
  m.num_interior_ = 0;
  for (Index v = 0; v < m.num_vertices(); ++v) {
    const bool b = on_unit_boundary(m.vertices_[static_cast<std::size_t>(v)], 3);
    m.boundary_flag_[static_cast<std::size_t>(v)] = b ? 1 : 0;
    if (!b) ++m.num_interior_;
  }
  // Six tetrahedra per cube, one per axis permutation, all sharing the main
  // diagonal as refinement edge (local vertex 0 to local vertex 3).
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (Index k = 0; k < g; ++k) {
    for (Index j = 0; j < g; ++j) {
      for (Index i = 0; i < g; ++i) {
        for (const auto& p : perms) {
          Index idx[3] = {i, j, k};
          std::array<Index, 4> tet{};
          tet[0] = vid(idx[0], idx[1], idx[2]);
          for (int step = 0; step < 3; ++step) {
            ++idx[p[step]];
            tet[static_cast<std::size_t>(step + 1)] = vid(idx[0], idx[1], idx[2]);
          }
          m.elements_.push_back(tet);
          m.tags_.push_back(3);
        }
      }
    }
  }
  m.description_ = "Kuhn subdivision, 6 tetrahedra per cube";
  m.stamp_revision();
  return m;
}

namespace detail {

// Bisection with iterative conforming closure.  Elements carry the number of
// forced bisections still owed (children inherit one less); afterwards any
// element with a mesh vertex at one of its edge midpoints is bisected until
// no hanging vertex remains.
SimplicialMesh refine_generations(const SimplicialMesh& mesh,
                                  std::span<const Index> marked,
                                  int generations) {
  check_marks(mesh, marked);
  const int dim = mesh.dim_;

  std::vector<std::array<double, 3>> verts = mesh.vertices_;
  std::vector<std::uint8_t> vert_boundary = mesh.boundary_flag_;
  std::vector<std::array<Index, 4>> elems = mesh.elements_;
  std::vector<std::int8_t> tags = mesh.tags_;
  std::vector<std::int32_t> pending(elems.size(), 0);
  std::vector<std::uint8_t> alive(elems.size(), 1);

  std::unordered_map<VertexKey, Index, VertexKeyHash> vmap;
  vmap.reserve(verts.size() * 2);
  for (Index v = 0; v < static_cast<Index>(verts.size()); ++v) {
    vmap.emplace(key_of(verts[static_cast<std::size_t>(v)]), v);
  }

  auto midpoint_vertex = [&](Index a, Index b) {
    const auto& xa = verts[static_cast<std::size_t>(a)];
    const auto& xb = verts[static_cast<std::size_t>(b)];
    const std::array<double, 3> mid{0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1]),
                                    0.5 * (xa[2] + xb[2])};
    const auto key = key_of(mid);
    auto it = vmap.find(key);
    if (it != vmap.end()) return it->second;
    const Index id = static_cast<Index>(verts.size());
    verts.push_back(mid);
    vert_boundary.push_back(on_unit_boundary(mid, dim) ? 1 : 0);
    vmap.emplace(key, id);
    return id;
  };

  auto bisect = [&](std::size_t e) {
    const auto el = elems[e];
    const int d = tags[e];
    const Index z = midpoint_vertex(el[0], el[static_cast<std::size_t>(d)]);
    const std::int8_t child_tag = static_cast<std::int8_t>(d == 1 ? dim : d - 1);
    const std::int32_t child_pending = pending[e] > 0 ? pending[e] - 1 : 0;

    std::array<Index, 4> c1 = el;
    c1[static_cast<std::size_t>(d)] = z;
    std::array<Index, 4> c2{0, 0, 0, 0};
    for (int i = 0; i < d; ++i) {
      c2[static_cast<std::size_t>(i)] = el[static_cast<std::size_t>(i + 1)];
    }
    c2[static_cast<std::size_t>(d)] = z;
    for (int i = d + 1; i <= dim; ++i) {
      c2[static_cast<std::size_t>(i)] = el[static_cast<std::size_t>(i)];
    }

    alive[e] = 0;
    pending[e] = 0;
    for (const auto& c : {c1, c2}) {
      elems.push_back(c);
      tags.push_back(child_tag);
      pending.push_back(child_pending);
      alive.push_back(1);
    }
  };

  auto has_hanging_vertex = [&](std::size_t e) {
    const auto& el = elems[e];
    for (int i = 0; i <= dim; ++i) {
      for (int j = i + 1; j <= dim; ++j) {
        const auto& xa = verts[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])];
        const auto& xb = verts[static_cast<std::size_t>(el[static_cast<std::size_t>(j)])];
        const std::array<double, 3> mid{0.5 * (xa[0] + xb[0]),
                                        0.5 * (xa[1] + xb[1]),
                                        0.5 * (xa[2] + xb[2])};
        if (vmap.count(key_of(mid)) != 0) return true;
      }
    }
    return false;
  };

  for (Index e : marked) pending[static_cast<std::size_t>(e)] = generations;
  // Forced bisections: children inherit the remaining count, so one growing
  // pass settles them all.
  for (std::size_t e = 0; e < elems.size(); ++e) {
    if (alive[e] && pending[e] > 0) bisect(e);
  }
  int guard = 0;
  for (;;) {
    if (++guard > 256) {
      throw std::logic_error("refine: conforming closure did not terminate");
    }
    std::vector<std::size_t> hanging;
    for (std::size_t e = 0; e < elems.size(); ++e) {
      if (alive[e] && has_hanging_vertex(e)) hanging.push_back(e);
    }
    if (hanging.empty()) break;
    for (std::size_t e : hanging) bisect(e);
  }

  SimplicialMesh out;
  out.dim_ = dim;
  out.vertices_ = std::move(verts);
  out.boundary_flag_ = std::move(vert_boundary);
  out.num_interior_ = 0;
  for (std::uint8_t b : out.boundary_flag_) {
    if (!b) ++out.num_interior_;
  }
  out.elements_.reserve(elems.size());
  out.tags_.reserve(elems.size());
  for (std::size_t e = 0; e < elems.size(); ++e) {
    if (!alive[e]) continue;
    out.elements_.push_back(elems[e]);
    out.tags_.push_back(tags[e]);
  }
  out.description_ = mesh.description_;
  out.stamp_revision();
  return out;
}

} // namespace detail

SimplicialMesh refine(const SimplicialMesh& mesh, std::span<const Index> marked) {
  return detail::refine_generations(mesh, marked, 1);
}

SimplicialMesh refine_halving(const SimplicialMesh& mesh,
                              std::span<const Index> marked) {
  return detail::refine_generations(mesh, marked, mesh.dim());
}

SimplicialMesh uniform_refine(const SimplicialMesh& mesh) {
  std::vector<Index> all(static_cast<std::size_t>(mesh.num_elements()));
  std::iota(all.begin(), all.end(), Index{0});
  return refine_halving(mesh, all);
}

ElementGeometry element_geometry(const SimplicialMesh& mesh, Index e) {
  if (e < 0 || e >= mesh.num_elements()) {
    throw std::out_of_range("element_geometry: element index out of range");
  }
  ElementGeometry g;
  g.element = e;
  const auto el = mesh.element(e);
  for (int i = 0; i <= mesh.dim(); ++i) {
    const auto x = mesh.vertex(el[static_cast<std::size_t>(i)]);
    std::copy(x.begin(), x.end(), g.vertices[static_cast<std::size_t>(i)].begin());
  }
  g.volume = mesh.element_volume(e);
  g.mesh_size = mesh.element_mesh_size(e);
  return g;
}

} // namespace varoc
