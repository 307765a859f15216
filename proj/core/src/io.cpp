#include "varoc/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace varoc {

namespace {

const char* vtk_cell_type(int dim) {
  switch (dim) {
    case 1:
      return "3"; // VTK_LINE
    case 2:
      return "5"; // VTK_TRIANGLE
    default:
      return "10"; // VTK_TETRA
  }
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

void write_vtk(std::ostream& out, const SimplicialMesh& mesh,
               const std::map<std::string, std::span<const double>>& cell_data,
               const std::map<std::string, std::span<const double>>& point_data) {
  const int dim = mesh.dim();
  out << "# vtk DataFile Version 3.0\n";
  out << "varoc mesh\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const auto x = mesh.vertex(v);
    double coords[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) coords[k] = x[static_cast<std::size_t>(k)];
    out << g17(coords[0]) << ' ' << g17(coords[1]) << ' ' << g17(coords[2]) << "\n";
  }
  const int nv = dim + 1;
  out << "CELLS " << mesh.num_elements() << ' '
      << static_cast<std::int64_t>(mesh.num_elements()) * (nv + 1) << "\n";
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    out << nv;
    for (Index v : mesh.element(e)) out << ' ' << v;
    out << "\n";
  }
  out << "CELL_TYPES " << mesh.num_elements() << "\n";
  for (Index e = 0; e < mesh.num_elements(); ++e) out << vtk_cell_type(dim) << "\n";
  if (!cell_data.empty()) {
    out << "CELL_DATA " << mesh.num_elements() << "\n";
    for (const auto& [name, values] : cell_data) {
      if (values.size() != static_cast<std::size_t>(mesh.num_elements())) {
        throw std::invalid_argument("write_vtk: cell data size mismatch: " + name);
      }
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << g17(v) << "\n";
    }
  }
  if (!point_data.empty()) {
    out << "POINT_DATA " << mesh.num_vertices() << "\n";
    for (const auto& [name, values] : point_data) {
      if (values.size() != static_cast<std::size_t>(mesh.num_vertices())) {
        throw std::invalid_argument("write_vtk: point data size mismatch: " + name);
      }
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << g17(v) << "\n";
    }
  }
}

void write_vtk_file(const std::string& path, const SimplicialMesh& mesh,
                    const std::map<std::string, std::span<const double>>& cell_data,
                    const std::map<std::string, std::span<const double>>& point_data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_vtk(out, mesh, cell_data, point_data);
}

void write_mesh_dump(std::ostream& out, const SimplicialMesh& mesh) {
  out << "dim " << mesh.dim() << "\n";
  out << "vertices " << mesh.num_vertices() << "\n";
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    out << "v";
    for (double x : mesh.vertex(v)) out << ' ' << g17(x);
    out << ' ' << (mesh.is_boundary_vertex(v) ? 1 : 0) << "\n";
  }
  out << "elements " << mesh.num_elements() << "\n";
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    out << "e";
    for (Index v : mesh.element(e)) out << ' ' << v;
    out << " tag " << mesh.bisection_tag(e) << "\n";
  }
}

void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.dim() << ' ' << a.dim() << ' ' << a.num_nonzeros() << "\n";
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (Index row = 0; row < a.dim(); ++row) {
    for (std::int64_t k = offsets[static_cast<std::size_t>(row)];
         k < offsets[static_cast<std::size_t>(row) + 1]; ++k) {
      out << row + 1 << ' ' << cols[static_cast<std::size_t>(k)] + 1 << ' '
          << g17(vals[static_cast<std::size_t>(k)]) << "\n";
    }
  }
}

void write_matrix_market_file(const std::string& path, const CsrMatrix& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_matrix_market(out, a);
}

CsrMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("matrix market: empty stream");
  }
  if (line.rfind("%%MatrixMarket", 0) != 0 ||
      line.find("coordinate") == std::string::npos ||
      line.find("real") == std::string::npos) {
    throw std::runtime_error("matrix market: unsupported header: " + line);
  }
  const bool symmetric = line.find("symmetric") != std::string::npos;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  std::int64_t rows = 0, cols = 0, nnz = 0;
  dims >> rows >> cols >> nnz;
  if (rows != cols || rows <= 0) {
    throw std::runtime_error("matrix market: expected a square matrix");
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
  for (std::int64_t k = 0; k < nnz; ++k) {
    std::int64_t i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) {
      throw std::runtime_error("matrix market: truncated entry list");
    }
    t.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), v});
    if (symmetric && i != j) {
      t.push_back({static_cast<Index>(j - 1), static_cast<Index>(i - 1), v});
    }
  }
  return CsrMatrix::from_triplets(static_cast<Index>(rows), std::move(t));
}

CsrMatrix read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_matrix_market(in);
}

void write_vector(std::ostream& out, std::uint64_t mesh_revision,
                  std::span<const double> values) {
  out << "revision " << mesh_revision << "\n";
  out << "size " << values.size() << "\n";
  for (double v : values) out << g17(v) << "\n";
}

std::pair<std::uint64_t, std::vector<double>> read_vector(std::istream& in) {
  std::string keyword;
  std::uint64_t revision = 0;
  std::size_t size = 0;
  in >> keyword >> revision;
  if (keyword != "revision") throw std::runtime_error("vector: bad header");
  in >> keyword >> size;
  if (keyword != "size") throw std::runtime_error("vector: bad header");
  std::vector<double> values(size);
  for (double& v : values) {
    if (!(in >> v)) throw std::runtime_error("vector: truncated data");
  }
  return {revision, values};
}

} // namespace varoc
