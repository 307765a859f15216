#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "varoc/csr.hpp"
#include "varoc/mesh.hpp"

namespace varoc {

/// Legacy ASCII VTK unstructured grid: points, cells, optional per-cell and
/// per-point scalar fields.
void write_vtk(std::ostream& out, const SimplicialMesh& mesh,
               const std::map<std::string, std::span<const double>>&
                   cell_data = {},
               const std::map<std::string, std::span<const double>>&
                   point_data = {});
void write_vtk_file(const std::string& path, const SimplicialMesh& mesh,
                    const std::map<std::string, std::span<const double>>&
                        cell_data = {},
                    const std::map<std::string, std::span<const double>>&
                        point_data = {});

/// Plain-text mesh dump, one vertex / one element per line (golden-file
/// friendly, deterministic formatting).
void write_mesh_dump(std::ostream& out, const SimplicialMesh& mesh);

/// MatrixMarket coordinate format, real general.
void write_matrix_market(std::ostream& out, const CsrMatrix& a);
void write_matrix_market_file(const std::string& path, const CsrMatrix& a);
CsrMatrix read_matrix_market(std::istream& in);
CsrMatrix read_matrix_market_file(const std::string& path);

/// Flat text vector keyed by the mesh revision it was computed on.
void write_vector(std::ostream& out, std::uint64_t mesh_revision,
                  std::span<const double> values);
std::pair<std::uint64_t, std::vector<double>> read_vector(std::istream& in);

} // namespace varoc
