#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <vector>

#include "avgpress/geometry.hpp"

namespace avgpress {

// Subdivisions of the reference rectangle [0,1] x [-1,1]: nx along x1 and ny
// across each half-width, so the grid is nx x 2ny quads.
struct MeshParams {
  int nx = 180;
  int ny = 20;

  // Throws ParameterError unless nx, ny >= 2 and (k - 1) divides nx.
  void validate(int breakpoint_count) const;
  // Node density multiplied by `density_factor` (each direction by its square
  // root), keeping nx a multiple of 36 so 5- and 19-point profiles both fit.
  MeshParams scaled(double density_factor) const;
  bool operator==(const MeshParams&) const = default;
};

// Uniform refinement: doubles nx and ny.
MeshParams refine(const MeshParams& p);

struct TriangleMesh {
  std::vector<Point> vertices;
  // Counterclockwise vertex triples.
  std::vector<std::array<int, 3>> triangles;
  // Nodes on Gamma_D (x1 = 0 in the reference configuration).
  std::vector<int> dirichlet_nodes;
  // mirror[v] is the node reflected through x2 = 0, or -1 when the mesh has no
  // mirror structure. Structured meshes are mirror-symmetric by construction.
  std::vector<int> mirror;
  double h = 0.0;  // maximum edge length
  MeshParams params;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  double signed_area(int t) const;
  double total_area() const;
  double min_angle_degrees() const;
  // True when every node's mirror sits at the reflected position (to tol).
  bool is_mirror_symmetric(double tol = 1e-12) const;
};

// Structured transfinite mesh: reference node (xi1, xi2) maps to
// (xi1, xi2 * a(xi1)); each quad is split into two triangles with diagonals
// mirrored across the axis.
TriangleMesh build_mesh(const CylinderDomain& domain, const MeshParams& params);

// Same connectivity with every node moved by `map`. Dirichlet markers and the
// mirror table travel with the nodes. Throws ParameterError if any triangle
// degenerates or flips.
TriangleMesh map_nodes(const TriangleMesh& mesh,
                       const std::function<Point(const Point&)>& map);

// Writes vertices.csv and triangles.csv into `dir`.
void write_mesh_csv(const TriangleMesh& mesh, const std::filesystem::path& dir);

}  // namespace avgpress
