#include "avgpress/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "avgpress/errors.hpp"

namespace avgpress {

void MeshParams::validate(int breakpoint_count) const {
  if (nx < 2 || ny < 2) throw ParameterError("mesh needs nx >= 2 and ny >= 2");
  const int segments = std::max(1, breakpoint_count - 1);
  if (nx % segments != 0) {
    throw ParameterError("nx = " + std::to_string(nx) + " is not a multiple of " +
                         std::to_string(segments) + " profile segments");
  }
}

MeshParams MeshParams::scaled(double density_factor) const {
  if (!(density_factor > 0.0)) throw ParameterError("mesh density factor must be positive");
  const double s = std::sqrt(density_factor);
  MeshParams out;
  out.nx = std::max(36, static_cast<int>(std::lround(nx * s / 36.0)) * 36);
  out.ny = std::max(2, static_cast<int>(std::lround(ny * s)));
  return out;
}

MeshParams refine(const MeshParams& p) { return {2 * p.nx, 2 * p.ny}; }

double TriangleMesh::signed_area(int t) const {
  const auto& [a, b, c] = triangles[t];
  const Point u = vertices[b] - vertices[a];
  const Point v = vertices[c] - vertices[a];
  return 0.5 * (u.x() * v.y() - u.y() * v.x());
}

double TriangleMesh::total_area() const {
  double s = 0.0;
  for (int t = 0; t < triangle_count(); ++t) s += signed_area(t);
  return s;
}

double TriangleMesh::min_angle_degrees() const {
  double best = 180.0;
  for (const auto& tri : triangles) {
    for (int k = 0; k < 3; ++k) {
      const Point& p = vertices[tri[k]];
      const Point u = vertices[tri[(k + 1) % 3]] - p;
      const Point v = vertices[tri[(k + 2) % 3]] - p;
      const double c = u.dot(v) / (u.norm() * v.norm());
      best = std::min(best, std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi);
    }
  }
  return best;
}

bool TriangleMesh::is_mirror_symmetric(double tol) const {
  if (mirror.size() != vertices.size()) return false;
  for (int v = 0; v < vertex_count(); ++v) {
    const int m = mirror[v];
    if (m < 0) return false;
    const Point& p = vertices[v];
    const Point& q = vertices[m];
    if (std::abs(p.x() - q.x()) > tol || std::abs(p.y() + q.y()) > tol) return false;
  }
  return true;
}

namespace {

double max_edge_length(const TriangleMesh& mesh) {
  double h = 0.0;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      h = std::max(h, (mesh.vertices[tri[k]] - mesh.vertices[tri[(k + 1) % 3]]).norm());
    }
  }
  return h;
}

}  // namespace

TriangleMesh build_mesh(const CylinderDomain& domain, const MeshParams& params) {
  params.validate(domain.profile.breakpoint_count());
  const int nx = params.nx;
  const int ny = params.ny;
  const int rows = 2 * ny + 1;
  const auto node = [rows](int i, int j) { return i * rows + j; };

  TriangleMesh mesh;
  mesh.params = params;
  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * rows);
  mesh.mirror.reserve(mesh.vertices.capacity());
  for (int i = 0; i <= nx; ++i) {
    const double x1 = static_cast<double>(i) / nx;
    const double a = domain.profile.radius_at(x1);
    for (int j = 0; j < rows; ++j) {
      // Symmetric rows get exactly negated coordinates.
      const int jj = j - ny;
      const double xi2 = static_cast<double>(std::abs(jj)) / ny;
      mesh.vertices.emplace_back(x1, jj < 0 ? -(xi2 * a) : xi2 * a);
      mesh.mirror.push_back(node(i, rows - 1 - j));
    }
  }
  mesh.triangles.reserve(4 * static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j + 1 < rows; ++j) {
      const int p00 = node(i, j), p10 = node(i + 1, j);
      const int p01 = node(i, j + 1), p11 = node(i + 1, j + 1);
      if (j >= ny) {
        mesh.triangles.push_back({p00, p10, p11});
        mesh.triangles.push_back({p00, p11, p01});
      } else {
        mesh.triangles.push_back({p00, p10, p01});
        mesh.triangles.push_back({p10, p11, p01});
      }
    }
  }
  for (int j = 0; j < rows; ++j) mesh.dirichlet_nodes.push_back(node(0, j));
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (!(mesh.signed_area(t) > 0.0)) {
      throw NumericError("build_mesh produced a degenerate triangle");
    }
  }
  mesh.h = max_edge_length(mesh);
  return mesh;
}

TriangleMesh map_nodes(const TriangleMesh& mesh,
                       const std::function<Point(const Point&)>& map) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = map(v);
  for (int t = 0; t < out.triangle_count(); ++t) {
    const double a = out.signed_area(t);
    if (!(a > 1e-3 * mesh.signed_area(t))) {
      throw ParameterError("mapped mesh has a degenerate or flipped triangle; use a smaller t");
    }
  }
  out.h = max_edge_length(out);
  return out;
}

void write_mesh_csv(const TriangleMesh& mesh, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream v(dir / "vertices.csv");
  v.precision(17);
  v << "index,x1,x2,dirichlet\n";
  std::vector<char> is_d(mesh.vertices.size(), 0);
  for (int d : mesh.dirichlet_nodes) is_d[d] = 1;
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    v << i << ',' << mesh.vertices[i].x() << ',' << mesh.vertices[i].y() << ','
      << int(is_d[i]) << '\n';
  }
  std::ofstream t(dir / "triangles.csv");
  t << "index,v0,v1,v2\n";
  for (int i = 0; i < mesh.triangle_count(); ++i) {
    const auto& tri = mesh.triangles[i];
    t << i << ',' << tri[0] << ',' << tri[1] << ',' << tri[2] << '\n';
  }
  if (!v || !t) throw Error("failed writing mesh CSV to " + dir.string());
}

}  // namespace avgpress
