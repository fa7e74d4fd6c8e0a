#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <span>
#include <vector>

#include "bpfem/core.hpp"

namespace bpfem {

enum class CellKind { triangle, quadrilateral };

struct Facet {
  std::array<int, 2> vertices{};  // sorted by index
  std::array<int, 2> cells{-1, -1};
  bool interior{false};
};

/// Conforming 2D mesh. Triangles use the first three slots of a cell tuple;
/// cells are stored counterclockwise.
struct Mesh {
  CellKind kind{CellKind::triangle};
  std::vector<Point> vertices;
  std::vector<std::array<int, 4>> cells;
  std::vector<std::array<int, 4>> cell_facets;
  std::vector<Facet> facets;
  std::vector<double> cell_diameter;
  std::vector<double> facet_diameter;

  int vertices_per_cell() const { return kind == CellKind::triangle ? 3 : 4; }
  std::size_t num_cells() const { return cells.size(); }
  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_facets() const { return facets.size(); }

  std::span<const int> cell_vertices(std::size_t c) const {
    return {cells[c].data(), static_cast<std::size_t>(vertices_per_cell())};
  }

  double cell_area(std::size_t c) const {
    // shoelace
    const auto vs = cell_vertices(c);
    double a = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const Point p = vertices[vs[i]];
      const Point q = vertices[vs[(i + 1) % vs.size()]];
      a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
  }

  double max_cell_diameter() const { return *std::max_element(cell_diameter.begin(), cell_diameter.end()); }
};

enum class TriangulationVariant { delaunay, non_delaunay };

/// Builds the topology (facets, cell-to-facet map) and the diameters from a
/// raw vertex/cell list. Clockwise cells are reoriented.
inline Mesh make_mesh(CellKind kind, std::vector<Point> vertices, std::vector<std::array<int, 4>> cells) {
  Mesh mesh;
  mesh.kind = kind;
  mesh.vertices = std::move(vertices);
  mesh.cells = std::move(cells);
  const int nv = mesh.vertices_per_cell();

  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    for (int i = 0; i < nv; ++i) {
      const int v = mesh.cells[c][i];
      if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size())
        throw InvalidArgument("make_mesh: cell " + std::to_string(c) + " references an invalid vertex");
    }
    if (kind == CellKind::triangle) mesh.cells[c][3] = -1;
    if (mesh.cell_area(c) < 0.0) std::reverse(mesh.cells[c].begin(), mesh.cells[c].begin() + nv);
  }

  std::map<std::pair<int, int>, int> facet_index;
  mesh.cell_facets.assign(mesh.cells.size(), {-1, -1, -1, -1});
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    for (int e = 0; e < nv; ++e) {
      int a = mesh.cells[c][e];
      int b = mesh.cells[c][(e + 1) % nv];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = facet_index.try_emplace({a, b}, static_cast<int>(mesh.facets.size()));
      if (inserted) {
        Facet f;
        f.vertices = {a, b};
        f.cells[0] = static_cast<int>(c);
        mesh.facets.push_back(f);
      } else {
        Facet& f = mesh.facets[it->second];
        if (f.cells[1] != -1) throw InvalidArgument("make_mesh: non-manifold facet");
        f.cells[1] = static_cast<int>(c);
        f.interior = true;
      }
      mesh.cell_facets[c][e] = it->second;
    }
  }

  mesh.cell_diameter.resize(mesh.cells.size());
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    double h = 0.0;
    for (int i = 0; i < nv; ++i)
      for (int j = i + 1; j < nv; ++j)
        h = std::max(h, distance(mesh.vertices[mesh.cells[c][i]], mesh.vertices[mesh.cells[c][j]]));
    mesh.cell_diameter[c] = h;
  }
  mesh.facet_diameter.resize(mesh.facets.size());
  for (std::size_t f = 0; f < mesh.facets.size(); ++f)
    mesh.facet_diameter[f] = distance(mesh.vertices[mesh.facets[f].vertices[0]], mesh.vertices[mesh.facets[f].vertices[1]]);
  return mesh;
}

namespace detail {

inline std::vector<Point> lattice(int n) {
  std::vector<Point> v;
  v.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) v.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
  return v;
}

}  // namespace detail

/// Uniform triangulation of (0,1)^2 with n divisions per side.
///
/// The Delaunay variant cuts every lattice square along the same diagonal
/// (three-directional mesh). The non-Delaunay variant alternates the
/// diagonal in a checkerboard pattern and shifts every interior vertex by
/// (0.15/n, -0.1/n), which breaks the empty-circumcircle property next to
/// the boundary while keeping the mesh shape regular.
inline Mesh build_structured_triangular(int n, TriangulationVariant variant = TriangulationVariant::delaunay) {
  if (n < 2) throw InvalidArgument("build_structured_triangular: n must be >= 2");
  auto vertices = detail::lattice(n);
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 4>> cells;
  cells.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j), v11 = id(i + 1, j + 1), v01 = id(i, j + 1);
      const bool main_diagonal = variant == TriangulationVariant::delaunay || (i + j) % 2 == 0;
      if (main_diagonal) {
        cells.push_back({v00, v10, v11, -1});
        cells.push_back({v00, v11, v01, -1});
      } else {
        cells.push_back({v00, v10, v01, -1});
        cells.push_back({v10, v11, v01, -1});
      }
    }
  }
  if (variant == TriangulationVariant::non_delaunay) {
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        Point& p = vertices[id(i, j)];
        p.x += 0.15 / n;
        p.y -= 0.1 / n;
      }
  }
  return make_mesh(CellKind::triangle, std::move(vertices), std::move(cells));
}

/// n x n axis-aligned squares covering (0,1)^2.
inline Mesh build_structured_quadrilateral(int n) {
  if (n < 2) throw InvalidArgument("build_structured_quadrilateral: n must be >= 2");
  auto vertices = detail::lattice(n);
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 4>> cells;
  cells.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
  return make_mesh(CellKind::quadrilateral, std::move(vertices), std::move(cells));
}

/// Nodal values of the continuous piecewise-linear mesh-size function: the
/// mean diameter of the cells sharing each vertex.
struct MeshFunction {
  std::vector<double> value_at_vertex;

  double operator[](std::size_t v) const { return value_at_vertex[v]; }
  std::size_t size() const { return value_at_vertex.size(); }
};

inline MeshFunction compute_mesh_function(const Mesh& mesh) {
  std::vector<double> sum(mesh.num_vertices(), 0.0);
  std::vector<int> count(mesh.num_vertices(), 0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    for (int v : mesh.cell_vertices(c)) {
      sum[v] += mesh.cell_diameter[c];
      ++count[v];
    }
  MeshFunction h;
  h.value_at_vertex.resize(mesh.num_vertices());
  for (std::size_t v = 0; v < sum.size(); ++v) {
    if (count[v] == 0) throw InvalidArgument("compute_mesh_function: vertex not attached to any cell");
    h.value_at_vertex[v] = sum[v] / count[v];
  }
  return h;
}

}  // namespace bpfem
