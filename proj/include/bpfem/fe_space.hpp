#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bpfem/mesh.hpp"
#include "bpfem/quadrature.hpp"

namespace bpfem {

enum class ElementKind { P1, P2, Q1 };

inline constexpr int kMaxLocalDofs = 6;

inline int element_degree(ElementKind kind) { return kind == ElementKind::P2 ? 2 : 1; }
inline CellKind element_cell_kind(ElementKind kind) {
  return kind == ElementKind::Q1 ? CellKind::quadrilateral : CellKind::triangle;
}
inline int local_dof_count(ElementKind kind) {
  switch (kind) {
    case ElementKind::P1: return 3;
    case ElementKind::P2: return 6;
    case ElementKind::Q1: return 4;
  }
  return 0;
}

using LocalValues = std::array<double, kMaxLocalDofs>;
using LocalGradients = std::array<Point, kMaxLocalDofs>;

/// Lagrange shape functions on the reference cell.
/// P2 ordering: vertices 0,1,2 then midpoints of edges (0,1), (1,2), (2,0).
/// Q1 ordering: (0,0), (1,0), (1,1), (0,1).
inline LocalValues reference_values(ElementKind kind, Point xi) {
  LocalValues v{};
  const double x = xi.x, y = xi.y;
  switch (kind) {
    case ElementKind::P1:
      v[0] = 1.0 - x - y;
      v[1] = x;
      v[2] = y;
      break;
    case ElementKind::P2: {
      const double l0 = 1.0 - x - y, l1 = x, l2 = y;
      v[0] = l0 * (2.0 * l0 - 1.0);
      v[1] = l1 * (2.0 * l1 - 1.0);
      v[2] = l2 * (2.0 * l2 - 1.0);
      v[3] = 4.0 * l0 * l1;
      v[4] = 4.0 * l1 * l2;
      v[5] = 4.0 * l2 * l0;
      break;
    }
    case ElementKind::Q1:
      v[0] = (1.0 - x) * (1.0 - y);
      v[1] = x * (1.0 - y);
      v[2] = x * y;
      v[3] = (1.0 - x) * y;
      break;
  }
  return v;
}

inline LocalGradients reference_gradients(ElementKind kind, Point xi) {
  LocalGradients g{};
  const double x = xi.x, y = xi.y;
  switch (kind) {
    case ElementKind::P1:
      g[0] = {-1.0, -1.0};
      g[1] = {1.0, 0.0};
      g[2] = {0.0, 1.0};
      break;
    case ElementKind::P2: {
      const double l0 = 1.0 - x - y, l1 = x, l2 = y;
      const Point d0{-1.0, -1.0}, d1{1.0, 0.0}, d2{0.0, 1.0};
      g[0] = (4.0 * l0 - 1.0) * d0;
      g[1] = (4.0 * l1 - 1.0) * d1;
      g[2] = (4.0 * l2 - 1.0) * d2;
      g[3] = 4.0 * (l1 * d0 + l0 * d1);
      g[4] = 4.0 * (l2 * d1 + l1 * d2);
      g[5] = 4.0 * (l0 * d2 + l2 * d0);
      break;
    }
    case ElementKind::Q1:
      g[0] = {-(1.0 - y), -(1.0 - x)};
      g[1] = {1.0 - y, -x};
      g[2] = {y, x};
      g[3] = {-y, 1.0 - x};
      break;
  }
  return g;
}

/// Affine reference-to-physical map x = origin + B xi.
struct CellMap {
  Point origin;
  std::array<double, 4> jac{};      // row-major B
  std::array<double, 4> inv_jac{};  // row-major B^{-1}
  double det{0.0};

  Point to_physical(Point xi) const {
    return {origin.x + jac[0] * xi.x + jac[1] * xi.y, origin.y + jac[2] * xi.x + jac[3] * xi.y};
  }
  Point to_reference(Point x) const {
    const Point d = x - origin;
    return {inv_jac[0] * d.x + inv_jac[1] * d.y, inv_jac[2] * d.x + inv_jac[3] * d.y};
  }
  /// B^{-T} g
  Point physical_gradient(Point g) const {
    return {inv_jac[0] * g.x + inv_jac[2] * g.y, inv_jac[1] * g.x + inv_jac[3] * g.y};
  }
};

inline CellMap cell_map(const Mesh& mesh, std::size_t c) {
  const auto& cell = mesh.cells[c];
  const Point p0 = mesh.vertices[cell[0]];
  const Point e1 = mesh.vertices[cell[1]] - p0;
  const Point e2 = mesh.vertices[cell[mesh.kind == CellKind::triangle ? 2 : 3]] - p0;
  if (mesh.kind == CellKind::quadrilateral) {
    const Point opposite = mesh.vertices[cell[2]] - p0;
    if (distance(opposite, e1 + e2) > 1e-12 * (norm(e1) + norm(e2)))
      throw InvalidArgument("cell_map: quadrilateral " + std::to_string(c) + " is not a parallelogram");
  }
  CellMap m;
  m.origin = p0;
  m.jac = {e1.x, e2.x, e1.y, e2.y};
  m.det = e1.x * e2.y - e2.x * e1.y;
  if (!(std::abs(m.det) > 0.0)) throw InvalidArgument("cell_map: degenerate cell " + std::to_string(c));
  m.inv_jac = {e2.y / m.det, -e2.x / m.det, -e1.y / m.det, e1.x / m.det};
  return m;
}

/// Continuous Lagrange space on a mesh. Degrees of freedom: the mesh
/// vertices, followed (P2 only) by one midpoint per mesh facet.
struct FeSpace {
  std::shared_ptr<const Mesh> mesh;
  ElementKind kind{ElementKind::P1};
  std::vector<Point> dof_coords;
  std::vector<std::array<int, kMaxLocalDofs>> cell_dofs;
  /// true iff the dof is not on the boundary of the unit square
  std::vector<char> interior_mask;
  /// compact index among interior dofs, -1 on the boundary
  std::vector<int> interior_index;
  std::vector<int> interior_dofs;
  /// the two vertices a dof sits between (equal for vertex dofs)
  std::vector<std::array<int, 2>> dof_parents;

  std::size_t num_dofs() const { return dof_coords.size(); }
  std::size_t num_interior() const { return interior_dofs.size(); }
  int degree() const { return element_degree(kind); }
  int dofs_per_cell() const { return local_dof_count(kind); }
  std::span<const int> dofs_of(std::size_t c) const {
    return {cell_dofs[c].data(), static_cast<std::size_t>(dofs_per_cell())};
  }
};

using SpacePtr = std::shared_ptr<const FeSpace>;

inline constexpr double kBoundaryTolerance = 1e-12;

inline bool on_unit_square_boundary(Point p) {
  return std::abs(p.x) <= kBoundaryTolerance || std::abs(p.x - 1.0) <= kBoundaryTolerance ||
         std::abs(p.y) <= kBoundaryTolerance || std::abs(p.y - 1.0) <= kBoundaryTolerance;
}

inline SpacePtr build_space(std::shared_ptr<const Mesh> mesh, ElementKind kind) {
  if (!mesh) throw InvalidArgument("build_space: null mesh");
  if (element_cell_kind(kind) != mesh->kind)
    throw InvalidArgument("build_space: element kind is incompatible with the mesh cells");
  auto space = std::make_shared<FeSpace>();
  space->mesh = mesh;
  space->kind = kind;
  space->dof_coords = mesh->vertices;
  for (std::size_t v = 0; v < mesh->num_vertices(); ++v)
    space->dof_parents.push_back({static_cast<int>(v), static_cast<int>(v)});
  const int nv = mesh->vertices_per_cell();
  space->cell_dofs.assign(mesh->num_cells(), {});
  for (std::size_t c = 0; c < mesh->num_cells(); ++c) {
    auto& dofs = space->cell_dofs[c];
    dofs.fill(-1);
    for (int i = 0; i < nv; ++i) dofs[i] = mesh->cells[c][i];
  }
  if (kind == ElementKind::P2) {
    const int offset = static_cast<int>(mesh->num_vertices());
    for (const Facet& f : mesh->facets) {
      space->dof_coords.push_back(0.5 * (mesh->vertices[f.vertices[0]] + mesh->vertices[f.vertices[1]]));
      space->dof_parents.push_back(f.vertices);
    }
    for (std::size_t c = 0; c < mesh->num_cells(); ++c)
      for (int e = 0; e < 3; ++e) space->cell_dofs[c][3 + e] = offset + mesh->cell_facets[c][e];
  }
  space->interior_mask.resize(space->num_dofs());
  space->interior_index.assign(space->num_dofs(), -1);
  for (std::size_t i = 0; i < space->num_dofs(); ++i) {
    const bool interior = !on_unit_square_boundary(space->dof_coords[i]);
    space->interior_mask[i] = interior;
    if (interior) {
      space->interior_index[i] = static_cast<int>(space->interior_dofs.size());
      space->interior_dofs.push_back(static_cast<int>(i));
    }
  }
  return space;
}

inline SpacePtr build_space(const Mesh& mesh, ElementKind kind) {
  return build_space(std::make_shared<const Mesh>(mesh), kind);
}

/// Coefficient vector over all dofs of a space.
struct FeFunction {
  SpacePtr space;
  Vector coefficients;

  FeFunction() = default;
  explicit FeFunction(SpacePtr s) : space(std::move(s)), coefficients(Vector::Zero(space->num_dofs())) {}
  FeFunction(SpacePtr s, Vector c) : space(std::move(s)), coefficients(std::move(c)) {
    if (static_cast<std::size_t>(coefficients.size()) != space->num_dofs())
      throw InvalidArgument("FeFunction: coefficient count does not match the space");
  }

  std::size_t size() const { return static_cast<std::size_t>(coefficients.size()); }
  double operator[](std::size_t i) const { return coefficients[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return coefficients[static_cast<Eigen::Index>(i)]; }

  /// Values restricted to the interior dofs, in compact order.
  Vector interior_values() const {
    Vector v(space->num_interior());
    for (std::size_t k = 0; k < space->num_interior(); ++k) v[k] = coefficients[space->interior_dofs[k]];
    return v;
  }
  void set_interior_values(const Vector& v) {
    coefficients.setZero();
    for (std::size_t k = 0; k < space->num_interior(); ++k) coefficients[space->interior_dofs[k]] = v[k];
  }
  void zero_boundary() {
    for (std::size_t i = 0; i < size(); ++i)
      if (!space->interior_mask[i]) coefficients[i] = 0.0;
  }
};

inline void require_same_space(const FeFunction& a, const FeFunction& b, const char* where) {
  if (a.space != b.space) throw InvalidArgument(std::string(where) + ": functions live on different spaces");
}

/// Nodal interpolant: coefficient i is g(x_i, t), boundary dofs included.
inline FeFunction interpolate(SpacePtr space, const ScalarField& g, double t = 0.0) {
  FeFunction u(space);
  for (std::size_t i = 0; i < space->num_dofs(); ++i) u[i] = g(space->dof_coords[i], t);
  return u;
}

/// Bucket grid over cell bounding boxes for point location.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh) : mesh_(&mesh) {
    lo_ = hi_ = mesh.vertices.front();
    for (const Point& p : mesh.vertices) {
      lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
      hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
    }
    res_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_cells()))));
    buckets_.assign(static_cast<std::size_t>(res_) * res_, {});
    maps_.reserve(mesh.num_cells());
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      maps_.push_back(cell_map(mesh, c));
      Point a = mesh.vertices[mesh.cells[c][0]], b = a;
      for (int v : mesh.cell_vertices(c)) {
        a = {std::min(a.x, mesh.vertices[v].x), std::min(a.y, mesh.vertices[v].y)};
        b = {std::max(b.x, mesh.vertices[v].x), std::max(b.y, mesh.vertices[v].y)};
      }
      const auto [i0, j0] = bucket(a);
      const auto [i1, j1] = bucket(b);
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * res_ + i].push_back(static_cast<int>(c));
    }
  }

  struct Hit {
    int cell;
    Point xi;
  };

  /// First cell (lowest index) containing p, with reference coordinates.
  std::optional<Hit> find(Point p) const {
    constexpr double tol = 1e-12;
    if (p.x < lo_.x - tol || p.x > hi_.x + tol || p.y < lo_.y - tol || p.y > hi_.y + tol) return std::nullopt;
    const auto [i, j] = bucket(p);
    for (int c : buckets_[static_cast<std::size_t>(j) * res_ + i]) {
      const Point xi = maps_[c].to_reference(p);
      const bool inside = mesh_->kind == CellKind::triangle
                              ? (xi.x >= -tol && xi.y >= -tol && xi.x + xi.y <= 1.0 + tol)
                              : (xi.x >= -tol && xi.y >= -tol && xi.x <= 1.0 + tol && xi.y <= 1.0 + tol);
      if (inside) return Hit{c, xi};
    }
    return std::nullopt;
  }

 private:
  std::pair<int, int> bucket(Point p) const {
    auto index = [this](double v, double lo, double hi) {
      const int k = static_cast<int>((v - lo) / (hi - lo) * res_);
      return std::clamp(k, 0, res_ - 1);
    };
    return {index(p.x, lo_.x, hi_.x), index(p.y, lo_.y, hi_.y)};
  }

  const Mesh* mesh_;
  Point lo_, hi_;
  int res_{1};
  std::vector<std::vector<int>> buckets_;
  std::vector<CellMap> maps_;
};

/// Value of u at a point given its cell and reference coordinates.
inline double evaluate_in_cell(const FeFunction& u, std::size_t cell, Point xi) {
  const auto phi = reference_values(u.space->kind, xi);
  const auto dofs = u.space->dofs_of(cell);
  double value = 0.0;
  for (std::size_t a = 0; a < dofs.size(); ++a) value += u[dofs[a]] * phi[a];
  return value;
}

/// Point values of u; throws OutOfDomain for points outside the closed mesh.
inline std::vector<double> evaluate(const FeFunction& u, std::span<const Point> points) {
  const PointLocator locator(*u.space->mesh);
  std::vector<double> values;
  values.reserve(points.size());
  for (const Point& p : points) {
    const auto hit = locator.find(p);
    if (!hit)
      throw OutOfDomain("evaluate: point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") is outside the domain");
    values.push_back(evaluate_in_cell(u, hit->cell, hit->xi));
  }
  return values;
}

inline double evaluate(const FeFunction& u, Point p) { return evaluate(u, std::span<const Point>(&p, 1)).front(); }

}  // namespace bpfem
