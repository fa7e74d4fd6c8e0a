#pragma once

#include <vector>

#include "bpfem/fe_space.hpp"
#include "bpfem/linalg.hpp"

namespace bpfem {

/// Quadrature orders per form, exact for the assembled integrands when the
/// coefficients are at most affine.
struct QuadratureOrders {
  int mass, stiffness, convection, facet, load;

  static QuadratureOrders for_degree(int k) {
    return {2 * k, std::max(2 * k - 2, 2), std::max(2 * k, 2), 2 * k, 2 * k + 2};
  }
};

namespace detail {

/// Reference shape data tabulated at the points of a rule.
struct Tabulation {
  QuadratureRule rule;
  std::vector<LocalValues> values;
  std::vector<LocalGradients> gradients;

  Tabulation(ElementKind kind, int order) : rule(quadrature(element_cell_kind(kind), order)) {
    for (const Point& xi : rule.points) {
      values.push_back(reference_values(kind, xi));
      gradients.push_back(reference_gradients(kind, xi));
    }
  }
};

template <class CellKernel>
SparseMatrix assemble_cell_matrix(const FeSpace& space, int order, CellKernel&& kernel) {
  const Tabulation tab(space.kind, order);
  const int nloc = space.dofs_per_cell();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(space.mesh->num_cells() * nloc * nloc);
  Eigen::Matrix<double, kMaxLocalDofs, kMaxLocalDofs> local;
  for (std::size_t c = 0; c < space.mesh->num_cells(); ++c) {
    const CellMap map = cell_map(*space.mesh, c);
    local.setZero();
    for (std::size_t q = 0; q < tab.rule.size(); ++q) {
      const double w = tab.rule.weights[q] * std::abs(map.det);
      const Point x = map.to_physical(tab.rule.points[q]);
      LocalGradients grad{};
      for (int a = 0; a < nloc; ++a) grad[a] = map.physical_gradient(tab.gradients[q][a]);
      for (int i = 0; i < nloc; ++i)
        for (int j = 0; j < nloc; ++j) local(i, j) += w * kernel(x, tab.values[q], grad, i, j);
    }
    const auto dofs = space.dofs_of(c);
    for (int i = 0; i < nloc; ++i)
      for (int j = 0; j < nloc; ++j) triplets.emplace_back(dofs[i], dofs[j], local(i, j));
  }
  return from_triplets(space.num_dofs(), space.num_dofs(), triplets);
}

}  // namespace detail

/// M_ij = (phi_j, phi_i)
inline SparseMatrix assemble_mass(const FeSpace& space) {
  return detail::assemble_cell_matrix(
      space, QuadratureOrders::for_degree(space.degree()).mass,
      [](Point, const LocalValues& phi, const LocalGradients&, int i, int j) { return phi[i] * phi[j]; });
}

/// K_ij = (grad phi_j, grad phi_i)
inline SparseMatrix assemble_stiffness(const FeSpace& space) {
  return detail::assemble_cell_matrix(
      space, QuadratureOrders::for_degree(space.degree()).stiffness,
      [](Point, const LocalValues&, const LocalGradients& g, int i, int j) { return dot(g[i], g[j]); });
}

/// C_ij = (beta . grad phi_j, phi_i)
inline SparseMatrix assemble_convection(const FeSpace& space, const VectorField& beta, double t) {
  return detail::assemble_cell_matrix(
      space, QuadratureOrders::for_degree(space.degree()).convection,
      [&](Point x, const LocalValues& phi, const LocalGradients& g, int i, int j) {
        return dot(beta(x, t), g[j]) * phi[i];
      });
}

struct GalerkinMatrices {
  SparseMatrix mass;
  SparseMatrix stiffness;
  SparseMatrix convection;
};

/// Matrices of a(w,v) = eps (grad w, grad v) + (beta . grad w, v) + mu (w, v):
/// a(w,v) = eps v^T K w + v^T C w + mu v^T M w.
inline GalerkinMatrices assemble_galerkin(const FeSpace& space, const VectorField& beta, double t) {
  return {assemble_mass(space), assemble_stiffness(space), assemble_convection(space, beta, t)};
}

/// b_i = (f(., t), phi_i)
inline Vector assemble_load(const FeSpace& space, const ScalarField& f, double t) {
  const detail::Tabulation tab(space.kind, QuadratureOrders::for_degree(space.degree()).load);
  Vector b = Vector::Zero(space.num_dofs());
  for (std::size_t c = 0; c < space.mesh->num_cells(); ++c) {
    const CellMap map = cell_map(*space.mesh, c);
    const auto dofs = space.dofs_of(c);
    for (std::size_t q = 0; q < tab.rule.size(); ++q) {
      const double fw = f(map.to_physical(tab.rule.points[q]), t) * tab.rule.weights[q] * std::abs(map.det);
      for (std::size_t a = 0; a < dofs.size(); ++a) b[dofs[a]] += fw * tab.values[q][a];
    }
  }
  return b;
}

/// Continuous interior penalty matrix
///   J_ij = gamma sum_F |beta|_{inf,F} h_F^2 int_F [grad phi_j] . [grad phi_i] ds
/// over interior facets, with |beta|_{inf,F} the largest Euclidean magnitude
/// of beta at the facet end points and quadrature points.
inline SparseMatrix assemble_cip(const FeSpace& space, double gamma, const VectorField& beta, double t) {
  const Mesh& mesh = *space.mesh;
  const LineRule line = line_quadrature(QuadratureOrders::for_degree(space.degree()).facet);
  std::vector<Eigen::Triplet<double>> triplets;
  if (gamma == 0.0) return from_triplets(space.num_dofs(), space.num_dofs(), triplets);

  constexpr int kMaxPatch = 2 * kMaxLocalDofs;
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    const Facet& facet = mesh.facets[f];
    if (!facet.interior) continue;
    const Point a = mesh.vertices[facet.vertices[0]];
    const Point b = mesh.vertices[facet.vertices[1]];
    const double length = mesh.facet_diameter[f];

    std::array<int, kMaxPatch> patch{};
    int npatch = 0;
    std::array<std::array<int, kMaxLocalDofs>, 2> slot{};
    for (int side = 0; side < 2; ++side) {
      const auto dofs = space.dofs_of(facet.cells[side]);
      for (std::size_t i = 0; i < dofs.size(); ++i) {
        int s = 0;
        while (s < npatch && patch[s] != dofs[i]) ++s;
        if (s == npatch) patch[npatch++] = dofs[i];
        slot[side][i] = s;
      }
    }

    double beta_max = std::max(norm(beta(a, t)), norm(beta(b, t)));
    for (double s : line.points) beta_max = std::max(beta_max, norm(beta(a + s * (b - a), t)));
    const double scale = gamma * beta_max * length * length;
    if (scale == 0.0) continue;

    const std::array<CellMap, 2> maps{cell_map(mesh, facet.cells[0]), cell_map(mesh, facet.cells[1])};
    Eigen::Matrix<double, kMaxPatch, kMaxPatch> local = Eigen::Matrix<double, kMaxPatch, kMaxPatch>::Zero();
    for (std::size_t q = 0; q < line.size(); ++q) {
      const Point x = a + line.points[q] * (b - a);
      std::array<Point, kMaxPatch> jump{};
      for (int side = 0; side < 2; ++side) {
        const auto g = reference_gradients(space.kind, maps[side].to_reference(x));
        const double sign = side == 0 ? 1.0 : -1.0;
        for (int i = 0; i < space.dofs_per_cell(); ++i)
          jump[slot[side][i]] = jump[slot[side][i]] + sign * maps[side].physical_gradient(g[i]);
      }
      const double w = line.weights[q] * length * scale;
      for (int i = 0; i < npatch; ++i)
        for (int j = 0; j < npatch; ++j) local(i, j) += w * dot(jump[i], jump[j]);
    }
    for (int i = 0; i < npatch; ++i)
      for (int j = 0; j < npatch; ++j) triplets.emplace_back(patch[i], patch[j], local(i, j));
  }
  return from_triplets(space.num_dofs(), space.num_dofs(), triplets);
}

/// Mesh function at every dof; linear interpolation at P2 edge midpoints.
inline Vector mesh_function_at_dofs(const FeSpace& space, const MeshFunction& hfun) {
  Vector h(space.num_dofs());
  for (std::size_t i = 0; i < space.num_dofs(); ++i) {
    const auto [p, q] = space.dof_parents[i];
    h[i] = 0.5 * (hfun[p] + hfun[q]);
  }
  return h;
}

/// Weights h(x_i)^2 of the lumped inner product.
inline Vector lumped_weights(const FeSpace& space, const MeshFunction& hfun) {
  return mesh_function_at_dofs(space, hfun).array().square();
}

/// (u, v)_h = sum_i h(x_i)^2 u(x_i) v(x_i) over all dofs.
inline double lumped_inner(const FeFunction& u, const FeFunction& v, const MeshFunction& hfun) {
  require_same_space(u, v, "lumped_inner");
  const Vector w = lumped_weights(*u.space, hfun);
  return (w.array() * u.coefficients.array() * v.coefficients.array()).sum();
}

/// Diagonal weights d_i of the nodal stabilisation s(v, w) = sum_i d_i v_i w_i:
///   d_i = alpha (eps + |beta(t_n)|_{inf,omega_i} h_i + (1/dt + mu) h_i^2),
/// omega_i being the union of cells sharing dof i.
inline Vector assemble_stab_diag(const FeSpace& space, const MeshFunction& hfun, double alpha, double eps, double mu,
                                 const VectorField& beta, double t_n, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("assemble_stab_diag: dt must be positive");
  const Mesh& mesh = *space.mesh;
  const QuadratureRule rule = quadrature(mesh.kind, 2);
  std::vector<double> cell_beta(mesh.num_cells(), 0.0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const CellMap map = cell_map(mesh, c);
    double m = 0.0;
    for (int d : space.dofs_of(c)) m = std::max(m, norm(beta(space.dof_coords[d], t_n)));
    for (const Point& xi : rule.points) m = std::max(m, norm(beta(map.to_physical(xi), t_n)));
    cell_beta[c] = m;
  }
  Vector patch_beta = Vector::Zero(space.num_dofs());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    for (int d : space.dofs_of(c)) patch_beta[d] = std::max(patch_beta[d], cell_beta[c]);

  const Vector h = mesh_function_at_dofs(space, hfun);
  Vector d(space.num_dofs());
  for (std::size_t i = 0; i < space.num_dofs(); ++i)
    d[i] = alpha * (eps + patch_beta[i] * h[i] + (1.0 / dt + mu) * h[i] * h[i]);
  return d;
}

/// Every form needed at one time level.
struct AssembledForms {
  double time{0.0};
  double epsilon{0.0};
  double mu{0.0};
  double gamma{0.0};
  SparseMatrix mass;
  SparseMatrix stiffness;
  SparseMatrix convection;
  SparseMatrix cip;
  Vector stab_diag;
  Vector lumped_diag;

  /// Matrix of a_J(w, v) = a(w, v) + J(w, v).
  SparseMatrix a_j() const {
    SparseMatrix a = epsilon * stiffness + convection + mu * mass + cip;
    a.makeCompressed();
    return a;
  }
};

struct FormParameters {
  double epsilon{0.0};
  double mu{0.0};
  VectorField beta;
  double gamma{0.0};
  double alpha{1.0};
};

inline AssembledForms assemble_forms(const FeSpace& space, const MeshFunction& hfun, const FormParameters& p,
                                     double t, double dt) {
  AssembledForms forms;
  forms.time = t;
  forms.epsilon = p.epsilon;
  forms.mu = p.mu;
  forms.gamma = p.gamma;
  forms.mass = assemble_mass(space);
  forms.stiffness = assemble_stiffness(space);
  forms.convection = assemble_convection(space, p.beta, t);
  forms.cip = assemble_cip(space, p.gamma, p.beta, t);
  forms.stab_diag = assemble_stab_diag(space, hfun, p.alpha, p.epsilon, p.mu, p.beta, t, dt);
  forms.lumped_diag = lumped_weights(space, hfun);
  return forms;
}

inline void check_theta(double theta) {
  if (!(theta >= 0.5 && theta <= 1.0)) throw InvalidArgument("theta must lie in [1/2, 1]");
}

/// Right-hand side functional of one theta step, tested against every dof:
///   F(v) = dt (f, v) - dt (1 - theta) [eps (grad u+, grad v) + (beta . grad u+, v) + J(u+, v)]
///          - (mu dt (1 - theta) - 1) (u+, v)
/// where prev holds the forms at t_{n-1}, load = (f(t_{n-1+theta}), phi_i)
/// and u+ is the constrained part of the previous solution.
inline Vector rhs_Fn(const AssembledForms& prev, const Vector& load, double theta, double dt, const Vector& u_prev_plus) {
  check_theta(theta);
  if (!(dt > 0.0)) throw InvalidArgument("rhs_Fn: dt must be positive");
  const double explicit_part = dt * (1.0 - theta);
  Vector f = dt * load;
  if (explicit_part != 0.0) {
    f -= explicit_part * (prev.epsilon * (prev.stiffness * u_prev_plus) + prev.convection * u_prev_plus +
                          prev.cip * u_prev_plus);
  }
  f -= (prev.mu * explicit_part - 1.0) * (prev.mass * u_prev_plus);
  return f;
}

inline Vector rhs_Fn(const AssembledForms& prev, const ScalarField& f, double theta, double dt, double t_mid,
                     const FeFunction& u_prev_plus) {
  return rhs_Fn(prev, assemble_load(*u_prev_plus.space, f, t_mid), theta, dt, u_prev_plus.coefficients);
}

}  // namespace bpfem
