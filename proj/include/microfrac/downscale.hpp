#ifndef MICROFRAC_DOWNSCALE_HPP
#define MICROFRAC_DOWNSCALE_HPP

#include <Eigen/Dense>
#include <array>
#include <span>

#include "microfrac/cell.hpp"
#include "microfrac/errors.hpp"
#include "microfrac/lookup.hpp"
#include "microfrac/macro.hpp"
#include "microfrac/mesh.hpp"

namespace microfrac {

/// Micro displacement field reconstructed on the unit cell at one macro
/// point, via the first-order down-scaling relation
///   u_k(x, xi) = U_k(x) + eps * N_kpq(xi) * dU_p/dx_q.
struct MicroField {
  Quad4Mesh cell_mesh;
  Eigen::VectorXd u; // interleaved (u1, u2) nodal values, mm

  Point2 x;                 // macro point
  double epsilon = 0.0;     // cell size, mm
  double damage = 0.0;      // phase field at x
  Eigen::Vector2d U;        // macro displacement at x
  Eigen::Matrix2d grad_U;   // macro displacement gradient H at x

  // Dimensionless components u_i / U_i, valid only where U_i != 0.
  Eigen::VectorXd u_tilde;
  std::array<bool, 2> u_tilde_valid = {false, false};
};

/// Assemble the reconstruction from already-sampled macro quantities. The
/// correctors are re-solved at exactly the queried damage level.
inline MicroField reconstruct_from_local(const Quad4Mesh& cell_mesh, const MicroMaterials& mats,
                                         const Eigen::Vector2d& U, const Eigen::Matrix2d& H,
                                         const Point2& x, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("reconstruct: cell size epsilon must be positive");
  const CorrectorSet correctors = solve_correctors(cell_mesh, mats);

  MicroField field;
  field.cell_mesh = cell_mesh;
  field.x = x;
  field.epsilon = epsilon;
  field.damage = mats.damage;
  field.U = U;
  field.grad_U = H;

  // Tensor-to-case contraction: N_kpq H_pq = N_11 H11 + N_22 H22 + N_12 (H12+H21),
  // using the minor symmetry of the corrector in (p,q); the stored shear case
  // is driven by unit engineering shear.
  const double w11 = H(0, 0), w22 = H(1, 1), w12 = H(0, 1) + H(1, 0);
  const int n = cell_mesh.n_nodes();
  field.u.resize(2 * n);
  for (int a = 0; a < 2 * n; ++a) {
    const double fluct = w11 * correctors.fields[0][a] + w22 * correctors.fields[1][a] +
                         w12 * correctors.fields[2][a];
    field.u[a] = U[a % 2] + epsilon * fluct;
  }

  field.u_tilde = Eigen::VectorXd::Zero(2 * n);
  for (int k = 0; k < 2; ++k) {
    field.u_tilde_valid[k] = (U[k] != 0.0);
    if (!field.u_tilde_valid[k]) continue;
    for (int a = 0; a < n; ++a) field.u_tilde[2 * a + k] = field.u[2 * a + k] / U[k];
  }
  return field;
}

/// Full down-scaling query: sample U, grad U and the phase field from the
/// converged macro state at point x, then reconstruct on the unit cell.
inline MicroField reconstruct(const MacroState& state, const Quad4Mesh& macro_mesh,
                              const PhaseParams& phases, const InclusionSpec& inc, int cell_n,
                              const Point2& x, double epsilon) {
  const PointLocation loc = locate_point(macro_mesh, x);
  const BMatrices b = b_matrices(macro_mesh, loc.element, loc.xi, loc.eta);
  const auto& conn = macro_mesh.elements[loc.element];

  Eigen::Vector2d U = Eigen::Vector2d::Zero();
  Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
  double d = 0.0;
  for (int a = 0; a < 4; ++a) {
    const Eigen::Vector2d ua(state.u[2 * conn[a]], state.u[2 * conn[a] + 1]);
    U += b.N(0, a) * ua;
    H.col(0) += b.B_d(0, a) * ua; // dU/dx1
    H.col(1) += b.B_d(1, a) * ua; // dU/dx2
    d += b.N(0, a) * state.d[conn[a]];
  }
  d = std::clamp(d, 0.0, 1.0);

  const Quad4Mesh cell_mesh = build_unit_cell_mesh(cell_n, inc);
  return reconstruct_from_local(cell_mesh, phases.at_damage(d), U, H, x, epsilon);
}

} // namespace microfrac

#endif
