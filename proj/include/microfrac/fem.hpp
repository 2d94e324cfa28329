#ifndef MICROFRAC_FEM_HPP
#define MICROFRAC_FEM_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "microfrac/errors.hpp"
#include "microfrac/mesh.hpp"

namespace microfrac {

/// Bilinear shape functions on [-1,1]^2, corner order CCW:
/// (-1,-1), (1,-1), (1,1), (-1,1).
struct ShapeEval {
  std::array<double, 4> N;
  std::array<std::array<double, 2>, 4> dN; // d/dxi, d/deta
};

inline ShapeEval q4_shape(double xi, double eta) {
  ShapeEval s;
  const double xm = 1.0 - xi, xp = 1.0 + xi, em = 1.0 - eta, ep = 1.0 + eta;
  s.N = {0.25 * xm * em, 0.25 * xp * em, 0.25 * xp * ep, 0.25 * xm * ep};
  s.dN = {{{-0.25 * em, -0.25 * xm},
           {0.25 * em, -0.25 * xp},
           {0.25 * ep, 0.25 * xp},
           {-0.25 * ep, 0.25 * xm}}};
  return s;
}

/// 2x2 Gauss rule on the reference square, unit weights.
inline const std::array<std::pair<double, double>, 4>& q4_gauss_points() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::array<std::pair<double, double>, 4> pts = {
      {{-g, -g}, {g, -g}, {g, g}, {-g, g}}};
  return pts;
}

/// Strain/gradient operators at one quadrature point of one element.
/// B_u maps interleaved nodal displacements (u1,u2 per node) to Voigt strain
/// (H11, H22, g12); B_d maps nodal scalars to their spatial gradient.
struct BMatrices {
  Eigen::Matrix<double, 3, 8> B_u;
  Eigen::Matrix<double, 2, 4> B_d;  // also the per-node shape gradients dN/dx
  Eigen::Matrix<double, 1, 4> N;
  double dvol = 0.0; // detJ * weight
};

inline BMatrices b_matrices(const Quad4Mesh& mesh, int elem, double xi, double eta,
                            double weight = 1.0) {
  const auto c = mesh.element_coords(elem);
  const ShapeEval s = q4_shape(xi, eta);
  Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
  for (int a = 0; a < 4; ++a) {
    J(0, 0) += s.dN[a][0] * c[a].x1;
    J(0, 1) += s.dN[a][0] * c[a].x2;
    J(1, 0) += s.dN[a][1] * c[a].x1;
    J(1, 1) += s.dN[a][1] * c[a].x2;
  }
  const double det = J.determinant();
  if (!(det > 0.0))
    throw NumericError("b_matrices: non-positive Jacobian in element " + std::to_string(elem));
  const Eigen::Matrix2d Jinv = J.inverse();

  BMatrices b;
  b.dvol = det * weight;
  b.B_u.setZero();
  for (int a = 0; a < 4; ++a) {
    const double dx = Jinv(0, 0) * s.dN[a][0] + Jinv(0, 1) * s.dN[a][1];
    const double dy = Jinv(1, 0) * s.dN[a][0] + Jinv(1, 1) * s.dN[a][1];
    b.B_u(0, 2 * a) = dx;
    b.B_u(1, 2 * a + 1) = dy;
    b.B_u(2, 2 * a) = dy;
    b.B_u(2, 2 * a + 1) = dx;
    b.B_d(0, a) = dx;
    b.B_d(1, a) = dy;
    b.N(0, a) = s.N[a];
  }
  return b;
}

/// Global DOF bookkeeping with constraint elimination. Each full DOF is
/// free (owns a reduced index), Dirichlet (carries a prescribed value), or
/// slave (mirrors a master DOF). Finalize before use.
class DofMap {
public:
  explicit DofMap(int n_dofs)
      : kind_(n_dofs, Kind::free), value_(n_dofs, 0.0), master_(n_dofs, -1),
        reduced_(n_dofs, -1) {}

  void set_dirichlet(int dof, double value) {
    if (kind_[dof] == Kind::slave)
      throw ConfigError("DofMap: DOF " + std::to_string(dof) + " is both Dirichlet and slave");
    kind_[dof] = Kind::dirichlet;
    value_[dof] = value;
  }

  void set_slave(int dof, int master) {
    if (kind_[dof] == Kind::dirichlet)
      throw ConfigError("DofMap: DOF " + std::to_string(dof) + " is both Dirichlet and slave");
    kind_[dof] = Kind::slave;
    master_[dof] = master;
  }

  void finalize() {
    // Resolve slave chains so every slave points at a terminal DOF.
    for (int d = 0; d < n_full(); ++d) {
      if (kind_[d] != Kind::slave) continue;
      int m = master_[d];
      int guard = 0;
      while (kind_[m] == Kind::slave) {
        m = master_[m];
        if (++guard > n_full()) throw ConfigError("DofMap: cyclic slave chain");
      }
      master_[d] = m;
      if (kind_[m] == Kind::dirichlet) { // slaving to a fixed DOF fixes the slave
        kind_[d] = Kind::dirichlet;
        value_[d] = value_[m];
      }
    }
    n_reduced_ = 0;
    for (int d = 0; d < n_full(); ++d)
      if (kind_[d] == Kind::free) reduced_[d] = n_reduced_++;
    finalized_ = true;
  }

  int n_full() const { return static_cast<int>(kind_.size()); }
  int n_reduced() const { return n_reduced_; }
  bool finalized() const { return finalized_; }

  bool is_free(int dof) const { return kind_[dof] == Kind::free; }
  bool is_dirichlet(int dof) const { return kind_[dof] == Kind::dirichlet; }
  bool is_slave(int dof) const { return kind_[dof] == Kind::slave; }
  double dirichlet_value(int dof) const { return value_[dof]; }
  int master_of(int dof) const { return master_[dof]; }
  int reduced_index(int dof) const { return reduced_[dof]; }

  /// Terminal DOF after following a slave link (identity for free/Dirichlet).
  int resolve(int dof) const { return kind_[dof] == Kind::slave ? master_[dof] : dof; }

  /// Same constraint pattern with homogeneous values (increment unknowns).
  DofMap zero_values() const {
    DofMap z = *this;
    std::fill(z.value_.begin(), z.value_.end(), 0.0);
    return z;
  }

  /// Expand a reduced vector to full size: slaves mirror masters, Dirichlet
  /// DOFs take their prescribed values.
  Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const {
    Eigen::VectorXd full(n_full());
    for (int d = 0; d < n_full(); ++d) {
      if (kind_[d] == Kind::free)
        full[d] = reduced[reduced_[d]];
      else if (kind_[d] == Kind::dirichlet)
        full[d] = value_[d];
    }
    for (int d = 0; d < n_full(); ++d)
      if (kind_[d] == Kind::slave) full[d] = full[master_[d]];
    return full;
  }

  /// Restrict a full residual-type vector: slave rows accumulate onto their
  /// masters, Dirichlet rows are dropped.
  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n_reduced_);
    for (int d = 0; d < n_full(); ++d) {
      const int t = resolve(d);
      if (kind_[t] == Kind::free) r[reduced_[t]] += full[d];
    }
    return r;
  }

private:
  enum class Kind { free, dirichlet, slave };
  std::vector<Kind> kind_;
  std::vector<double> value_;
  std::vector<int> master_;
  std::vector<int> reduced_;
  int n_reduced_ = 0;
  bool finalized_ = false;
};

struct SparseSystem {
  Eigen::SparseMatrix<double> matrix; // reduced, structurally symmetric
  Eigen::VectorXd rhs;                // reduced
};

/// Element integrand: fill the element matrix/vector and the list of global
/// DOF indices. ke and fe arrive zero-sized; size them inside.
using ElementIntegrand =
    std::function<void(int elem, Eigen::MatrixXd& ke, Eigen::VectorXd& fe, std::vector<int>& dofs)>;

/// Scatter element contributions into the reduced system. The element loop
/// and triplet order are fixed, so repeated runs are bit-identical.
inline SparseSystem assemble(const Quad4Mesh& mesh, int n_dofs, const ElementIntegrand& integrand,
                             const DofMap& dofs) {
  if (!dofs.finalized()) throw ConfigError("assemble: DofMap not finalized");
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dofs.n_reduced());
  Eigen::MatrixXd ke;
  Eigen::VectorXd fe;
  std::vector<int> edofs;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    ke.resize(0, 0);
    fe.resize(0);
    edofs.clear();
    integrand(e, ke, fe, edofs);
    const int n = static_cast<int>(edofs.size());
    for (int r = 0; r < n; ++r) {
      if (edofs[r] < 0 || edofs[r] >= n_dofs)
        throw ConfigError("assemble: DOF index out of range");
      const int rr = dofs.resolve(edofs[r]);
      if (!dofs.is_free(rr)) continue;
      const int ri = dofs.reduced_index(rr);
      if (fe.size() == n) rhs[ri] += fe[r];
      if (ke.size() == 0) continue;
      for (int c = 0; c < n; ++c) {
        const int cc = dofs.resolve(edofs[c]);
        if (dofs.is_free(cc))
          triplets.emplace_back(ri, dofs.reduced_index(cc), ke(r, c));
        else // Dirichlet column: move the known contribution to the RHS
          rhs[ri] -= ke(r, c) * dofs.dirichlet_value(cc);
      }
    }
  }
  SparseSystem sys;
  sys.matrix.resize(dofs.n_reduced(), dofs.n_reduced());
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.rhs = std::move(rhs);
  return sys;
}

/// Named candidate null vectors (full-size) used to classify a singular
/// reduced system in error messages.
using NullspaceCandidates = std::vector<std::pair<std::string, Eigen::VectorXd>>;

namespace detail {

inline std::string classify_nullspace(const SparseSystem& sys, const DofMap& dofs,
                                      const NullspaceCandidates& candidates,
                                      double threshold = 1e-4) {
  std::string best = "unknown";
  double best_score = threshold;
  for (const auto& [name, full] : candidates) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dofs.n_reduced());
    for (int d = 0; d < dofs.n_full(); ++d)
      if (dofs.is_free(d)) v[dofs.reduced_index(d)] = full[d];
    const double nv = v.norm();
    if (nv == 0.0) continue;
    const double scale =
        sys.matrix.nonZeros() > 0 ? sys.matrix.coeffs().cwiseAbs().maxCoeff() : 1.0;
    const double score = (sys.matrix * v).norm() / (nv * std::max(1.0, scale));
    if (score < best_score) {
      best_score = score;
      best = name;
    }
  }
  return best;
}

} // namespace detail

/// Direct sparse solve of the reduced system; returns the full-size solution
/// with Dirichlet values imposed exactly and slaves equal to their masters.
/// Candidate null vectors are probed up front so a singular system is
/// reported by its mode class rather than by a meaningless solution.
inline Eigen::VectorXd solve_constrained(const SparseSystem& sys, const DofMap& dofs,
                                         const NullspaceCandidates& candidates = {}) {
  if (!candidates.empty()) {
    const std::string mode = detail::classify_nullspace(sys, dofs, candidates, 1e-12);
    if (mode != "unknown")
      throw NumericError("solve_constrained: singular reduced system; null mode: " + mode);
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(sys.matrix);
  Eigen::VectorXd x;
  bool ok = (lu.info() == Eigen::Success);
  if (ok) {
    x = lu.solve(sys.rhs);
    const double amax =
        sys.matrix.nonZeros() > 0 ? sys.matrix.coeffs().cwiseAbs().maxCoeff() : 0.0;
    const double norm_a = amax * static_cast<double>(sys.matrix.rows());
    const double bound = 1e-10 * (norm_a * x.norm() + sys.rhs.norm());
    ok = ((sys.matrix * x - sys.rhs).norm() <= std::max(bound, 1e-300));
  }
  if (!ok)
    throw NumericError("solve_constrained: singular reduced system; null mode: " +
                       detail::classify_nullspace(sys, dofs, candidates));
  return dofs.expand(x);
}

/// Rigid-body candidates for a 2-DOF-per-node field, interleaved layout.
inline NullspaceCandidates rigid_mode_candidates(const Quad4Mesh& mesh, int n_dofs_total) {
  const int n = mesh.n_nodes();
  Eigen::VectorXd tx = Eigen::VectorXd::Zero(n_dofs_total);
  Eigen::VectorXd ty = Eigen::VectorXd::Zero(n_dofs_total);
  Eigen::VectorXd rot = Eigen::VectorXd::Zero(n_dofs_total);
  for (int a = 0; a < n; ++a) {
    tx[2 * a] = 1.0;
    ty[2 * a + 1] = 1.0;
    rot[2 * a] = -mesh.nodes[a].x2;
    rot[2 * a + 1] = mesh.nodes[a].x1;
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Ones(n_dofs_total);
  return {{"rigid translation x", tx},
          {"rigid translation y", ty},
          {"rigid rotation", rot},
          {"unconstrained mean", mean}};
}

} // namespace microfrac

#endif
