#ifndef MICROFRAC_CELL_HPP
#define MICROFRAC_CELL_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <span>
#include <vector>

#include "microfrac/elastic_tensor.hpp"
#include "microfrac/errors.hpp"
#include "microfrac/fem.hpp"
#include "microfrac/mesh.hpp"

namespace microfrac {

/// Phase data of the unit cell at one damage level. Only the matrix
/// degrades; an inclusion whose undamaged tensor coincides with the matrix
/// one IS matrix material and degrades with it (homogeneous cell).
struct MicroMaterials {
  ElasticTensor matrix_undamaged;
  ElasticTensor inclusion;
  double residual_stiffness = 0.005; // K
  double damage = 0.0;
  GVariant g_variant = GVariant::literal;

  void validate() const {
    if (!(damage >= 0.0 && damage <= 1.0))
      throw ConfigError("MicroMaterials: damage must lie in [0, 1]");
    if (!(residual_stiffness > 0.0))
      throw ConfigError("MicroMaterials: residual stiffness K must be positive");
    if (!matrix_undamaged.positive_definite() || !inclusion.positive_definite())
      throw ConfigError("MicroMaterials: phase tensors must be positive definite");
  }

  bool homogeneous() const { return matrix_undamaged == inclusion; }

  ElasticTensor matrix_damaged() const {
    return degrade_matrix(matrix_undamaged, damage, residual_stiffness, g_variant);
  }

  ElasticTensor phase_tensor(MaterialId id) const {
    if (id == MaterialId::matrix || homogeneous()) return matrix_damaged();
    return inclusion;
  }
};

/// First-order perturbation fields on the unit cell, one per unit macroscopic
/// strain case in Voigt order {11, 22, 12}; case 12 is driven by unit
/// engineering shear. Q-periodic with zero discrete cell mean.
struct CorrectorSet {
  std::array<Eigen::VectorXd, 3> fields; // interleaved (u1,u2) nodal values
  double damage = 0.0;
  int n_nodes = 0;
};

/// Area-weighted discrete mean of a nodal scalar field over the cell
/// (|Q| = 1 for the square unit cell).
inline double upscale_mean(const Quad4Mesh& mesh, std::span<const double> nodal, int stride = 1,
                           int offset = 0) {
  double integral = 0.0;
  double area = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& conn = mesh.elements[e];
    for (const auto& [xi, eta] : q4_gauss_points()) {
      const BMatrices b = b_matrices(mesh, e, xi, eta);
      double v = 0.0;
      for (int a = 0; a < 4; ++a) v += b.N(0, a) * nodal[stride * conn[a] + offset];
      integral += v * b.dvol;
      area += b.dvol;
    }
  }
  return integral / area;
}

/// Periodic cell problem at one damage level: solves the three corrector
/// fields and evaluates the homogenized tensor by cell averaging. Reusable
/// across damage levels (the sparsity pattern is analyzed once).
class CellProblem {
public:
  explicit CellProblem(const Quad4Mesh& mesh) : mesh_(mesh), dofs_(build_dofmap(mesh)) {}

  /// Unit macroscopic strain cases in Voigt components (H11, H22, g12).
  static Eigen::Vector3d unit_strain(int voigt_case) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[voigt_case] = 1.0;
    return e;
  }

  CorrectorSet solve(const MicroMaterials& mats) {
    mats.validate();
    std::array<Eigen::VectorXd, 3> rhs;
    for (auto& r : rhs) r = Eigen::VectorXd::Zero(dofs_.n_reduced());

    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::Matrix<double, 8, 8> ke;
    for (int e = 0; e < mesh_.n_elements(); ++e) {
      const Eigen::Matrix3d c = mats.phase_tensor(mesh_.material[e]).mat();
      const auto& conn = mesh_.elements[e];
      ke.setZero();
      Eigen::Matrix<double, 8, 3> fe = Eigen::Matrix<double, 8, 3>::Zero();
      for (const auto& [xi, eta] : q4_gauss_points()) {
        const BMatrices b = b_matrices(mesh_, e, xi, eta);
        ke += b.B_u.transpose() * c * b.B_u * b.dvol;
        for (int q = 0; q < 3; ++q)
          fe.col(q) -= b.B_u.transpose() * (c * unit_strain(q)) * b.dvol;
      }
      std::array<int, 8> edofs;
      for (int a = 0; a < 4; ++a) {
        edofs[2 * a] = 2 * conn[a];
        edofs[2 * a + 1] = 2 * conn[a] + 1;
      }
      for (int r = 0; r < 8; ++r) {
        const int rr = dofs_.resolve(edofs[r]);
        if (!dofs_.is_free(rr)) continue;
        const int ri = dofs_.reduced_index(rr);
        for (int q = 0; q < 3; ++q) rhs[q][ri] += fe(r, q);
        for (int col = 0; col < 8; ++col) {
          const int cc = dofs_.resolve(edofs[col]);
          if (dofs_.is_free(cc)) triplets.emplace_back(ri, dofs_.reduced_index(cc), ke(r, col));
          // Dirichlet columns are the pinned corner with zero value: no RHS term.
        }
      }
    }
    Eigen::SparseMatrix<double> k(dofs_.n_reduced(), dofs_.n_reduced());
    k.setFromTriplets(triplets.begin(), triplets.end());
    if (!analyzed_) {
      lu_.analyzePattern(k);
      analyzed_ = true;
    }
    lu_.factorize(k);
    if (lu_.info() != Eigen::Success)
      throw NumericError("CellProblem: cell stiffness factorization failed");

    CorrectorSet set;
    set.damage = mats.damage;
    set.n_nodes = mesh_.n_nodes();
    for (int q = 0; q < 3; ++q) {
      const Eigen::VectorXd& r = rhs[q];
      Eigen::VectorXd reduced = lu_.solve(r);
      if ((k * reduced - r).norm() > 1e-10 * std::max(1.0, r.norm()))
        throw NumericError("CellProblem: corrector solve residual out of tolerance");
      Eigen::VectorXd full = dofs_.expand(reduced);
      // Normalization <N> = 0: subtract the discrete cell mean per component.
      std::span<const double> view(full.data(), static_cast<size_t>(full.size()));
      const double m1 = upscale_mean(mesh_, view, 2, 0);
      const double m2 = upscale_mean(mesh_, view, 2, 1);
      for (int a = 0; a < mesh_.n_nodes(); ++a) {
        full[2 * a] -= m1;
        full[2 * a + 1] -= m2;
      }
      set.fields[q] = std::move(full);
    }
    return set;
  }

  /// Closed-form overall tensor: cell average of the energy product of
  /// corrected strain fields, C_IJ = <(E_I + grad N_I) : C : (E_J + grad N_J)>.
  ElasticTensor homogenize(const MicroMaterials& mats, const CorrectorSet& correctors) const {
    if (correctors.n_nodes != mesh_.n_nodes())
      throw ConfigError("homogenize: corrector set does not match the cell mesh");
    if (correctors.damage != mats.damage)
      throw ConfigError("homogenize: correctors were solved at a different damage level");
    Eigen::Matrix3d c_hom = Eigen::Matrix3d::Zero();
    double area = 0.0;
    for (int e = 0; e < mesh_.n_elements(); ++e) {
      const Eigen::Matrix3d c = mats.phase_tensor(mesh_.material[e]).mat();
      const auto& conn = mesh_.elements[e];
      std::array<Eigen::Matrix<double, 8, 1>, 3> ue;
      for (int q = 0; q < 3; ++q)
        for (int a = 0; a < 4; ++a) {
          ue[q][2 * a] = correctors.fields[q][2 * conn[a]];
          ue[q][2 * a + 1] = correctors.fields[q][2 * conn[a] + 1];
        }
      for (const auto& [xi, eta] : q4_gauss_points()) {
        const BMatrices b = b_matrices(mesh_, e, xi, eta);
        std::array<Eigen::Vector3d, 3> corrected;
        for (int q = 0; q < 3; ++q) corrected[q] = unit_strain(q) + b.B_u * ue[q];
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            c_hom(i, j) += corrected[i].dot(c * corrected[j]) * b.dvol;
        area += b.dvol;
      }
    }
    return ElasticTensor(c_hom / area);
  }

  const DofMap& dof_map() const { return dofs_; }

private:
  static DofMap build_dofmap(const Quad4Mesh& mesh) {
    const int n = mesh.nx;
    if (mesh.ny != n) throw ConfigError("CellProblem: unit cell mesh must be square");
    DofMap dofs(2 * mesh.n_nodes());
    auto node = [&](int i, int j) { return mesh.grid_node(i, j); };
    auto slave_pair = [&](int s, int m) {
      dofs.set_slave(2 * s, 2 * m);
      dofs.set_slave(2 * s + 1, 2 * m + 1);
    };
    // Opposite-edge pairing (right -> left, top -> bottom), corners all
    // slaved to the origin corner.
    for (int j = 1; j < n; ++j) slave_pair(node(n, j), node(0, j));
    for (int i = 1; i < n; ++i) slave_pair(node(i, n), node(i, 0));
    slave_pair(node(n, 0), node(0, 0));
    slave_pair(node(0, n), node(0, 0));
    slave_pair(node(n, n), node(0, 0));
    // Pin the master corner to remove the constant mode; the zero-mean
    // normalization is restored after the solve.
    dofs.set_dirichlet(2 * node(0, 0), 0.0);
    dofs.set_dirichlet(2 * node(0, 0) + 1, 0.0);
    dofs.finalize();
    return dofs;
  }

  const Quad4Mesh& mesh_;
  DofMap dofs_;
  // The pinned periodic elasticity operator is symmetric positive definite.
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> lu_;
  bool analyzed_ = false;
};

/// One-shot corrector solve (see CellProblem for the reusable form).
inline CorrectorSet solve_correctors(const Quad4Mesh& cell_mesh, const MicroMaterials& mats) {
  CellProblem problem(cell_mesh);
  return problem.solve(mats);
}

inline ElasticTensor homogenize(const Quad4Mesh& cell_mesh, const MicroMaterials& mats,
                                const CorrectorSet& correctors) {
  CellProblem problem(cell_mesh);
  return problem.homogenize(mats, correctors);
}

} // namespace microfrac

#endif
