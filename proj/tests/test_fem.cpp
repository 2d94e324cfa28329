#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "microfrac/cell.hpp"
#include "microfrac/elastic_tensor.hpp"
#include "microfrac/fem.hpp"
#include "microfrac/mesh.hpp"

using namespace microfrac;

TEST(ShapeFunctions, NodalAndCenterValues) {
  const auto center = q4_shape(0.0, 0.0);
  for (double n : center.N) EXPECT_DOUBLE_EQ(n, 0.25);

  const auto corner = q4_shape(-1.0, -1.0);
  EXPECT_DOUBLE_EQ(corner.N[0], 1.0);
  EXPECT_DOUBLE_EQ(corner.N[1], 0.0);
  EXPECT_DOUBLE_EQ(corner.N[2], 0.0);
  EXPECT_DOUBLE_EQ(corner.N[3], 0.0);

  const auto mid = q4_shape(0.5, 0.0);
  EXPECT_DOUBLE_EQ(mid.N[0], 0.125);
  EXPECT_DOUBLE_EQ(mid.N[1], 0.375);
  EXPECT_DOUBLE_EQ(mid.N[2], 0.375);
  EXPECT_DOUBLE_EQ(mid.N[3], 0.125);
}

TEST(ShapeFunctions, PartitionOfUnity) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const auto s = q4_shape(unit(rng), unit(rng));
    double sum_n = 0.0, sum_dxi = 0.0, sum_deta = 0.0;
    for (int a = 0; a < 4; ++a) {
      sum_n += s.N[a];
      sum_dxi += s.dN[a][0];
      sum_deta += s.dN[a][1];
    }
    EXPECT_NEAR(sum_n, 1.0, 1e-14);
    EXPECT_NEAR(sum_dxi, 0.0, 1e-14);
    EXPECT_NEAR(sum_deta, 0.0, 1e-14);
  }
}

TEST(BMatrices, RigidTranslationGivesZeroStrain) {
  const Quad4Mesh mesh = build_unit_cell_mesh(4, {InclusionShape::circle, 0.25});
  Eigen::Matrix<double, 8, 1> u;
  for (int a = 0; a < 4; ++a) {
    u[2 * a] = 0.7;
    u[2 * a + 1] = -1.3;
  }
  for (const auto& [xi, eta] : q4_gauss_points()) {
    const auto b = b_matrices(mesh, 5, xi, eta);
    EXPECT_LT((b.B_u * u).norm(), 1e-14);
  }
}

TEST(BMatrices, AffineFieldGivesUnitStrain) {
  const Quad4Mesh mesh = build_unit_cell_mesh(4, {InclusionShape::circle, 0.25});
  const int e = 9;
  const auto c = mesh.element_coords(e);
  Eigen::Matrix<double, 8, 1> u;
  Eigen::Vector4d d;
  for (int a = 0; a < 4; ++a) {
    u[2 * a] = c[a].x1; // U1 = x1
    u[2 * a + 1] = 0.0;
    d[a] = c[a].x2; // d = x2
  }
  for (const auto& [xi, eta] : q4_gauss_points()) {
    const auto b = b_matrices(mesh, e, xi, eta);
    const Eigen::Vector3d strain = b.B_u * u;
    EXPECT_NEAR(strain[0], 1.0, 1e-13);
    EXPECT_NEAR(strain[1], 0.0, 1e-13);
    EXPECT_NEAR(strain[2], 0.0, 1e-13);
    const Eigen::Vector2d grad = b.B_d * d;
    EXPECT_NEAR(grad[0], 0.0, 1e-13);
    EXPECT_NEAR(grad[1], 1.0, 1e-13);
  }
}

TEST(BMatrices, NonPositiveJacobianRejected) {
  Quad4Mesh mesh = build_unit_cell_mesh(4, {InclusionShape::circle, 0.25});
  std::swap(mesh.elements[0][1], mesh.elements[0][3]); // flip orientation
  EXPECT_THROW(b_matrices(mesh, 0, 0.3, -0.2), NumericError);
}

namespace {

// Elasticity integrand over the displacement DOFs of a mesh.
ElementIntegrand elasticity_integrand(const Quad4Mesh& mesh, const ElasticTensor& c) {
  return [&mesh, c](int e, Eigen::MatrixXd& ke, Eigen::VectorXd& fe, std::vector<int>& dofs) {
    ke = Eigen::MatrixXd::Zero(8, 8);
    fe = Eigen::VectorXd::Zero(8);
    for (const auto& [xi, eta] : q4_gauss_points()) {
      const auto b = b_matrices(mesh, e, xi, eta);
      ke += b.B_u.transpose() * c.mat() * b.B_u * b.dvol;
    }
    dofs.resize(8);
    for (int a = 0; a < 4; ++a) {
      dofs[2 * a] = 2 * mesh.elements[e][a];
      dofs[2 * a + 1] = 2 * mesh.elements[e][a] + 1;
    }
  };
}

DofMap all_free(int n) {
  DofMap d(n);
  d.finalize();
  return d;
}

} // namespace

TEST(Assemble, SingleElementIdentity) {
  Quad4Mesh mesh;
  mesh.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  mesh.elements = {{0, 1, 2, 3}};
  mesh.material = {MaterialId::matrix};
  mesh.nx = mesh.ny = 1;
  mesh.dx1 = mesh.dx2 = 1.0;
  const ElasticTensor c = plane_strain_tensor(1.0, 0.3);
  const DofMap dofs = all_free(8);
  const SparseSystem sys = assemble(mesh, 8, elasticity_integrand(mesh, c), dofs);

  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(8, 8);
  for (const auto& [xi, eta] : q4_gauss_points()) {
    const auto b = b_matrices(mesh, 0, xi, eta);
    ke += b.B_u.transpose() * c.mat() * b.B_u * b.dvol;
  }
  EXPECT_LT((Eigen::MatrixXd(sys.matrix) - ke).norm(), 1e-14 * ke.norm());
}

TEST(Assemble, DisjointGroupsAreBlockDiagonal) {
  Quad4Mesh mesh;
  mesh.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {5, 5}, {6, 5}, {6, 6}, {5, 6}};
  mesh.elements = {{0, 1, 2, 3}, {4, 5, 6, 7}};
  mesh.material = {MaterialId::matrix, MaterialId::matrix};
  mesh.nx = mesh.ny = 1;
  mesh.dx1 = mesh.dx2 = 1.0;
  const ElasticTensor c = plane_strain_tensor(1.0, 0.25);
  const SparseSystem sys = assemble(mesh, 16, elasticity_integrand(mesh, c), all_free(16));
  const Eigen::MatrixXd k(sys.matrix);
  EXPECT_LT(k.block(0, 8, 8, 8).norm(), 1e-300);
  EXPECT_LT(k.block(8, 0, 8, 8).norm(), 1e-300);
  EXPECT_GT(k.block(0, 0, 8, 8).norm(), 0.0);
  EXPECT_GT(k.block(8, 8, 8, 8).norm(), 0.0);
}

TEST(Assemble, UniformStressEquilibriumAtInteriorNodes) {
  // Homogeneous material, affine displacement: the internal-force vector must
  // vanish at interior DOFs (a uniform stress field is in equilibrium).
  const Quad4Mesh mesh = build_unit_cell_mesh(4, {InclusionShape::circle, 0.01});
  ASSERT_TRUE(std::all_of(mesh.material.begin(), mesh.material.end(),
                          [](MaterialId m) { return m == MaterialId::matrix; }));
  const ElasticTensor c = plane_strain_tensor(60000.0, 0.3);
  const int n = 2 * mesh.n_nodes();
  const SparseSystem sys = assemble(mesh, n, elasticity_integrand(mesh, c), all_free(n));

  Eigen::VectorXd u(n);
  for (int a = 0; a < mesh.n_nodes(); ++a) {
    u[2 * a] = 0.003 * mesh.nodes[a].x1 + 0.001 * mesh.nodes[a].x2;
    u[2 * a + 1] = -0.002 * mesh.nodes[a].x1 + 0.004 * mesh.nodes[a].x2;
  }
  const Eigen::VectorXd f = sys.matrix * u;
  const double scale = f.cwiseAbs().maxCoeff();
  for (int a = 0; a < mesh.n_nodes(); ++a) {
    const auto& p = mesh.nodes[a];
    const bool interior = p.x1 > 0.0 && p.x1 < 1.0 && p.x2 > 0.0 && p.x2 < 1.0;
    if (!interior) continue;
    EXPECT_LT(std::abs(f[2 * a]), 1e-12 * scale);
    EXPECT_LT(std::abs(f[2 * a + 1]), 1e-12 * scale);
  }
}

TEST(Assemble, SymmetricPositiveSemidefiniteWithRigidNullspace) {
  const Quad4Mesh mesh = build_unit_cell_mesh(4, {InclusionShape::square, 0.25});
  const ElasticTensor cm = plane_strain_tensor(60000.0, 0.3);
  const ElasticTensor ci = plane_strain_tensor(340000.0, 0.18);
  const int n = 2 * mesh.n_nodes();
  auto integrand = [&](int e, Eigen::MatrixXd& ke, Eigen::VectorXd& fe, std::vector<int>& dofs) {
    const ElasticTensor& c = mesh.material[e] == MaterialId::matrix ? cm : ci;
    elasticity_integrand(mesh, c)(e, ke, fe, dofs);
  };
  const SparseSystem sys = assemble(mesh, n, integrand, all_free(n));
  const Eigen::MatrixXd k(sys.matrix);
  EXPECT_LT((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12 * k.cwiseAbs().maxCoeff());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (k + k.transpose()));
  const auto& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  int null_count = 0;
  for (int i = 0; i < ev.size(); ++i) {
    EXPECT_GT(ev[i], -1e-10 * scale);
    if (std::abs(ev[i]) < 1e-9 * scale) ++null_count;
  }
  EXPECT_EQ(null_count, 3); // two translations + one rotation
}

TEST(SolveConstrained, ScalarSystem) {
  SparseSystem sys;
  sys.matrix.resize(1, 1);
  sys.matrix.insert(0, 0) = 2.0;
  sys.rhs = Eigen::VectorXd::Constant(1, 4.0);
  DofMap dofs(1);
  dofs.finalize();
  const Eigen::VectorXd x = solve_constrained(sys, dofs);
  EXPECT_DOUBLE_EQ(x[0], 2.0);
}

TEST(SolveConstrained, SlaveEqualsMasterExactly) {
  // Two springs with DOF 2 slaved to DOF 1; load applied on the slave still
  // lands on the master through the reduction.
  DofMap dofs(3);
  dofs.set_dirichlet(0, 0.0);
  dofs.set_slave(2, 1);
  dofs.finalize();
  Quad4Mesh dummy;
  dummy.nodes = {{0, 0}, {1, 0}, {2, 0}, {0, 1}};
  dummy.elements = {{0, 1, 2, 3}};
  dummy.material = {MaterialId::matrix};
  auto integrand = [](int, Eigen::MatrixXd& ke, Eigen::VectorXd& fe, std::vector<int>& dofs_) {
    ke = Eigen::MatrixXd::Zero(3, 3);
    ke(0, 0) = ke(1, 1) = 2.0;
    ke(0, 1) = ke(1, 0) = -1.0;
    ke(2, 2) = 1.0;
    fe = Eigen::VectorXd::Zero(3);
    fe[2] = 5.0; // load only on the slave
    dofs_ = {0, 1, 2};
  };
  const SparseSystem sys = assemble(dummy, 3, integrand, dofs);
  const Eigen::VectorXd x = solve_constrained(sys, dofs);
  EXPECT_DOUBLE_EQ(x[1], x[2]);
  EXPECT_DOUBLE_EQ(x[0], 0.0);
  // Reduced equation: (2 + 1) x1 = 5.
  EXPECT_NEAR(x[1], 5.0 / 3.0, 1e-14);
}

TEST(SolveConstrained, PatchTestAffineBoundary) {
  // Affine Dirichlet data on the whole boundary of a homogeneous region must
  // reproduce the affine field and a uniform stress state.
  const Quad4Mesh mesh = build_unit_cell_mesh(6, {InclusionShape::circle, 0.01});
  const ElasticTensor c = plane_strain_tensor(200000.0, 0.28);
  const int n = 2 * mesh.n_nodes();
  const double a11 = 0.002, a12 = -0.0007, a21 = 0.0011, a22 = -0.0015;
  auto exact = [&](const Point2& p) {
    return Eigen::Vector2d(a11 * p.x1 + a12 * p.x2, a21 * p.x1 + a22 * p.x2);
  };
  DofMap dofs(n);
  for (int a = 0; a < mesh.n_nodes(); ++a) {
    const auto& p = mesh.nodes[a];
    if (p.x1 == 0.0 || p.x1 == 1.0 || p.x2 == 0.0 || p.x2 == 1.0) {
      const Eigen::Vector2d u = exact(p);
      dofs.set_dirichlet(2 * a, u[0]);
      dofs.set_dirichlet(2 * a + 1, u[1]);
    }
  }
  dofs.finalize();
  const SparseSystem sys = assemble(mesh, n, elasticity_integrand(mesh, c), dofs);
  const Eigen::VectorXd u = solve_constrained(sys, dofs, rigid_mode_candidates(mesh, n));

  for (int a = 0; a < mesh.n_nodes(); ++a) {
    const Eigen::Vector2d ue = exact(mesh.nodes[a]);
    EXPECT_NEAR(u[2 * a], ue[0], 1e-12);
    EXPECT_NEAR(u[2 * a + 1], ue[1], 1e-12);
  }
  // Uniform Voigt stress across all Gauss points.
  const Eigen::Vector3d strain_exact(a11, a22, a12 + a21);
  const Eigen::Vector3d stress_exact = c.mat() * strain_exact;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    Eigen::Matrix<double, 8, 1> ue;
    for (int a = 0; a < 4; ++a) {
      ue[2 * a] = u[2 * mesh.elements[e][a]];
      ue[2 * a + 1] = u[2 * mesh.elements[e][a] + 1];
    }
    for (const auto& [xi, eta] : q4_gauss_points()) {
      const auto b = b_matrices(mesh, e, xi, eta);
      const Eigen::Vector3d stress = c.mat() * (b.B_u * ue);
      EXPECT_LT((stress - stress_exact).norm(), 1e-9 * stress_exact.norm());
    }
  }
}

TEST(SolveConstrained, SingularSystemNamesNullMode) {
  // Pure Neumann elasticity (no constraints): rigid modes remain.
  const Quad4Mesh mesh = build_unit_cell_mesh(4, {InclusionShape::circle, 0.01});
  const ElasticTensor c = plane_strain_tensor(1000.0, 0.3);
  const int n = 2 * mesh.n_nodes();
  const DofMap dofs = all_free(n);
  SparseSystem sys = assemble(mesh, n, elasticity_integrand(mesh, c), dofs);
  sys.rhs[0] = 1.0; // net force: no solution in the presence of rigid modes
  try {
    solve_constrained(sys, dofs, rigid_mode_candidates(mesh, n));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("rigid"), std::string::npos) << e.what();
  }
}

TEST(SolveConstrained, EliminationMatchesLagrangeMultipliers) {
  // Small periodic-plus-pin problem solved via elimination and via the full
  // saddle system with explicit multiplier rows.
  const Quad4Mesh mesh = build_unit_cell_mesh(4, {InclusionShape::square, 0.25});
  const ElasticTensor cm = plane_strain_tensor(60000.0, 0.3);
  const ElasticTensor ci = plane_strain_tensor(340000.0, 0.18);
  const int n = 2 * mesh.n_nodes();

  CellProblem cell(mesh);
  MicroMaterials mats;
  mats.matrix_undamaged = cm;
  mats.inclusion = ci;
  mats.damage = 0.3;
  const CorrectorSet correctors = cell.solve(mats);

  // Rebuild the same constrained problem as an augmented dense system.
  auto integrand = [&](int e, Eigen::MatrixXd& ke, Eigen::VectorXd& fe, std::vector<int>& dofs_) {
    const Eigen::Matrix3d c = mats.phase_tensor(mesh.material[e]).mat();
    ke = Eigen::MatrixXd::Zero(8, 8);
    fe = Eigen::VectorXd::Zero(8);
    for (const auto& [xi, eta] : q4_gauss_points()) {
      const auto b = b_matrices(mesh, e, xi, eta);
      ke += b.B_u.transpose() * c * b.B_u * b.dvol;
      fe -= b.B_u.transpose() * (c * CellProblem::unit_strain(0)) * b.dvol;
    }
    dofs_.resize(8);
    for (int a = 0; a < 4; ++a) {
      dofs_[2 * a] = 2 * mesh.elements[e][a];
      dofs_[2 * a + 1] = 2 * mesh.elements[e][a] + 1;
    }
  };
  const SparseSystem full = assemble(mesh, n, integrand, all_free(n));

  // Constraint rows: slave - master = 0 for periodic pairs, pinned corner = 0.
  std::vector<std::pair<int, int>> pairs;
  const int m = mesh.nx;
  for (int j = 1; j < m; ++j)
    pairs.emplace_back(mesh.grid_node(m, j), mesh.grid_node(0, j));
  for (int i = 1; i < m; ++i)
    pairs.emplace_back(mesh.grid_node(i, m), mesh.grid_node(i, 0));
  pairs.emplace_back(mesh.grid_node(m, 0), mesh.grid_node(0, 0));
  pairs.emplace_back(mesh.grid_node(0, m), mesh.grid_node(0, 0));
  pairs.emplace_back(mesh.grid_node(m, m), mesh.grid_node(0, 0));
  const int nc = static_cast<int>(2 * pairs.size()) + 2;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + nc, n + nc);
  kkt.topLeftCorner(n, n) = Eigen::MatrixXd(full.matrix);
  int row = 0;
  auto constrain = [&](int dof) {
    kkt(n + row, dof) = 1.0;
    kkt(dof, n + row) = 1.0;
    ++row;
  };
  for (const auto& [slave, master] : pairs) {
    for (int comp = 0; comp < 2; ++comp) {
      kkt(n + row, 2 * slave + comp) = 1.0;
      kkt(n + row, 2 * master + comp) = -1.0;
      kkt(2 * slave + comp, n + row) = 1.0;
      kkt(2 * master + comp, n + row) = -1.0;
      ++row;
    }
  }
  constrain(2 * mesh.grid_node(0, 0));
  constrain(2 * mesh.grid_node(0, 0) + 1);
  ASSERT_EQ(row, nc);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + nc);
  rhs.head(n) = full.rhs;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);

  // Compare after removing the cell mean (the corrector is normalized).
  Eigen::VectorXd raw = sol.head(n);
  std::span<const double> view(raw.data(), static_cast<size_t>(raw.size()));
  const double m1 = upscale_mean(mesh, view, 2, 0);
  const double m2 = upscale_mean(mesh, view, 2, 1);
  double max_err = 0.0;
  for (int a = 0; a < mesh.n_nodes(); ++a) {
    max_err = std::max(max_err, std::abs(raw[2 * a] - m1 - correctors.fields[0][2 * a]));
    max_err = std::max(max_err, std::abs(raw[2 * a + 1] - m2 - correctors.fields[0][2 * a + 1]));
  }
  const double scale = correctors.fields[0].cwiseAbs().maxCoeff();
  EXPECT_LT(max_err, 1e-9 * std::max(1.0, scale));
}
