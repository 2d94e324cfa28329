#ifndef MICROFRAC_MACRO_HPP
#define MICROFRAC_MACRO_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <functional>
#include <vector>

#include "microfrac/errors.hpp"
#include "microfrac/fem.hpp"
#include "microfrac/lookup.hpp"
#include "microfrac/mesh.hpp"

namespace microfrac {

struct SolverConfig {
  double G_C = 6.0;  // N/mm
  double ell = 0.4;  // mm
  std::vector<double> load_schedule; // imposed displacements Delta (mm), nondecreasing
  double newton_tol = 1e-8;
  int max_newton_iters = 25;
  int bisection_depth = 6;
  double eta = 0.0; // viscous crack resistance; 0 disables the term

  enum class Irreversibility { clamp, off };
  Irreversibility irreversibility = Irreversibility::clamp;

  enum class Coupling { monolithic, staggered };
  Coupling coupling = Coupling::monolithic;

  /// Lateral condition on the loaded edges: "free" leaves u1 unconstrained
  /// except one anchoring mid-node per edge; "clamped" fixes u1 on both edges.
  enum class Grip { free, clamped };
  Grip grip = Grip::free;

  void validate() const {
    if (!(G_C > 0.0)) throw ConfigError("SolverConfig: G_C must be positive");
    if (!(ell > 0.0)) throw ConfigError("SolverConfig: ell must be positive");
    if (!(newton_tol > 0.0)) throw ConfigError("SolverConfig: newton_tol must be positive");
    if (max_newton_iters < 1) throw ConfigError("SolverConfig: max_newton_iters must be >= 1");
    if (bisection_depth < 0) throw ConfigError("SolverConfig: bisection_depth must be >= 0");
    if (eta < 0.0) throw ConfigError("SolverConfig: eta must be nonnegative");
    for (size_t i = 1; i < load_schedule.size(); ++i)
      if (load_schedule[i] < load_schedule[i - 1])
        throw ConfigError("SolverConfig: load schedule must be nondecreasing");
  }
};

/// Converged-step summary. T22 is the sum of the reaction forces on the
/// upper boundary divided by the specimen width (unit thickness); H22 is the
/// imposed displacement divided by the half-height L.
struct StepRecord {
  int step = 0;
  double delta = 0.0;   // mm
  double h22 = 0.0;     // Delta / L
  double t22 = 0.0;     // MPa
  double max_d = 0.0;
  int newton_iters = 0;
  bool converged = false;
};

struct MacroState {
  Eigen::VectorXd u;      // 2 per node, interleaved
  Eigen::VectorXd d;      // 1 per node
  Eigen::VectorXd d_prev; // phase field of the previous converged step
  double delta = 0.0;     // currently imposed boundary displacement
};

/// Coupled displacement / phase-field problem on the homogenized specimen,
/// solved by monolithic Newton-Raphson over prescribed-displacement steps.
/// The constitutive law is the damage look-up table: C(d), dC/dd, d2C/dd2.
class MacroProblem {
public:
  MacroProblem(const Quad4Mesh& mesh, const DamageLookup& table, SolverConfig config)
      : mesh_(mesh), table_(table), cfg_(std::move(config)) {
    cfg_.validate();
    n_nodes_ = mesh_.n_nodes();
    length_ = mesh_.nx * mesh_.dx1;
    gp_.resize(mesh_.n_elements());
    for (int e = 0; e < mesh_.n_elements(); ++e) {
      int q = 0;
      for (const auto& [xi, eta] : q4_gauss_points()) gp_[e][q++] = b_matrices(mesh_, e, xi, eta);
    }
  }

  const SolverConfig& config() const { return cfg_; }
  const Quad4Mesh& mesh() const { return mesh_; }
  double width() const { return length_; }
  int n_dofs() const { return 3 * n_nodes_; }

  MacroState initial_state() const {
    MacroState s;
    s.u = Eigen::VectorXd::Zero(2 * n_nodes_);
    s.d = Eigen::VectorXd::Zero(n_nodes_);
    s.d_prev = s.d;
    return s;
  }

  /// Symmetric stretching: u2 = +Delta on the top edge, u2 = -Delta on the
  /// bottom edge (total 2*Delta over height 2L, so H22 = Delta/L). The phase
  /// field keeps pure Neumann conditions. DOF layout: u DOFs first
  /// (interleaved), then one phase DOF per node.
  DofMap apply_boundary_conditions(double delta) const {
    DofMap dofs(n_dofs());
    const auto& top = mesh_.node_set("top");
    const auto& bottom = mesh_.node_set("bottom");
    for (int a : top) dofs.set_dirichlet(2 * a + 1, delta);
    for (int a : bottom) dofs.set_dirichlet(2 * a + 1, -delta);
    if (cfg_.grip == SolverConfig::Grip::clamped) {
      for (int a : top) dofs.set_dirichlet(2 * a, 0.0);
      for (int a : bottom) dofs.set_dirichlet(2 * a, 0.0);
    } else {
      dofs.set_dirichlet(2 * mid_node(top), 0.0);
      dofs.set_dirichlet(2 * mid_node(bottom), 0.0);
    }
    dofs.finalize();
    return dofs;
  }

  /// Residual vectors of the displacement and phase-field equations, full
  /// size (no constraint reduction). External tractions and body forces are
  /// zero in the benchmarks, so R_u is purely the internal-force term.
  void assemble_residuals(const MacroState& state, Eigen::VectorXd& r_u,
                          Eigen::VectorXd& r_d) const {
    r_u = Eigen::VectorXd::Zero(2 * n_nodes_);
    r_d = Eigen::VectorXd::Zero(n_nodes_);
    Eigen::Matrix<double, 12, 1> re;
    Eigen::Matrix<double, 12, 12> ke;
    for (int e = 0; e < mesh_.n_elements(); ++e) {
      element_work(e, state, re, ke, false);
      const auto& conn = mesh_.elements[e];
      for (int a = 0; a < 4; ++a) {
        r_u[2 * conn[a]] += re[2 * a];
        r_u[2 * conn[a] + 1] += re[2 * a + 1];
        r_d[conn[a]] += re[8 + a];
      }
    }
  }

  struct TangentBlocks {
    Eigen::SparseMatrix<double> K_uu; // 2N x 2N
    Eigen::SparseMatrix<double> K_ud; // 2N x N
    Eigen::SparseMatrix<double> K_du; // N x 2N
    Eigen::SparseMatrix<double> K_dd; // N x N
  };

  /// Consistent tangent blocks of Eq. system (unreduced).
  TangentBlocks assemble_tangent(const MacroState& state) const {
    std::vector<Eigen::Triplet<double>> tuu, tud, tdu, tdd;
    Eigen::Matrix<double, 12, 1> re;
    Eigen::Matrix<double, 12, 12> ke;
    for (int e = 0; e < mesh_.n_elements(); ++e) {
      element_work(e, state, re, ke, true);
      const auto& conn = mesh_.elements[e];
      std::array<int, 8> udof;
      for (int a = 0; a < 4; ++a) {
        udof[2 * a] = 2 * conn[a];
        udof[2 * a + 1] = 2 * conn[a] + 1;
      }
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) tuu.emplace_back(udof[r], udof[c], ke(r, c));
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 4; ++c) tud.emplace_back(udof[r], conn[c], ke(r, 8 + c));
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 8; ++c) tdu.emplace_back(conn[r], udof[c], ke(8 + r, c));
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) tdd.emplace_back(conn[r], conn[c], ke(8 + r, 8 + c));
    }
    TangentBlocks b;
    b.K_uu.resize(2 * n_nodes_, 2 * n_nodes_);
    b.K_ud.resize(2 * n_nodes_, n_nodes_);
    b.K_du.resize(n_nodes_, 2 * n_nodes_);
    b.K_dd.resize(n_nodes_, n_nodes_);
    b.K_uu.setFromTriplets(tuu.begin(), tuu.end());
    b.K_ud.setFromTriplets(tud.begin(), tud.end());
    b.K_du.setFromTriplets(tdu.begin(), tdu.end());
    b.K_dd.setFromTriplets(tdd.begin(), tdd.end());
    return b;
  }

  struct NewtonResult {
    bool converged = false;
    int iters = 0;
  };

  /// Newton-Raphson iteration on a trial state under an arbitrary Dirichlet
  /// set (values imposed from the map before iterating). The convergence norm
  /// is the combined reduced residual relative to the first iterate of the
  /// solve. No projection is applied here.
  NewtonResult solve_with_bc(MacroState& trial, const DofMap& bc, double dt = 1.0) const {
    for (int dof = 0; dof < n_dofs(); ++dof) {
      if (!bc.is_dirichlet(dof)) continue;
      if (dof < 2 * n_nodes_)
        trial.u[dof] = bc.dirichlet_value(dof);
      else
        trial.d[dof - 2 * n_nodes_] = bc.dirichlet_value(dof);
    }
    // Increments carry homogeneous values at constrained DOFs.
    const DofMap incr = bc.zero_values();
    const double eta_over_dt = cfg_.eta > 0.0 ? cfg_.eta / std::max(dt, 1e-12) : 0.0;

    NewtonResult res;
    double ref_norm = -1.0;
    while (res.iters < cfg_.max_newton_iters) {
      ++res.iters;
      const SparseSystem sys = assemble(
          mesh_, n_dofs(),
          [&](int e, Eigen::MatrixXd& ke, Eigen::VectorXd& fe, std::vector<int>& edofs) {
            Eigen::Matrix<double, 12, 1> re;
            Eigen::Matrix<double, 12, 12> kel;
            element_work(e, trial, re, kel, true, eta_over_dt);
            ke = kel;
            fe = re;
            element_dofs(e, edofs);
          },
          incr);
      const double rnorm = sys.rhs.norm();
      if (ref_norm < 0.0) ref_norm = rnorm;
      if (rnorm <= cfg_.newton_tol * ref_norm || rnorm <= 1e-12) {
        res.converged = true;
        return res;
      }
      Eigen::VectorXd step;
      try {
        step = solve_constrained(sys, incr, rigid_mode_candidates(mesh_, n_dofs()));
      } catch (const NumericError&) {
        return res; // singular tangent: report non-convergence, let the caller bisect
      }
      // Backtracking on the residual norm keeps the iteration in its basin
      // through the steep post-peak branch.
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 9; ++ls) {
        MacroState cand = trial;
        cand.u += alpha * step.head(2 * n_nodes_);
        cand.d += alpha * step.tail(n_nodes_);
        if (cand.u.allFinite() && cand.d.allFinite() &&
            reduced_residual_norm(cand, incr, eta_over_dt) < rnorm) {
          trial = std::move(cand);
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) return res; // stagnated: let the caller bisect the step
    }
    return res;
  }

  /// One Newton-Raphson solve toward the target imposed displacement.
  /// On convergence the state is advanced (with the irreversibility
  /// projection applied); otherwise the state is left untouched and the
  /// record carries converged = false.
  StepRecord newton_solve_step(MacroState& state, double delta_target) const {
    StepRecord rec;
    rec.delta = delta_target;
    rec.h22 = delta_target / length_;

    MacroState trial = state;
    trial.delta = delta_target;
    const NewtonResult res = solve_with_bc(trial, apply_boundary_conditions(delta_target),
                                           std::max(delta_target - state.delta, 1e-12));

    rec.newton_iters = res.iters;
    rec.converged = res.converged;
    if (!res.converged) return rec;

    // Projection: damage stays in [0,1]; with the clamp mode it also never
    // decreases across steps.
    for (int a = 0; a < n_nodes_; ++a) {
      const double lo =
          cfg_.irreversibility == SolverConfig::Irreversibility::clamp ? state.d_prev[a] : 0.0;
      trial.d[a] = std::clamp(trial.d[a], std::max(lo, 0.0), 1.0);
    }
    trial.d_prev = trial.d;
    state = trial;

    rec.t22 = edge_reaction_sum(state, "top") / length_;
    rec.max_d = state.d.maxCoeff();
    return rec;
  }

  using StepCallback = std::function<void(const StepRecord&, const MacroState&)>;

  /// Monotone sweep over the configured load schedule with step bisection on
  /// Newton failure. Returns records of all converged (sub)steps; if a step
  /// cannot be converged within the bisection depth the run terminates and
  /// the partial results end with a converged = false record.
  std::vector<StepRecord> run_load_schedule(MacroState& state,
                                            const StepCallback& on_step = {}) const {
    std::vector<StepRecord> records;
    int step_id = 0;
    for (double target : cfg_.load_schedule) {
      if (target < state.delta)
        throw ConfigError("run_load_schedule: schedule went below the current state");
      int depth = 0;
      double inc = target - state.delta;
      while (state.delta < target - 1e-15) {
        const double attempt = std::min(state.delta + inc, target);
        StepRecord rec = newton_solve_step(state, attempt);
        if (rec.converged) {
          rec.step = ++step_id;
          records.push_back(rec);
          if (on_step) on_step(rec, state);
          depth = 0; // a fresh halving budget after every converged sub-step
          inc = std::min(2.0 * inc, target - state.delta);
          continue;
        }
        if (++depth > cfg_.bisection_depth) {
          rec.step = step_id + 1;
          records.push_back(rec); // flagged: converged = false
          return records;
        }
        inc *= 0.5;
      }
    }
    return records;
  }

  /// Sum of reaction force components u2 over a boundary node set, from the
  /// assembled internal forces of the current state.
  double edge_reaction_sum(const MacroState& state, const std::string& set_name) const {
    Eigen::VectorXd r_u, r_d;
    assemble_residuals(state, r_u, r_d);
    double sum = 0.0;
    for (int a : mesh_.node_set(set_name)) sum += -r_u[2 * a + 1];
    return sum;
  }

  /// Sum of lateral (u1) reaction components over a node set.
  double lateral_reaction_sum(const MacroState& state, const std::string& set_name) const {
    Eigen::VectorXd r_u, r_d;
    assemble_residuals(state, r_u, r_d);
    double sum = 0.0;
    for (int a : mesh_.node_set(set_name)) sum += -r_u[2 * a];
    return sum;
  }

  /// Regularized crack surface energy int G_C * gamma(d, grad d) dOmega.
  double dissipation_energy(const MacroState& state) const {
    double energy = 0.0;
    for (int e = 0; e < mesh_.n_elements(); ++e) {
      const auto& conn = mesh_.elements[e];
      Eigen::Vector4d de;
      for (int a = 0; a < 4; ++a) de[a] = state.d[conn[a]];
      for (const auto& gp : gp_[e]) {
        const double d = (gp.N * de)(0);
        const Eigen::Vector2d grad = gp.B_d * de;
        energy += cfg_.G_C * (d * d / (2.0 * cfg_.ell) + 0.5 * cfg_.ell * grad.squaredNorm()) *
                  gp.dvol;
      }
    }
    return energy;
  }

  void element_dofs(int e, std::vector<int>& edofs) const {
    const auto& conn = mesh_.elements[e];
    edofs.resize(12);
    for (int a = 0; a < 4; ++a) {
      edofs[2 * a] = 2 * conn[a];
      edofs[2 * a + 1] = 2 * conn[a] + 1;
      edofs[8 + a] = 2 * n_nodes_ + conn[a];
    }
  }

private:
  double reduced_residual_norm(const MacroState& state, const DofMap& incr,
                               double eta_over_dt) const {
    Eigen::VectorXd full(n_dofs());
    Eigen::Matrix<double, 12, 1> re;
    Eigen::Matrix<double, 12, 12> ke;
    full.setZero();
    for (int e = 0; e < mesh_.n_elements(); ++e) {
      element_work(e, state, re, ke, false, eta_over_dt);
      const auto& conn = mesh_.elements[e];
      for (int a = 0; a < 4; ++a) {
        full[2 * conn[a]] += re[2 * a];
        full[2 * conn[a] + 1] += re[2 * a + 1];
        full[2 * n_nodes_ + conn[a]] += re[8 + a];
      }
    }
    return incr.reduce(full).norm();
  }

  int mid_node(const std::vector<int>& set) const {
    const double x_mid = mesh_.x1_min + 0.5 * length_;
    int best = set.front();
    for (int a : set)
      if (std::abs(mesh_.nodes[a].x1 - x_mid) < std::abs(mesh_.nodes[best].x1 - x_mid)) best = a;
    return best;
  }

  /// Element residual and (optionally) consistent tangent at the current
  /// state, ordered [u1_1,u2_1,...,u1_4,u2_4, d_1..d_4].
  void element_work(int e, const MacroState& state, Eigen::Matrix<double, 12, 1>& re,
                    Eigen::Matrix<double, 12, 12>& ke, bool want_tangent,
                    double eta_over_dt = 0.0) const {
    const auto& conn = mesh_.elements[e];
    Eigen::Matrix<double, 8, 1> ue;
    Eigen::Vector4d de, de_prev;
    for (int a = 0; a < 4; ++a) {
      ue[2 * a] = state.u[2 * conn[a]];
      ue[2 * a + 1] = state.u[2 * conn[a] + 1];
      de[a] = state.d[conn[a]];
      de_prev[a] = state.d_prev[conn[a]];
    }
    re.setZero();
    if (want_tangent) ke.setZero();

    const double gc_l = cfg_.G_C * cfg_.ell;
    const double gc_over_l = cfg_.G_C / cfg_.ell;
    const bool coupled = cfg_.coupling == SolverConfig::Coupling::monolithic;

    for (const auto& gp : gp_[e]) {
      const double d_gp = (gp.N * de)(0);
      const auto mat = table_.eval(d_gp);
      const Eigen::Vector3d strain = gp.B_u * ue;
      const Eigen::Vector2d grad_d = gp.B_d * de;

      re.head<8>() -= gp.B_u.transpose() * (mat.C.mat() * strain) * gp.dvol;

      const Eigen::Vector3d dc_strain = mat.dC.mat() * strain;
      const double half_h_dc_h = 0.5 * strain.dot(dc_strain);
      re.tail<4>() -= (gc_l * gp.B_d.transpose() * grad_d +
                       (gc_over_l * d_gp + half_h_dc_h) * gp.N.transpose()) *
                      gp.dvol;
      if (eta_over_dt > 0.0)
        re.tail<4>() -= eta_over_dt * (gp.N * (de - de_prev))(0) * gp.N.transpose() * gp.dvol;

      if (!want_tangent) continue;
      ke.block<8, 8>(0, 0) += gp.B_u.transpose() * mat.C.mat() * gp.B_u * gp.dvol;
      const double half_h_d2c_h = 0.5 * strain.dot(mat.d2C.mat() * strain);
      ke.block<4, 4>(8, 8) +=
          (gc_l * gp.B_d.transpose() * gp.B_d +
           (gc_over_l + half_h_d2c_h + eta_over_dt) * gp.N.transpose() * gp.N) *
          gp.dvol;
      if (coupled) {
        const Eigen::Matrix<double, 8, 1> coupling_col = gp.B_u.transpose() * dc_strain;
        ke.block<8, 4>(0, 8) += coupling_col * gp.N * gp.dvol;
        ke.block<4, 8>(8, 0) += gp.N.transpose() * coupling_col.transpose() * gp.dvol;
      }
    }
  }

  const Quad4Mesh& mesh_;
  const DamageLookup& table_;
  SolverConfig cfg_;
  int n_nodes_ = 0;
  double length_ = 0.0;
  std::vector<std::array<BMatrices, 4>> gp_;
};

} // namespace microfrac

#endif
