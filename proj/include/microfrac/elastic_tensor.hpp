#ifndef MICROFRAC_ELASTIC_TENSOR_HPP
#define MICROFRAC_ELASTIC_TENSOR_HPP

#include <Eigen/Dense>
#include <cmath>

#include "microfrac/errors.hpp"

namespace microfrac {

/// Plane-strain stiffness in Voigt form, order (11, 22, 12), entries in MPa.
/// The strain vector convention is (H11, H22, g12) with engineering shear
/// g12 = dU1/dx2 + dU2/dx1, so the (3,3) entry of an isotropic tensor equals
/// the shear modulus mu.
class ElasticTensor {
public:
  ElasticTensor() : m_(Eigen::Matrix3d::Zero()) {}
  explicit ElasticTensor(const Eigen::Matrix3d& m) : m_(m) {}

  double operator()(int i, int j) const { return m_(i, j); }
  double& operator()(int i, int j) { return m_(i, j); }

  const Eigen::Matrix3d& mat() const { return m_; }
  Eigen::Matrix3d& mat() { return m_; }

  ElasticTensor operator*(double s) const { return ElasticTensor(m_ * s); }
  ElasticTensor operator+(const ElasticTensor& o) const { return ElasticTensor(m_ + o.m_); }
  ElasticTensor operator-(const ElasticTensor& o) const { return ElasticTensor(m_ - o.m_); }

  bool operator==(const ElasticTensor& o) const { return m_ == o.m_; }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (m_ + m_.transpose()));
    return es.eigenvalues().minCoeff();
  }

  bool positive_definite() const { return min_eigenvalue() > 0.0; }

  /// Largest relative asymmetry |C_ij - C_ji| / max|C|.
  double asymmetry() const {
    const double scale = m_.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (m_ - m_.transpose()).cwiseAbs().maxCoeff() / scale;
  }

private:
  Eigen::Matrix3d m_;
};

inline ElasticTensor operator*(double s, const ElasticTensor& c) { return c * s; }

/// Isotropic plane-strain stiffness from Young's modulus (MPa) and Poisson ratio.
inline ElasticTensor plane_strain_tensor(double E, double nu) {
  if (!(E > 0.0)) throw ConfigError("plane_strain_tensor: E must be positive");
  if (!(nu > -1.0 && nu < 0.5))
    throw ConfigError("plane_strain_tensor: nu must lie in (-1, 1/2)");
  const double c = E / ((1.0 + nu) * (1.0 - 2.0 * nu));
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = m(1, 1) = c * (1.0 - nu);
  m(0, 1) = m(1, 0) = c * nu;
  m(2, 2) = E / (2.0 * (1.0 + nu));
  return ElasticTensor(m);
}

/// Degradation function applied to the matrix stiffness.
/// literal:    g(d) = (1-d)^2 + K, so g(0) = 1 + K
/// normalized: g(d) = (1-K)(1-d)^2 + K, so g(0) = 1 exactly
enum class GVariant { literal, normalized };

inline double degradation(double d, double K, GVariant variant = GVariant::literal) {
  const double q = (1.0 - d) * (1.0 - d);
  return variant == GVariant::literal ? q + K : (1.0 - K) * q + K;
}

inline double degradation_derivative(double d, double K, GVariant variant = GVariant::literal) {
  const double q = -2.0 * (1.0 - d);
  return variant == GVariant::literal ? q : (1.0 - K) * q;
}

/// Scale the undamaged matrix tensor by g(d). Scaling the full tensor is
/// exactly equivalent to degrading E at fixed nu, since the plane-strain
/// stiffness is proportional to E.
inline ElasticTensor degrade_matrix(const ElasticTensor& c_matrix_0, double d, double K,
                                    GVariant variant = GVariant::literal) {
  if (!(d >= 0.0 && d <= 1.0))
    throw ConfigError("degrade_matrix: damage must lie in [0, 1]");
  return c_matrix_0 * degradation(d, K, variant);
}

/// Arithmetic (Voigt) mixture of a diagonal Voigt component: the upper
/// mixture bound for that entry.
inline double voigt_bound(const ElasticTensor& matrix, const ElasticTensor& inclusion, double f,
                          int i) {
  return (1.0 - f) * matrix(i, i) + f * inclusion(i, i);
}

/// Harmonic (Reuss) mixture of a diagonal Voigt component: the lower
/// mixture bound for that entry.
inline double reuss_bound(const ElasticTensor& matrix, const ElasticTensor& inclusion, double f,
                          int i) {
  return 1.0 / ((1.0 - f) / matrix(i, i) + f / inclusion(i, i));
}

} // namespace microfrac

#endif
