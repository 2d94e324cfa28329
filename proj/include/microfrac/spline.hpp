#ifndef MICROFRAC_SPLINE_HPP
#define MICROFRAC_SPLINE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "microfrac/errors.hpp"

namespace microfrac {

/// Interpolating cubic spline on a strictly increasing knot grid.
///
/// End conditions:
///   natural     — zero second derivative at both ends
///   not_a_knot  — third-derivative continuity at the second and penultimate
///                 knots (requires a uniform grid here); exact for cubics and
///                 free of the end boundary layer of the natural condition
enum class SplineEnd { natural, not_a_knot };

class CubicSpline {
public:
  CubicSpline() = default;

  CubicSpline(std::vector<double> x, std::vector<double> y,
              SplineEnd end = SplineEnd::not_a_knot)
      : x_(std::move(x)), y_(std::move(y)) {
    const int n = static_cast<int>(x_.size());
    if (n < 3 || y_.size() != x_.size())
      throw ConfigError("CubicSpline: need at least 3 matching knots");
    for (int i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw ConfigError("CubicSpline: knots must strictly increase");

    m_.assign(n, 0.0);
    std::vector<double> h(n - 1);
    for (int i = 0; i + 1 < n; ++i) h[i] = x_[i + 1] - x_[i];

    if (end == SplineEnd::natural) {
      // Tridiagonal system for the interior second derivatives, M_0 = M_{n-1} = 0.
      std::vector<double> diag(n, 2.0), sub(n, 0.0), sup(n, 0.0), rhs(n, 0.0);
      for (int i = 1; i + 1 < n; ++i) {
        sub[i] = h[i - 1] / (h[i - 1] + h[i]);
        sup[i] = h[i] / (h[i - 1] + h[i]);
        rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]) /
                 (h[i - 1] + h[i]);
      }
      for (int i = 2; i + 1 < n; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
      }
      for (int i = n - 2; i >= 1; --i) m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
    } else {
      if (n < 4) throw ConfigError("CubicSpline: not-a-knot needs at least 4 knots");
      const double h0 = h[0];
      for (int i = 1; i + 1 < n; ++i)
        if (std::abs(h[i] - h0) > 1e-12 * h0)
          throw ConfigError("CubicSpline: not-a-knot end condition requires a uniform grid");
      // On a uniform grid, substituting M_0 = 2M_1 - M_2 into the first
      // interior relation M_0 + 4M_1 + M_2 = r_1 collapses it to 6M_1 = r_1
      // (and symmetrically at the other end), leaving a tridiagonal core.
      auto r = [&](int k) { return 6.0 * (y_[k + 1] - 2.0 * y_[k] + y_[k - 1]) / (h0 * h0); };
      m_[1] = r(1) / 6.0;
      m_[n - 2] = r(n - 2) / 6.0;
      if (n > 4) {
        const int nu = n - 4; // unknowns M_2 .. M_{n-3}
        std::vector<double> diag(nu, 4.0), rhs(nu);
        for (int k = 0; k < nu; ++k) rhs[k] = r(k + 2);
        rhs[0] -= m_[1];
        rhs[nu - 1] -= m_[n - 2];
        for (int k = 1; k < nu; ++k) {
          const double w = 1.0 / diag[k - 1];
          diag[k] -= w;
          rhs[k] -= w * rhs[k - 1];
        }
        m_[nu + 1] = rhs[nu - 1] / diag[nu - 1];
        for (int k = nu - 2; k >= 0; --k) m_[k + 2] = (rhs[k] - m_[k + 3]) / diag[k];
      }
      m_[0] = 2.0 * m_[1] - m_[2];
      m_[n - 1] = 2.0 * m_[n - 2] - m_[n - 3];
    }
  }

  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }

  struct Eval {
    double value;
    double d1;
    double d2;
  };

  /// Value and analytic first/second derivatives. Queries outside the knot
  /// range evaluate the boundary polynomial (callers clamp beforehand).
  Eval operator()(double x) const {
    const int n = static_cast<int>(x_.size());
    int k = static_cast<int>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
    k = std::max(0, std::min(n - 2, k));
    const double h = x_[k + 1] - x_[k];
    const double a = (x_[k + 1] - x) / h;
    const double b = (x - x_[k]) / h;
    Eval e;
    e.value = a * y_[k] + b * y_[k + 1] +
              ((a * a * a - a) * m_[k] + (b * b * b - b) * m_[k + 1]) * h * h / 6.0;
    e.d1 = (y_[k + 1] - y_[k]) / h -
           (3.0 * a * a - 1.0) * h * m_[k] / 6.0 + (3.0 * b * b - 1.0) * h * m_[k + 1] / 6.0;
    e.d2 = a * m_[k] + b * m_[k + 1];
    return e;
  }

private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_; // second derivatives at the knots
};

} // namespace microfrac

#endif
