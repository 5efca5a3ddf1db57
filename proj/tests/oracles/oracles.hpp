#pragma once

// Independent reference computations used only by the tests. Everything here
// is built from Boost.Math, Boost.Odeint, Eigen's generic solvers or plain
// simulation, never from the library under test.

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

inline double gamma_density(double x, double alpha) {
  int sign = 1;
  const double lg = boost::math::lgamma(alpha, &sign);
  return sign * std::exp(-x + (alpha - 1.0) * std::log(x) - lg);
}

/// Regularized lower incomplete gamma for alpha > 0; for negative non-integer
/// alpha, steps up with F(x; a) = f(x; a + 1) + F(x; a + 1).
inline double gamma_cdf(double x, double alpha) {
  if (alpha > 0.0) return boost::math::gamma_p(alpha, x);
  double sum = 0.0;
  double a = alpha;
  while (a <= 0.0) {
    sum += gamma_density(x, a + 1.0);
    a += 1.0;
  }
  return sum + boost::math::gamma_p(a, x);
}

/// Inverse of the gamma CDF by bisection on Boost's incomplete gamma.
inline double gamma_cdf_inverse_bisect(double q, double alpha) {
  double lo = 0.0, hi = 1.0;
  while (boost::math::gamma_p(alpha, hi) < q) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (boost::math::gamma_p(alpha, mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Noncentral chi-squared density in the (lambda, nu) parametrization:
/// 2 * ncx2_pdf(2x; df = 2nu + 2, noncentrality = 2 lambda). Needs nu > -1.
inline double chi2_density(double x, double lambda, double nu) {
  boost::math::non_central_chi_squared d(2.0 * nu + 2.0, 2.0 * lambda);
  return 2.0 * boost::math::pdf(d, 2.0 * x);
}

/// Feller density via the Bessel-function representation
/// (x/lambda)^{nu/2} e^{-x-lambda} I_{-nu}(2 sqrt(lambda x)).
inline double feller_density(double x, double lambda, double nu) {
  const double z = 2.0 * std::sqrt(lambda * x);
  return std::pow(x / lambda, nu / 2.0) * std::exp(-x - lambda) * boost::math::cyl_bessel_i(-nu, z);
}

inline double chi2_density_bessel(double x, double lambda, double nu) {
  const double z = 2.0 * std::sqrt(lambda * x);
  return std::pow(x / lambda, nu / 2.0) * std::exp(-x - lambda) * boost::math::cyl_bessel_i(nu, z);
}

/// Integral of f over [lo, hi] by adaptive Gauss-Kronrod.
inline double integrate(const std::function<double(double)>& f, double lo, double hi) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13, &err);
}

/// Integral over [lo, infinity).
inline double integrate_to_inf(const std::function<double(double)>& f, double lo) {
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([&](double x) { return f(x + lo); }, 1e-13);
}

/// Integral over (0, hi] tolerant of integrable endpoint singularities.
inline double integrate_singular(const std::function<double(double)>& f, double lo, double hi) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, lo, hi, 1e-12);
}

/// Monte Carlo hitting times of 0 for dX = (bX + c)dt + sqrt(2aX)dW from x0.
/// Works with R = sqrt(X), dR = ((c - a/2)/(2R) + bR/2)dt + sqrt(a/2)dW, and
/// detects crossings between grid points with the Brownian-bridge
/// probability exp(-2 R_n R_{n+1} / (var dt)). Paths that reach `escape`
/// count as never hitting. Returns +infinity for those.
inline std::vector<double> feller_hitting_times(double a, double b, double c, double x0, double dt,
                                                double horizon, double escape, int n_paths,
                                                std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double var = a / 2.0;
  const double sd = std::sqrt(var * dt);
  const double r_escape = std::sqrt(escape);
  std::vector<double> out(static_cast<std::size_t>(n_paths), std::numeric_limits<double>::infinity());
  for (int p = 0; p < n_paths; ++p) {
    double r = std::sqrt(x0);
    double t = 0.0;
    while (t < horizon) {
      const double next = r + ((c - a / 2.0) / (2.0 * r) + b * r / 2.0) * dt + sd * normal(gen);
      if (next <= 0.0) {
        out[static_cast<std::size_t>(p)] = t + dt;
        break;
      }
      if (unif(gen) < std::exp(-2.0 * r * next / (var * dt))) {
        out[static_cast<std::size_t>(p)] = t + 0.5 * dt;
        break;
      }
      r = next;
      t += dt;
      if (r > r_escape) break;
    }
  }
  return out;
}

/// Fourth/fifth-order adaptive integration of ydot = s o y^{I+B} + delta o y.
inline Eigen::VectorXd integrate_growth(const Eigen::MatrixXd& B, const Eigen::VectorXd& s,
                                        const Eigen::VectorXd& delta, Eigen::VectorXd y0, double t) {
  using State = std::vector<double>;
  const auto n = y0.size();
  State y(y0.data(), y0.data() + n);
  auto rhs = [&](const State& x, State& dx, double) {
    Eigen::VectorXd lx(n);
    for (Eigen::Index i = 0; i < n; ++i) lx(i) = std::log(x[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd pow = (B * lx).array().exp().matrix();
    for (Eigen::Index i = 0; i < n; ++i)
      dx[static_cast<std::size_t>(i)] = s(i) * x[static_cast<std::size_t>(i)] * pow(i) + delta(i) * x[static_cast<std::size_t>(i)];
  };
  namespace ode = boost::numeric::odeint;
  ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-12, 1e-12), rhs, y,
                          0.0, t, 1e-3);
  return Eigen::Map<Eigen::VectorXd>(y.data(), n);
}

}  // namespace oracle
