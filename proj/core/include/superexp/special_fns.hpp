#pragma once

#include <cstdint>

namespace superexp::special {

/// Controls for the long power series behind the gamma-mixture densities.
///
/// Sums are started at the dominant term and extended outward until the
/// relative contribution of new terms drops below `relative_tolerance` for
/// three consecutive terms, or `max_terms` is hit. `peak_window` bounds how
/// far from the dominant term a sum may wander before giving up (0 means
/// only `max_terms` applies).
struct SeriesControl {
  double relative_tolerance = 1e-12;
  std::int64_t max_terms = 10'000'000;
  std::int64_t peak_window = 0;
  /// Argument 2*sqrt(lambda*x) above which the Bessel series is replaced by
  /// Hankel's large-argument expansion.
  double hankel_threshold = 700.0;
  /// Order above which the uniform large-order (Debye) expansion is used.
  double large_order_threshold = 1.0e4;
};

/// ln|Gamma(alpha)| together with the sign of Gamma(alpha).
struct SignedLogGamma {
  double log_abs;
  int sign;
};

/// Throws PoleError at non-positive integers.
SignedLogGamma log_gamma(double alpha);

/// 1/Gamma(alpha), zero at the poles.
double reciprocal_gamma(double alpha);

/// Standard gamma density e^{-x} x^{alpha-1} / Gamma(alpha), extended to every
/// real alpha through 1/Gamma (zero at non-positive integers, possibly negative
/// for negative non-integer alpha).
double gamma_density(double x, double alpha);

/// ln|gamma_density| and its sign; sign 0 means the density is exactly zero.
struct SignedLog {
  double log_abs;
  int sign;
};
SignedLog log_gamma_density(double x, double alpha);

/// Regularized lower and upper incomplete gamma for alpha > 0, x >= 0.
double regularized_gamma_p(double alpha, double x);
double regularized_gamma_q(double alpha, double x);

/// Cumulative standard gamma F(x; alpha) = sum_{m>=0} f(x; alpha+m+1).
/// Agrees with the regularized lower incomplete gamma for alpha > 0, equals 1
/// at alpha = 0 and is defined by the series for negative non-integer alpha.
double gamma_cdf(double x, double alpha, const SeriesControl& control = {});

/// 1 - gamma_cdf(x, alpha), computed without cancellation.
double gamma_cdf_complement(double x, double alpha, const SeriesControl& control = {});

/// x such that gamma_cdf(x, alpha) = q, for 0 < q < 1 and alpha > 0.
double gamma_cdf_inverse(double q, double alpha);

/// Digamma (order 0), trigamma (1), and the order-2 and order-3 polygammas.
double polygamma(int order, double alpha);

}  // namespace superexp::special
