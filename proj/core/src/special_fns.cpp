#include "superexp/special_fns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "superexp/errors.hpp"
#include "superexp/internal/kahan.hpp"

namespace superexp::special {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_nonpositive_integer(double alpha) { return alpha <= 0.0 && alpha == std::floor(alpha); }

// lgamma for positive arguments without touching the global signgam.
double lgamma_positive(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

// sin(pi x) with exact zeros at the integers.
double sin_pi(double x) {
  double r = std::fmod(x, 2.0);
  if (r < 0) r += 2.0;
  if (r == 0.0 || r == 1.0) return 0.0;
  if (r == 0.5) return 1.0;
  if (r == 1.5) return -1.0;
  return std::sin(std::numbers::pi * r);
}

// Series for P(a, x); valid and fast when x < a + 1.
double gamma_p_series(double a, double x) {
  long double sum = 1.0L / a;
  long double term = sum;
  long double ap = a;
  for (int n = 0; n < 100'000'000; ++n) {
    ap += 1.0L;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17L) {
      const double log_pref = -x + a * std::log(x) - lgamma_positive(a);
      return static_cast<double>(sum * std::exp(static_cast<long double>(log_pref)));
    }
  }
  throw ConvergenceError("regularized_gamma_p: series did not converge");
}

// Continued fraction for Q(a, x) (modified Lentz); valid when x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr long double tiny = 1e-300L;
  long double b = x + 1.0L - a;
  long double c = 1.0L / tiny;
  long double d = 1.0L / b;
  long double h = d;
  for (long n = 1; n < 100'000'000; ++n) {
    const long double an = -static_cast<long double>(n) * (n - a);
    b += 2.0L;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0L / d;
    const long double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0L) < 1e-17L) {
      const double log_pref = -x + a * std::log(x) - lgamma_positive(a);
      return static_cast<double>(h * std::exp(static_cast<long double>(log_pref)));
    }
  }
  throw ConvergenceError("regularized_gamma_q: continued fraction did not converge");
}

// Sum of f(x; alpha + j + 1) for j = 0..n-1.
long double gamma_density_head(double x, double alpha, long n) {
  internal::KahanSum<long double> head;
  for (long j = 0; j < n; ++j) head.add(gamma_density(x, alpha + static_cast<double>(j) + 1.0));
  return head.value();
}

}  // namespace

SignedLogGamma log_gamma(double alpha) {
  if (std::isnan(alpha)) return {alpha, 1};
  if (is_nonpositive_integer(alpha)) throw PoleError("log_gamma: pole at non-positive integer");
  if (alpha > 0.0) return {lgamma_positive(alpha), 1};
  // Reflection: Gamma(a) Gamma(1-a) = pi / sin(pi a).
  const double s = sin_pi(alpha);
  const double log_abs =
      std::log(std::numbers::pi) - std::log(std::fabs(s)) - lgamma_positive(1.0 - alpha);
  return {log_abs, s > 0 ? 1 : -1};
}

double reciprocal_gamma(double alpha) {
  if (is_nonpositive_integer(alpha)) return 0.0;
  const auto lg = log_gamma(alpha);
  return lg.sign * std::exp(-lg.log_abs);
}

SignedLog log_gamma_density(double x, double alpha) {
  if (!(x >= 0.0)) throw DomainError("gamma_density: x must be nonnegative");
  if (is_nonpositive_integer(alpha)) return {-kInf, 0};
  const auto lg = log_gamma(alpha);
  if (x == 0.0) {
    if (alpha == 1.0) return {0.0, 1};
    if (alpha > 1.0) return {-kInf, 0};
    return {kInf, lg.sign};
  }
  return {-x + (alpha - 1.0) * std::log(x) - lg.log_abs, lg.sign};
}

double gamma_density(double x, double alpha) {
  const auto l = log_gamma_density(x, alpha);
  if (l.sign == 0) return 0.0;
  return l.sign * std::exp(l.log_abs);
}

double regularized_gamma_p(double alpha, double x) {
  if (!(alpha > 0.0)) throw DomainError("regularized_gamma_p: alpha must be positive");
  if (!(x >= 0.0)) throw DomainError("regularized_gamma_p: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < alpha + 1.0) return gamma_p_series(alpha, x);
  return 1.0 - gamma_q_fraction(alpha, x);
}

double regularized_gamma_q(double alpha, double x) {
  if (!(alpha > 0.0)) throw DomainError("regularized_gamma_q: alpha must be positive");
  if (!(x >= 0.0)) throw DomainError("regularized_gamma_q: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < alpha + 1.0) return 1.0 - gamma_p_series(alpha, x);
  return gamma_q_fraction(alpha, x);
}

// For negative non-integer alpha the defining sum over m splits into a finite
// head of n = ceil(-alpha) terms with nonpositive shape plus a tail that is an
// ordinary regularized incomplete gamma of shape alpha + n in (0, 1).
double gamma_cdf(double x, double alpha, const SeriesControl& control) {
  if (!(x >= 0.0)) throw DomainError("gamma_cdf: x must be nonnegative");
  if (alpha < 0.0 && alpha == std::floor(alpha))
    throw DomainError("gamma_cdf: alpha must not be a negative integer");
  if (alpha == 0.0) return 1.0;
  if (alpha > 0.0) return regularized_gamma_p(alpha, x);
  const long n = static_cast<long>(std::ceil(-alpha));
  if (n > control.max_terms) throw ConvergenceError("gamma_cdf: term budget exhausted");
  const double shifted = alpha + static_cast<double>(n);
  if (x == 0.0) return gamma_density(0.0, alpha + 1.0);
  return static_cast<double>(gamma_density_head(x, alpha, n) + regularized_gamma_p(shifted, x));
}

double gamma_cdf_complement(double x, double alpha, const SeriesControl& control) {
  if (!(x >= 0.0)) throw DomainError("gamma_cdf_complement: x must be nonnegative");
  if (alpha < 0.0 && alpha == std::floor(alpha))
    throw DomainError("gamma_cdf_complement: alpha must not be a negative integer");
  if (alpha == 0.0) return 0.0;
  if (alpha > 0.0) return regularized_gamma_q(alpha, x);
  const long n = static_cast<long>(std::ceil(-alpha));
  if (n > control.max_terms) throw ConvergenceError("gamma_cdf_complement: term budget exhausted");
  const double shifted = alpha + static_cast<double>(n);
  if (x == 0.0) return 1.0 - gamma_density(0.0, alpha + 1.0);
  return static_cast<double>(regularized_gamma_q(shifted, x) - gamma_density_head(x, alpha, n));
}

double gamma_cdf_inverse(double q, double alpha) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("gamma_cdf_inverse: q must lie in (0, 1)");
  if (!(alpha > 0.0)) throw DomainError("gamma_cdf_inverse: alpha must be positive");
  // Work on whichever tail is smaller so that tiny probabilities keep
  // precision, and solve in u = ln x so that quantiles near 0 (small alpha,
  // tiny q) are reachable. h(u) = +-(ln tail(e^u) - ln target) increases in u.
  const bool upper = q > 0.5;
  const double log_target = upper ? std::log1p(-q) : std::log(q);
  const double sign = upper ? -1.0 : 1.0;
  auto tail = [&](double x) {
    return upper ? regularized_gamma_q(alpha, x) : regularized_gamma_p(alpha, x);
  };
  auto h = [&](double u) {
    const double t = tail(std::exp(u));
    if (t <= 0.0) return upper ? kInf : -kInf;
    return sign * (std::log(t) - log_target);
  };

  // Small-x behaviour P(x) ~ x^alpha / Gamma(alpha + 1) gives the start.
  double u = upper ? std::log(alpha + 1.0) : std::min((std::log(q) + lgamma_positive(alpha + 1.0)) / alpha, std::log(alpha + 1.0));
  double lo = u, hi = u;
  double step = 1.0;
  while (h(lo) > 0.0) {
    lo -= step;
    step *= 2.0;
    if (lo < -1e4) return 0.0;
  }
  step = 1.0;
  while (h(hi) < 0.0) {
    hi += step;
    step *= 2.0;
    if (hi > 710.0) throw ConvergenceError("gamma_cdf_inverse: bracket overflow");
  }
  u = std::clamp(u, lo, hi);
  for (int it = 0; it < 400; ++it) {
    const double r = h(u);
    if (r == 0.0) return std::exp(u);
    if (r > 0.0) hi = u; else lo = u;
    const double x = std::exp(u);
    const double slope = x * gamma_density(x, alpha) / tail(x);
    double next = slope > 0.0 && std::isfinite(slope) ? u - r / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - u) <= 1e-15 || hi - lo <= 1e-15) return std::exp(next);
    u = next;
  }
  return std::exp(u);
}

double polygamma(int order, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("polygamma: alpha must be positive");
  if (order < 0 || order > 3) throw DomainError("polygamma: order must be 0..3");
  // Bernoulli numbers B_2 .. B_16.
  static constexpr long double bern[] = {1.0L / 6,     -1.0L / 30, 1.0L / 42,     -1.0L / 30,
                                         5.0L / 66,    -691.0L / 2730, 7.0L / 6, -3617.0L / 510};
  long double x = alpha;
  long double shift = 0.0L;
  if (order == 0) {
    while (x < 12.0L) {
      shift -= 1.0L / x;
      x += 1.0L;
    }
    long double res = std::log(x) - 0.5L / x;
    const long double x2 = x * x;
    long double xp = x2;
    for (int k = 1; k <= 8; ++k) {
      res -= bern[k - 1] / (2.0L * k * xp);
      xp *= x2;
    }
    return static_cast<double>(res + shift);
  }
  // psi_n(x) = psi_n(x + 1) + (-1)^{n+1} n! / x^{n+1}
  long double nfact = 1.0L;
  for (int i = 2; i <= order; ++i) nfact *= i;
  const long double sgn = (order % 2 == 1) ? 1.0L : -1.0L;
  while (x < 20.0L) {
    shift += sgn * nfact / std::pow(x, order + 1);
    x += 1.0L;
  }
  // Asymptotic series: (n-1)!/x^n + n!/(2x^{n+1}) + sum B_2k (2k+n-1)!/((2k)! x^{2k+n}).
  long double nm1fact = nfact / order;
  long double res = nm1fact / std::pow(x, order) + nfact / (2.0L * std::pow(x, order + 1));
  for (int k = 1; k <= 8; ++k) {
    long double ratio = 1.0L;  // (2k+n-1)!/(2k)!
    for (int j = 2 * k + 1; j <= 2 * k + order - 1; ++j) ratio *= j;
    res += bern[k - 1] * ratio / std::pow(x, 2 * k + order);
  }
  return static_cast<double>(sgn * res + shift);
}

}  // namespace superexp::special
