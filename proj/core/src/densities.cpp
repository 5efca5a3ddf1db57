#include "superexp/densities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "superexp/errors.hpp"
#include "superexp/internal/kahan.hpp"

namespace superexp::densities {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_integer(double v) { return v == std::floor(v); }

// Hankel's expansion of I_mu(z) e^{-z} sqrt(2 pi z). Returns false when the
// asymptotic series stops shrinking before reaching the tolerance.
bool hankel_scaled(double mu, double z, double tol, double& log_out) {
  const long double four_mu2 = 4.0L * mu * mu;
  long double term = 1.0L;
  internal::KahanSum<long double> sum;
  sum.add(term);
  long double prev = 1.0L;
  for (int k = 1; k < 500; ++k) {
    const long double odd = 2.0L * k - 1.0L;
    term *= -(four_mu2 - odd * odd) / (8.0L * k * z);
    const long double mag = std::fabs(term);
    if (mag > prev) return false;
    sum.add(term);
    if (mag <= tol * std::fabs(sum.value())) {
      const long double s = sum.value();
      if (s <= 0) return false;
      log_out = static_cast<double>(std::log(s)) - 0.5 * std::log(2.0 * std::numbers::pi * z);
      return true;
    }
    prev = mag;
  }
  return false;
}

// Uniform large-order expansion of I_mu(mu t) e^{-mu t}, mu > 0.
double debye_scaled(double mu, double z) {
  const long double nu = mu;
  const long double t = z / nu;
  const long double root = std::sqrt(1.0L + t * t);
  const long double p = 1.0L / root;
  // nu * eta - z written to avoid cancellation when z >> nu.
  const long double exponent = nu / (root + t) + nu * std::log(t / (1.0L + root));
  const long double p2 = p * p;
  const long double u1 = p * (3.0L - 5.0L * p2) / 24.0L;
  const long double u2 = p2 * (81.0L - 462.0L * p2 + 385.0L * p2 * p2) / 1152.0L;
  const long double u3 =
      p * p2 * (30375.0L - 369603.0L * p2 + 765765.0L * p2 * p2 - 425425.0L * p2 * p2 * p2) /
      414720.0L;
  const long double p4 = p2 * p2;
  const long double u4 = p4 *
                         (4465125.0L - 94121676.0L * p2 + 349922430.0L * p4 -
                          446185740.0L * p4 * p2 + 185910725.0L * p4 * p4) /
                         39813120.0L;
  const long double series = 1.0L + u1 / nu + u2 / (nu * nu) + u3 / (nu * nu * nu) +
                             u4 / (nu * nu * nu * nu);
  return static_cast<double>(exponent - 0.5L * std::log(2.0L * std::numbers::pi_v<long double> * nu) -
                             0.25L * std::log(1.0L + t * t) + std::log(series));
}

// Power series sum_m (z/2)^{2m+mu} / (m! Gamma(m+mu+1)), summed outward from its
// largest term in units of that term.
SignedLog bessel_series_scaled(double mu, double z, const SeriesControl& control) {
  const double log_half_z = std::log(0.5 * z);
  const long double q = 0.25L * static_cast<long double>(z) * z;
  // Terms with m + mu + 1 < 0 carry alternating signs; they are few and are
  // handled one by one. The remaining tail is positive and unimodal.
  long head = 0;
  if (mu < -1.0) head = static_cast<long>(std::ceil(-mu - 1.0));
  if (head > control.max_terms) throw ConvergenceError("bessel series: term budget exhausted");

  auto log_term = [&](long m) {
    const auto lg = special::log_gamma(static_cast<double>(m) + mu + 1.0);
    return SignedLog{(2.0 * m + mu) * log_half_z - std::lgamma(static_cast<double>(m) + 1.0) -
                         lg.log_abs,
                     lg.sign};
  };

  const double m_star = 0.5 * (-(mu + 2.0) + std::sqrt(mu * mu + z * z));
  long peak = std::max<long>(head, static_cast<long>(std::llround(std::max(0.0, m_star))));
  // m + mu + 1 may be exactly zero at `head` when mu is a negative integer;
  // callers map those orders to |mu| so it does not occur here.
  const SignedLog lp = log_term(peak);
  const long double tol = control.relative_tolerance;
  const long window = control.peak_window > 0 ? control.peak_window : control.max_terms;

  internal::KahanSum<long double> sum;
  sum.add(1.0L);
  long used = 1;
  // Upward.
  {
    long double t = 1.0L;
    int small = 0;
    for (long m = peak; m - peak < window; ++m) {
      t *= q / ((m + 1.0L) * (m + 1.0L + mu));
      sum.add(t);
      if (++used > control.max_terms) throw ConvergenceError("bessel series: term budget exhausted");
      small = (t <= tol * sum.value()) ? small + 1 : 0;
      if (small >= 3 || t == 0.0L) break;
    }
  }
  // Downward to the start of the positive tail.
  {
    long double t = 1.0L;
    int small = 0;
    for (long m = peak; m > head && peak - m < window; --m) {
      t *= (static_cast<long double>(m) * (m + mu)) / q;
      sum.add(t);
      if (++used > control.max_terms) throw ConvergenceError("bessel series: term budget exhausted");
      small = (t <= tol * sum.value()) ? small + 1 : 0;
      if (small >= 3 || t == 0.0L) break;
    }
  }
  long double total = sum.value();
  if (head > 0) {
    internal::KahanSum<long double> signed_head;
    for (long m = 0; m < head; ++m) {
      const SignedLog lt = log_term(m);
      signed_head.add(lt.sign * std::exp(static_cast<long double>(lt.log_abs - lp.log_abs)));
    }
    total += signed_head.value();
  }
  if (total == 0.0L) return {-kInf, 0};
  const int sign = total > 0 ? 1 : -1;
  return {lp.log_abs + static_cast<double>(std::log(std::fabs(total))) - z, sign};
}

void check_shape(double x, ShapeParams p) {
  if (!(x > 0.0)) throw DomainError("density: x must be positive");
  if (!(p.lambda > 0.0)) throw DomainError("density: lambda must be positive");
}

double order_of(DensityKind kind, double nu) {
  return kind == DensityKind::NoncentralChiSq ? nu : -nu;
}

// Mixing weight of term m and the shape of its gamma component.
struct Mixture {
  double log_weight_offset;  // weight_m = lambda^{m+o} e^{-lambda} / Gamma(m+o+1)
  double shape_offset;       // component shape = m + s
  long first;                // first term with positive component shape
};

Mixture mixture_of(DensityKind kind, double nu) {
  if (kind == DensityKind::NoncentralChiSq) {
    // Poisson(lambda) weights, component shape m + nu + 1.
    long first = 0;
    if (nu + 1.0 <= 0.0) first = static_cast<long>(std::floor(-(nu + 1.0))) + 1;
    return {0.0, nu + 1.0, first};
  }
  // Weights f(lambda; m - nu + 1), component shape m + 1.
  return {-nu, 1.0, 0};
}

struct TailPair {
  long double lower;
  long double upper;
};

// Both tails of the regularized incomplete gamma; the smaller one is computed
// directly and the other by complement.
TailPair gamma_tails(double a, double x) {
  const double p = special::regularized_gamma_p(a, x);
  if (p < 0.5) return {p, 1.0L - p};
  const double q = special::regularized_gamma_q(a, x);
  return {1.0L - q, q};
}

// Incomplete gamma pair P(a, x), Q(a, x) and f(x; a + 1), stepped along
// a -> a +- 1 with P(a + 1) = P(a) - f(x; a + 1) and Q(a + 1) = Q(a) +
// f(x; a + 1). The exact values are recomputed every kReanchor steps.
class GammaTailWalker {
 public:
  GammaTailWalker(double a, double x) : x_(x) { anchor(a); }

  void up() {
    if (++steps_ % kReanchor == 0) return anchor(a_ + 1.0);
    lower_ -= g_;
    upper_ += g_;
    g_ *= x_ / (a_ + 1.0);
    a_ += 1.0;
  }

  void down() {
    if (++steps_ % kReanchor == 0) return anchor(a_ - 1.0);
    g_ *= a_ / x_;
    a_ -= 1.0;
    lower_ += g_;
    upper_ -= g_;
  }

  long double lower() const { return std::clamp(lower_, 0.0L, 1.0L); }
  long double upper() const { return std::clamp(upper_, 0.0L, 1.0L); }

 private:
  static constexpr long kReanchor = 1024;

  void anchor(double a) {
    a_ = a;
    const TailPair t = gamma_tails(a, x_);
    lower_ = t.lower;
    upper_ = t.upper;
    const SignedLog lg = special::log_gamma_density(x_, a + 1.0);
    g_ = lg.sign == 0 ? 0.0L : lg.sign * std::exp(static_cast<long double>(lg.log_abs));
  }

  double x_;
  double a_ = 0.0;
  long steps_ = 0;
  long double lower_ = 0.0L, upper_ = 0.0L, g_ = 0.0L;
};

// ln(lambda^k e^{-lambda} / Gamma(k + 1)) without the cancellation between
// k ln lambda, lambda and ln Gamma(k + 1) that ruins the direct form for
// large k: the saddle-point split -stirlerr(k) - ln(2 pi k)/2 - bd0(k, lambda).
double log_poisson_weight(double k, double lam) {
  if (k < 16.0) return k * std::log(lam) - lam - std::lgamma(k + 1.0);
  const double k2 = k * k;
  const double stirlerr = (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * k2)) / k2) / k;
  double bd0;
  if (std::fabs(k - lam) < 0.1 * (k + lam)) {
    const double v = (k - lam) / (k + lam);
    double sum = (k - lam) * v;
    double ej = 2.0 * k * v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v * v;
      const double next = sum + ej / (2 * j + 1);
      if (next == sum) break;
      sum = next;
    }
    bd0 = sum;
  } else {
    bd0 = k * std::log(k / lam) + lam - k;
  }
  return -stirlerr - 0.5 * std::log(2.0 * std::numbers::pi * k) - bd0;
}

TailPair mixture_tails(DensityKind kind, double x, ShapeParams p, const SeriesControl& control) {
  const Mixture mix = mixture_of(kind, p.nu);
  const double lam = p.lambda;
  const double o = mix.log_weight_offset;
  auto log_w = [&](long m) { return log_poisson_weight(static_cast<double>(m) + o, lam); };
  const long peak = std::max<long>(mix.first, static_cast<long>(std::floor(std::max(0.0, lam - o))));
  const long double w_peak = std::exp(static_cast<long double>(log_w(peak)));
  const long double tol = control.relative_tolerance;
  internal::KahanSum<long double> lower, upper;
  auto add = [&](const GammaTailWalker& g, long double w) {
    lower.add(w * g.lower());
    upper.add(w * g.upper());
  };
  const double peak_shape = static_cast<double>(peak) + mix.shape_offset;
  GammaTailWalker walker(peak_shape, x);
  add(walker, w_peak);
  long used = 1;
  auto done = [&](long double w, int& small) {
    const long double ref = std::min(lower.value(), upper.value());
    small = (w <= tol * ref || w < 1e-600L) ? small + 1 : 0;
    return small >= 3;
  };
  {
    long double w = w_peak;
    int small = 0;
    for (long m = peak + 1;; ++m) {
      w *= lam / (m + o);
      walker.up();
      add(walker, w);
      if (++used > control.max_terms) throw ConvergenceError("cdf: term budget exhausted");
      if (done(w, small)) break;
    }
  }
  {
    GammaTailWalker down(peak_shape, x);
    long double w = w_peak;
    int small = 0;
    for (long m = peak - 1; m >= mix.first; --m) {
      w *= (m + 1 + o) / lam;
      down.down();
      add(down, w);
      if (++used > control.max_terms) throw ConvergenceError("cdf: term budget exhausted");
      if (done(w, small)) break;
    }
  }
  return {lower.value(), upper.value()};
}

void check_proper(DensityKind kind, double nu) {
  if (kind == DensityKind::NoncentralChiSq && nu < -1.0)
    throw DomainError("cdf: chi-squared kind requires nu >= -1");
  if (kind == DensityKind::Feller && nu > 0.0)
    throw DomainError("cdf: Feller kind requires nu <= 0");
}

}  // namespace

SignedLog log_bessel_i_scaled(double mu, double z, const SeriesControl& control) {
  if (!(z > 0.0)) throw DomainError("bessel: argument must be positive");
  if (mu < 0.0 && is_integer(mu)) mu = -mu;
  if (mu >= control.large_order_threshold) return {debye_scaled(mu, z), 1};
  if (z >= control.hankel_threshold && mu * mu < z) {
    double out = 0.0;
    if (hankel_scaled(mu, z, control.relative_tolerance * 1e-2, out)) return {out, 1};
  }
  return bessel_series_scaled(mu, z, control);
}

SignedLog log_density(DensityKind kind, double x, ShapeParams p, const SeriesControl& control) {
  check_shape(x, p);
  const double z = 2.0 * std::sqrt(x * p.lambda);
  const SignedLog bes = log_bessel_i_scaled(order_of(kind, p.nu), z, control);
  if (bes.sign == 0) return bes;
  const double gap = std::sqrt(x) - std::sqrt(p.lambda);
  return {-gap * gap + 0.5 * p.nu * (std::log(x) - std::log(p.lambda)) + bes.log_abs, bes.sign};
}

double density(DensityKind kind, double x, ShapeParams p, const SeriesControl& control) {
  const SignedLog l = log_density(kind, x, p, control);
  if (l.sign == 0) return 0.0;
  return l.sign * std::exp(l.log_abs);
}

double density_at_zero(DensityKind kind, ShapeParams p) {
  if (!(p.lambda > 0.0)) throw DomainError("density_at_zero: lambda must be positive");
  const double at_zero = special::gamma_density(p.lambda, 1.0 - p.nu);
  if (kind == DensityKind::Feller) return at_zero;
  if (p.nu > 0.0) return 0.0;
  if (is_integer(p.nu)) return at_zero;
  return special::log_gamma(p.nu + 1.0).sign * kInf;
}

double cdf(DensityKind kind, double x, ShapeParams p, const SeriesControl& control) {
  check_shape(x, p);
  check_proper(kind, p.nu);
  if (std::isinf(x)) return norm(kind, p);
  return static_cast<double>(mixture_tails(kind, x, p, control).lower);
}

double cdf_upper(DensityKind kind, double x, ShapeParams p, const SeriesControl& control) {
  check_shape(x, p);
  check_proper(kind, p.nu);
  if (std::isinf(x)) return 0.0;
  return static_cast<double>(mixture_tails(kind, x, p, control).upper);
}

double norm(DensityKind kind, ShapeParams p) {
  if (!(p.lambda > 0.0)) throw DomainError("norm: lambda must be positive");
  const double nu = p.nu;
  if (kind == DensityKind::NoncentralChiSq) {
    if (nu > -1.0) return 1.0;
    if (is_integer(nu)) return special::gamma_cdf(p.lambda, -nu);
    return special::log_gamma(nu + 1.0).sign * kInf;
  }
  if (nu >= 0.0 && is_integer(nu)) return 1.0;
  // Sum_m f(lambda; m - nu + 1), which is F(lambda; -nu) by definition.
  return special::gamma_cdf(p.lambda, -nu);
}

double boundary_mass(ShapeParams p) {
  if (!(p.lambda > 0.0)) throw DomainError("boundary_mass: lambda must be positive");
  if (p.nu > 0.0) throw DomainError("boundary_mass: requires nu <= 0");
  return special::gamma_cdf_complement(p.lambda, -p.nu);
}

Moments moments(DensityKind kind, ShapeParams p) {
  if (!(p.lambda > 0.0)) throw DomainError("moments: lambda must be positive");
  const double lam = p.lambda;
  const double nu = p.nu;
  if (kind == DensityKind::NoncentralChiSq) {
    if (!(nu > -1.0)) throw DomainError("moments: chi-squared kind requires nu > -1");
    return {lam + nu + 1.0, 2.0 * lam + nu + 1.0};
  }
  if (nu > 0.0) throw DomainError("moments: Feller kind requires nu <= 0");
  const double f = special::gamma_density(lam, -nu);
  const double F = special::gamma_cdf(lam, -nu);
  const double mean = lam * f + (lam + nu + 1.0) * F;
  const double second =
      lam * (lam + nu + 3.0) * f + (lam + (lam + nu + 1.0) * (lam + nu + 2.0)) * F;
  return {mean, second - mean * mean};
}

LogMoments log_moments_gamma(double alpha) {
  if (!(alpha > 0.0)) throw DomainError("log_moments_gamma: alpha must be positive");
  const double t = special::polygamma(1, alpha);
  return {special::polygamma(0, alpha), t, special::polygamma(3, alpha) / (t * t)};
}

}  // namespace superexp::densities
