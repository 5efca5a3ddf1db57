#include "superexp/diffusion.hpp"

#include <cmath>
#include <limits>

#include "superexp/errors.hpp"

namespace superexp::diffusion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSmallRate = 1e-8;

void check_kind(BoundaryKind kind, double nu) {
  if (!admissible(kind, nu))
    throw BoundaryError(kind == BoundaryKind::Absorbing
                            ? "absorbing boundary requires nu <= 0"
                            : "reflecting boundary requires nu >= -1");
}

void check_explosive(const SuperexpParams& sp, const FellerParams& fp) {
  if (!(sp.B > 0.0)) throw DomainError("explosion functionals require B > 0");
  if (!(fp.nu() < 0.0)) throw DomainError("explosion functionals require nu < 0");
}

}  // namespace

const char* to_string(BoundaryKind kind) {
  return kind == BoundaryKind::Absorbing ? "absorbing" : "reflecting";
}

densities::DensityKind density_kind(BoundaryKind kind) {
  return kind == BoundaryKind::Absorbing ? densities::DensityKind::Feller
                                         : densities::DensityKind::NoncentralChiSq;
}

bool admissible(BoundaryKind kind, double nu) {
  return kind == BoundaryKind::Absorbing ? nu <= 0.0 : nu >= -1.0;
}

bool nonunique_solution_regime(BoundaryKind kind, double nu) {
  return kind == BoundaryKind::Reflecting && nu > -1.0 && nu < 0.0;
}

double time_dilation(double t, double b) {
  const double bt = b * t;
  if (std::fabs(bt) < kSmallRate) return t * (1.0 - bt / 2.0 + bt * bt / 6.0);
  return -std::expm1(-bt) / b;
}

SuperexpParams primary_to_superexp(const PrimaryParams& pp) {
  if (pp.gamma == 0.0) throw DomainError("gamma must be nonzero");
  const double a = std::exp(pp.ln_a);
  const double g = pp.gamma;
  return {a * g * g * (1.0 + pp.nu / g), -1.0 / g, pp.b * g, std::fabs(g) * std::sqrt(2.0 * a)};
}

PrimaryParams superexp_to_primary(const SuperexpParams& sp) {
  const FellerParams fp = feller_from_superexp(sp);
  return {std::log(fp.a), fp.b, fp.nu(), -1.0 / sp.B};
}

FellerParams feller_from_superexp(const SuperexpParams& sp) {
  if (sp.B == 0.0) throw DomainError("B must be nonzero");
  const double s2 = sp.sigma * sp.sigma;
  return {0.5 * s2 * sp.B * sp.B, -sp.B * sp.delta,
          -sp.B * sp.s + 0.5 * s2 * sp.B * (sp.B + 1.0)};
}

FellerParams feller_from_primary(const PrimaryParams& pp) {
  const double a = std::exp(pp.ln_a);
  return {a, pp.b, a * (pp.nu + 1.0)};
}

TransitionShape transition_shape(double x_t, double x_0, double t, const FellerParams& fp) {
  if (!(x_0 > 0.0)) throw DomainError("transition: initial value must be positive");
  if (!(t > 0.0)) throw DomainError("transition: elapsed time must be positive");
  if (!(fp.a > 0.0)) throw DomainError("transition: a must be positive");
  const double at = fp.a * time_dilation(t, fp.b);
  const double log_scale = -fp.b * t - std::log(at);
  return {{x_0 / at, fp.nu()}, std::exp(log_scale) * x_t, log_scale};
}

SignedLog log_feller_transition(BoundaryKind kind, double x_t, double x_0, double t,
                                const FellerParams& fp, const SeriesControl& control) {
  check_kind(kind, fp.nu());
  if (!(x_t > 0.0)) throw DomainError("transition: endpoint must be positive");
  const TransitionShape ts = transition_shape(x_t, x_0, t, fp);
  SignedLog l = densities::log_density(density_kind(kind), ts.x, ts.shape, control);
  l.log_abs += ts.log_scale;
  return l;
}

double feller_transition(BoundaryKind kind, double x_t, double x_0, double t,
                         const FellerParams& fp, const SeriesControl& control) {
  const SignedLog l = log_feller_transition(kind, x_t, x_0, t, fp, control);
  return l.sign == 0 ? 0.0 : l.sign * std::exp(l.log_abs);
}

double absorbed_mass(double x_0, double t, const FellerParams& fp) {
  const TransitionShape ts = transition_shape(x_0, x_0, t, fp);
  return densities::boundary_mass(ts.shape);
}

SignedLog log_superexp_transition(BoundaryKind kind, double y_t, double y_0, double t,
                                  const SuperexpParams& sp, const SeriesControl& control) {
  if (!(y_t > 0.0) || !(y_0 > 0.0)) throw DomainError("transition: values must be positive");
  const FellerParams fp = feller_from_superexp(sp);
  const double log_y = std::log(y_t);
  const double x_t = std::exp(-sp.B * log_y);
  const double x_0 = std::exp(-sp.B * std::log(y_0));
  SignedLog l = log_feller_transition(kind, x_t, x_0, t, fp, control);
  l.log_abs += std::log(std::fabs(sp.B)) - (sp.B + 1.0) * log_y;
  return l;
}

double superexp_transition(BoundaryKind kind, double y_t, double y_0, double t,
                           const SuperexpParams& sp, const SeriesControl& control) {
  const SignedLog l = log_superexp_transition(kind, y_t, y_0, t, sp, control);
  return l.sign == 0 ? 0.0 : l.sign * std::exp(l.log_abs);
}

double transition_cdf(BoundaryKind kind, double y_t, double y_0, double t,
                      const SuperexpParams& sp, const SeriesControl& control) {
  if (!(y_0 > 0.0)) throw DomainError("transition_cdf: initial value must be positive");
  const FellerParams fp = feller_from_superexp(sp);
  check_kind(kind, fp.nu());
  if (!(y_t > 0.0)) return (sp.B < 0.0 && kind == BoundaryKind::Absorbing)
                               ? absorbed_mass(std::pow(y_0, -sp.B), t, fp)
                               : 0.0;
  const double x_0 = std::pow(y_0, -sp.B);
  const double x_t = std::pow(y_t, -sp.B);
  const TransitionShape ts = transition_shape(x_t, x_0, t, fp);
  const auto dk = density_kind(kind);
  if (sp.B > 0.0) {
    if (x_t == 0.0) return densities::norm(dk, ts.shape);
    return densities::cdf_upper(dk, ts.x, ts.shape, control);
  }
  if (std::isinf(x_t)) return 1.0;
  double p = densities::cdf(dk, ts.x, ts.shape, control);
  if (kind == BoundaryKind::Absorbing) p += densities::boundary_mass(ts.shape);
  return p;
}

double steady_state(const SuperexpParams& sp) {
  if (sp.B == 0.0) throw DomainError("steady_state: B must be nonzero");
  const double ratio = -sp.delta / sp.s;
  if (!(ratio > 0.0)) throw DomainError("steady_state: requires delta/s < 0");
  return std::pow(ratio, 1.0 / sp.B);
}

ExplosionOdds explosion_probability(double y_0, const SuperexpParams& sp) {
  if (!(y_0 > 0.0)) throw DomainError("explosion_probability: y_0 must be positive");
  const FellerParams fp = feller_from_superexp(sp);
  check_explosive(sp, fp);
  if (fp.b <= 0.0) return {1.0, 0.0};
  const double lambda_inf = std::pow(y_0, -sp.B) * fp.b / fp.a;
  const double alpha = -fp.nu();
  return {special::gamma_cdf_complement(lambda_inf, alpha), special::gamma_cdf(lambda_inf, alpha)};
}

double explosion_cdf(double t, double y_0, const SuperexpParams& sp) {
  if (!(y_0 > 0.0)) throw DomainError("explosion_cdf: y_0 must be positive");
  const FellerParams fp = feller_from_superexp(sp);
  check_explosive(sp, fp);
  if (t <= 0.0) return 0.0;
  if (std::isinf(t)) return explosion_probability(y_0, sp).explode;
  return absorbed_mass(std::pow(y_0, -sp.B), t, fp);
}

double explosion_quantile(double q, double y_0, const SuperexpParams& sp) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("explosion_quantile: q must lie in (0, 1)");
  if (!(y_0 > 0.0)) throw DomainError("explosion_quantile: y_0 must be positive");
  const FellerParams fp = feller_from_superexp(sp);
  check_explosive(sp, fp);
  // P[T <= t] = 1 - F(lambda(t); -nu), and lambda(t) = X_0 / (a t~) falls
  // monotonically, so solve lambda(t) = F^{-1}(1 - q; -nu) for t~ then t.
  const double level = special::gamma_cdf_inverse(1.0 - q, -fp.nu());
  const double dilated = std::pow(y_0, -sp.B) / (fp.a * level);
  const double bt = fp.b * dilated;
  if (bt >= 1.0) return kInf;
  if (std::fabs(bt) < kSmallRate) return dilated * (1.0 + bt / 2.0 + bt * bt / 3.0);
  return -std::log1p(-bt) / fp.b;
}

}  // namespace superexp::diffusion
