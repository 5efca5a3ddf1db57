#pragma once

#include "superexp/densities.hpp"

namespace superexp::diffusion {

using densities::SeriesControl;
using special::SignedLog;

/// dX = (bX + c) dt + sqrt(2aX) dW.
struct FellerParams {
  double a;
  double b;
  double c;
  double nu() const { return c / a - 1.0; }
};

/// Estimation coordinates. gamma = -1/B.
struct PrimaryParams {
  double ln_a;
  double b;
  double nu;
  double gamma;
};

/// dY = (s Y^{1+B} + delta Y) dt + sigma sqrt(Y Y^{1+B}) dW.
struct SuperexpParams {
  double s;
  double B;
  double delta;
  double sigma;
};

/// Absorbing pairs with the Feller density, Reflecting with the noncentral chi-squared.
enum class BoundaryKind { Absorbing, Reflecting };

const char* to_string(BoundaryKind kind);
densities::DensityKind density_kind(BoundaryKind kind);

/// Whether nu lies in the region where the boundary kind is admissible
/// (Reflecting: nu >= -1, Absorbing: nu <= 0).
bool admissible(BoundaryKind kind, double nu);

/// Reflecting with -1 < nu < 0 has more than one solution of the forward
/// equation; outputs flag it.
bool nonunique_solution_regime(BoundaryKind kind, double nu);

/// (1 - e^{-bt}) / b, equal to t at b = 0.
double time_dilation(double t, double b);

SuperexpParams primary_to_superexp(const PrimaryParams& pp);
PrimaryParams superexp_to_primary(const SuperexpParams& sp);
FellerParams feller_from_superexp(const SuperexpParams& sp);
FellerParams feller_from_primary(const PrimaryParams& pp);

/// Location lambda and scaled endpoint x of the transition X_0 -> X_t.
struct TransitionShape {
  densities::ShapeParams shape;
  double x;
  /// ln of dx/dX_t = e^{-bt} / (a t~).
  double log_scale;
};
TransitionShape transition_shape(double x_t, double x_0, double t, const FellerParams& fp);

/// Density of X_t given X_0. The absorbed point mass is not part of it.
double feller_transition(BoundaryKind kind, double x_t, double x_0, double t,
                         const FellerParams& fp, const SeriesControl& control = {});
SignedLog log_feller_transition(BoundaryKind kind, double x_t, double x_0, double t,
                                const FellerParams& fp, const SeriesControl& control = {});

/// Mass absorbed at X = 0 by time t (Absorbing kind).
double absorbed_mass(double x_0, double t, const FellerParams& fp);

/// Density of Y_t given Y_0 through X = Y^{-B}.
double superexp_transition(BoundaryKind kind, double y_t, double y_0, double t,
                           const SuperexpParams& sp, const SeriesControl& control = {});
SignedLog log_superexp_transition(BoundaryKind kind, double y_t, double y_0, double t,
                                  const SuperexpParams& sp, const SeriesControl& control = {});

/// P[Y_t <= y_t | Y_0]. With B > 0 and absorption, the exploded mass sits at
/// +infinity and is excluded; with B < 0 it sits at 0 and is included.
double transition_cdf(BoundaryKind kind, double y_t, double y_0, double t,
                      const SuperexpParams& sp, const SeriesControl& control = {});

/// Level of zero drift, (-delta/s)^{1/B}.
double steady_state(const SuperexpParams& sp);

/// Eventual explosion probability and its complement, each computed directly
/// so that either may be reported when the other rounds to 1.
struct ExplosionOdds {
  double explode;
  double survive;
};
ExplosionOdds explosion_probability(double y_0, const SuperexpParams& sp);

/// P[explosion by t] starting from y_0.
double explosion_cdf(double t, double y_0, const SuperexpParams& sp);

/// Smallest t with P[explosion by t] = q; +infinity when q exceeds the
/// eventual explosion probability.
double explosion_quantile(double q, double y_0, const SuperexpParams& sp);

}  // namespace superexp::diffusion
