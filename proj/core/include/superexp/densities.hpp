#pragma once

#include "superexp/special_fns.hpp"

namespace superexp::densities {

using special::SeriesControl;
using special::SignedLog;

/// NoncentralChiSq is the reflecting-boundary density, Feller the absorbing one.
enum class DensityKind { NoncentralChiSq, Feller };

struct ShapeParams {
  double lambda;
  double nu;
};

/// ln(I_mu(z) e^{-z}) and the sign of I_mu(z), for real order mu and z > 0.
/// Sums the power series outward from its largest term; switches to Hankel's
/// large-argument expansion or the uniform large-order expansion when the
/// thresholds in `control` call for it.
SignedLog log_bessel_i_scaled(double mu, double z, const SeriesControl& control = {});

/// The gamma-mixture density of the given kind at x > 0.
double density(DensityKind kind, double x, ShapeParams p, const SeriesControl& control = {});
SignedLog log_density(DensityKind kind, double x, ShapeParams p,
                      const SeriesControl& control = {});

/// Limit of the density as x -> 0 (may be +-infinity for the chi-squared kind).
double density_at_zero(DensityKind kind, ShapeParams p);

/// Diffuse mass on (0, x]. Excludes any point mass at 0 and is refused outside
/// the proper-distribution region (chi-squared: nu >= -1; Feller: nu <= 0).
double cdf(DensityKind kind, double x, ShapeParams p, const SeriesControl& control = {});

/// Diffuse mass on (x, infinity), computed without cancellation.
double cdf_upper(DensityKind kind, double x, ShapeParams p, const SeriesControl& control = {});

/// Total diffuse mass on (0, infinity). Infinite where the series diverges.
double norm(DensityKind kind, ShapeParams p);

/// Mass absorbed at 0 by the Feller kind: 1 - F(lambda; -nu). Requires nu <= 0.
double boundary_mass(ShapeParams p);

struct Moments {
  double mean;
  double variance;
};

/// Mean and variance of x. For the Feller kind the point mass at 0 is included.
Moments moments(DensityKind kind, ShapeParams p);

struct LogMoments {
  double mean;
  double variance;
  double excess_kurtosis;
};

/// Moments of ln x for x ~ Gamma(alpha, 1).
LogMoments log_moments_gamma(double alpha);

}  // namespace superexp::densities
