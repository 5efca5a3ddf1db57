#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "superexp/diffusion.hpp"
#include "superexp/observation.hpp"

namespace superexp::estimation {

using diffusion::BoundaryKind;
using diffusion::PrimaryParams;
using diffusion::SuperexpParams;

/// Sum over transitions of weight_i * ln(transition density of value_i given
/// value_{i-1}). Returns -infinity outside the boundary-valid region or when a
/// density underflows.
double weighted_loglik(const PrimaryParams& pp, BoundaryKind boundary,
                       const std::vector<Observation>& series,
                       const densities::SeriesControl& control = {});

struct NlsResult {
  double s;
  double B;
  double delta;
  double sigma2;
  /// Time-span-weighted residual sum of squares at the optimum.
  double objective;
  /// False when the profile optimum sits on the edge of the B search range or
  /// the fitted s is not positive (typical of decay-dominated paths).
  bool converged;
};

/// Nonlinear least squares on compound annual growth rates,
/// g_i = s y_{i-1}^B + delta + e_i, weighted by time spans. (s, delta) are
/// concentrated out for each B, leaving a one-dimensional search.
NlsResult fit_nls(const std::vector<Observation>& series);

/// Converts an NLS fit into primary coordinates, with nu clipped into the
/// region admissible for `boundary`.
PrimaryParams nls_start(const NlsResult& nls, BoundaryKind boundary);

enum class BoundaryChoice { Auto, Absorbing, Reflecting };

struct FitOptions {
  BoundaryChoice boundary = BoundaryChoice::Auto;
  /// Grid of (gamma, nu) starting points with ln a profiled at each.
  bool grid_starts = true;
  /// Number of best starting points refined by Nelder-Mead.
  int refined_starts = 4;
  bool cev_test = true;
  bool standard_errors = true;
  densities::SeriesControl control{};
};

struct Estimate {
  double value;
  /// NaN when unavailable.
  double se;
};

/// Quantities derived from the primary parameters, each with a delta-method
/// standard error. Explosion rows are empty unless B > 0 with absorption.
struct Derived {
  Estimate s, B, delta, sigma, phi_A;
  std::optional<Estimate> steady_state;
  std::optional<Estimate> p_no_explosion_first, p_no_explosion_last;
  std::optional<Estimate> median_explosion_year_first, median_explosion_year_last;
};

struct LrTest {
  double statistic;
  double p_value;
  double restricted_loglik;
  BoundaryKind restricted_boundary;
  PrimaryParams restricted;
  bool converged;
};

struct FitResult {
  BoundaryKind boundary;
  PrimaryParams primary;
  Eigen::Matrix4d covariance;
  std::array<double, 4> se;
  double loglik;
  /// Weighted log likelihood of the other boundary kind, when it was fitted.
  std::optional<double> other_loglik;
  bool converged;
  bool hessian_ok;
  bool covariance_projected;
  bool nonunique_solution_regime;
  int evaluations;
  Derived derived;
  std::optional<LrTest> lr;
  /// Number of transitions (observations with a predecessor).
  int observations;
  double first_time, last_time, first_value, last_value;
};

/// Fits one boundary kind.
FitResult fit_kind(const std::vector<Observation>& series, BoundaryKind kind,
                   const FitOptions& options = {});

/// Fits every admissible boundary kind and keeps the higher likelihood; fills
/// covariance, derived rows and (optionally) the CEV likelihood-ratio test.
FitResult fit_ml(const std::vector<Observation>& series, const FitOptions& options = {});

/// Fit under s = 0 (nu = -gamma) over both boundary kinds, tested against the
/// unrestricted fit. May improve `unrestricted` in place if the restricted
/// optimum beats it.
LrTest fit_cev(const std::vector<Observation>& series, FitResult& unrestricted,
               const FitOptions& options = {});

/// -inverse numeric Hessian of the weighted log likelihood.
struct Covariance {
  Eigen::Matrix4d matrix;
  bool ok;
  bool projected;
};
Covariance covariance_at(const PrimaryParams& pp, BoundaryKind kind,
                         const std::vector<Observation>& series,
                         const densities::SeriesControl& control = {});

/// sqrt(J cov J') with J the central-difference gradient of `fn`.
double delta_method(const std::function<double(const PrimaryParams&)>& fn,
                    const PrimaryParams& pp, const Eigen::Matrix4d& covariance);

/// Scale effect in spending on innovation implied by B: 2B - 1/(2B).
double phi_A_from_B(double B);

/// Recomputes the derived rows for a fitted parameter vector.
Derived derive(const PrimaryParams& pp, BoundaryKind kind, const Eigen::Matrix4d& covariance,
               bool have_covariance, const std::vector<Observation>& series);

}  // namespace superexp::estimation
