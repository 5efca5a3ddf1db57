#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace superexp::growth {

/// Factor 0 is technology. All vectors share length k+1.
struct EconomyParams {
  std::vector<std::string> names;
  Eigen::VectorXd alpha;
  Eigen::VectorXd s;
  Eigen::VectorXd phi;
  Eigen::VectorXd delta;
  int size() const { return static_cast<int>(alpha.size()); }
};

/// Named economy with initial stocks and integration settings.
struct Scenario {
  std::string name;
  EconomyParams economy;
  Eigen::VectorXd y0;
  double start_year = 0.0;
  double dt = 2e-5;
  double t_max = 5000.0;
};

/// Throws DomainError on mismatched lengths or empty vectors.
void validate(const EconomyParams& ep);

/// Line-oriented text: `name`, `start_year`, `dt`, `t_max` keys and one
/// `factor <name> <alpha> <s> <phi> <delta> <y0>` line per factor. Throws
/// InputError with the line number.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);

/// The bundled four-factor scenario.
Scenario baseline();

/// Appends a factor with no technology elasticity, e.g. a natural resource
/// stock that economic activity erodes.
Scenario with_factor(const Scenario& base, const std::string& name, double alpha, double s,
                     double delta, double y0);

/// iota alpha' + [[phi]] - I, with [[phi]] holding phi in column 0.
Eigen::MatrixXd build_B(const EconomyParams& ep);

/// v^U := exp(U ln v).
Eigen::VectorXd matrix_power(const Eigen::VectorXd& v, const Eigen::MatrixXd& U);

/// Output y^{alpha'}.
double output(const EconomyParams& ep, const Eigen::VectorXd& y);

/// s o y^{I+B} + delta o y.
Eigen::VectorXd drift(const EconomyParams& ep, const Eigen::MatrixXd& B,
                      const Eigen::VectorXd& y);

/// Growth rates s o y^B + delta.
Eigen::VectorXd log_drift(const EconomyParams& ep, const Eigen::MatrixXd& B,
                          const Eigen::VectorXd& y);

enum class Outcome { Horizon, Explosion, Collapse };
const char* to_string(Outcome outcome);

struct SimulateOptions {
  double dt = 2e-5;
  double t_max = 5000.0;
  /// Spacing of recorded points in time. The final state is always recorded.
  double record_interval = 1.0;
  /// Stocks below this count as collapsed.
  double collapse_level = 1e-300;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> y;
  std::vector<double> output;
  Outcome outcome = Outcome::Horizon;
  /// Time of the last finite positive state.
  double end_time = 0.0;
};

/// Fixed-step fourth-order Runge-Kutta on ln y, which is the same system.
/// Overflow ends the run as an explosion. A step that would take a stock below
/// the collapse level is subdivided until the step vanishes, then the run ends
/// as a collapse.
Trajectory simulate(const EconomyParams& ep, const Eigen::VectorXd& y0,
                    const SimulateOptions& options = {});

struct Bifurcation {
  /// Largest start seen to decay and smallest seen to explode.
  double decays_at;
  double explodes_at;
};

/// Bisects a shared starting value for the factors in `shared` (others keep
/// their scenario start) between a decaying `lo` and an exploding `hi`.
/// Throws DomainError when the endpoints do not bracket the outcome.
Bifurcation bifurcation_threshold(const Scenario& sc, const std::vector<int>& shared, double lo,
                                  double hi, const SimulateOptions& options, int iterations = 30);

/// (-delta/s)^{B^{-1}}. Throws DomainError when B is singular or -delta/s
/// has a nonpositive entry.
Eigen::VectorXd stasis_point(const EconomyParams& ep);

/// Left side of the characteristic equation of -delta o B in its reduced form,
/// (alpha / (iota + lambda/-delta))' (iota + phi / (1 + lambda/-delta_0 - phi_0)).
/// Equals 1 at non-degenerate eigenvalues.
double characteristic_lhs(const EconomyParams& ep, double lambda);

struct StabilityReport {
  Eigen::VectorXd stasis;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXcd eigenvalues;
  /// alpha' phi + (1 - phi_0)(alpha' iota - 1); positive implies instability
  /// when every delta is negative.
  double instability_condition;
  /// alpha' (iota + phi / (1 - phi_0)); above 1 iff the determinant is negative.
  double scale_effect;
  /// characteristic_lhs at lambda = 0, equal to scale_effect.
  double characteristic_at_zero;
  double determinant;
  bool sufficient_for_instability;
  bool unstable;
};

StabilityReport stability_at_stasis(const EconomyParams& ep);

struct ClosedFormEigen {
  double lambda_plus = 0.0;
  double lambda_minus = 0.0;
  /// Multiplicity of the eigenvalue -1, k - 1.
  int minus_one_multiplicity = 0;
  Eigen::VectorXd v_plus, v_minus;
  /// Negative discriminant; lambda_plus and lambda_minus hold the real part.
  bool complex_roots = false;
};

/// Eigen-structure of B for the single-output construction.
ClosedFormEigen eigen_closed_form(const EconomyParams& ep);

struct GrowthSpaceReport {
  std::vector<bool> endogenous;
  /// Equilibrium growth rate of every factor (delta for exogenous ones).
  Eigen::VectorXd z_star;
  /// Output growth alpha' z*.
  double output_growth = 0.0;
  /// Output growth from the consolidated scalar formula.
  double output_growth_consolidated = 0.0;
  /// Eigenvalues of (z*_en - delta_en) o B_en,en.
  Eigen::VectorXcd eigenvalues;
  /// Degree of endogenous scale effect; above 1 signals instability.
  double scale_effect = 0.0;
  double determinant_minus_B = 0.0;
  bool unstable = false;
};

/// Steady growth with the rows of exogenous factors zeroed.
GrowthSpaceReport growth_space_analysis(const EconomyParams& ep,
                                        const std::vector<bool>& endogenous);

struct DivergenceReport {
  std::complex<double> lambda0;
  /// lambda0 / alpha' iota: the exponent on Y in the limiting growth law.
  double output_exponent = 0.0;
  /// lambda0 is real and positive.
  bool valid = false;
};

DivergenceReport divergence_exponent(const EconomyParams& ep);

/// Joint explosion path y = m / (t_c - t)^k with k = B^{-1} iota and
/// m = (k/s)^{B^{-1}}. Requires delta = 0 and k/s > 0 elementwise.
struct ClosedFormPath {
  Eigen::VectorXd k;
  Eigen::VectorXd m;
  double t_c;
  Eigen::VectorXd at(double t) const;
};
ClosedFormPath closed_form_solution(const EconomyParams& ep, double t_c);

}  // namespace superexp::growth
