#include "superexp/growth_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "superexp/errors.hpp"

namespace superexp::dataio::detail {
extern const std::string_view kBaselineScenario;
}  // namespace superexp::dataio::detail

namespace superexp::growth {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double number(std::string_view field, long line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v))
    throw InputError("cannot parse number '" + std::string(field) + "'", line);
  return v;
}

VectorXd append(const VectorXd& v, double x) {
  VectorXd out(v.size() + 1);
  out.head(v.size()) = v;
  out(v.size()) = x;
  return out;
}

MatrixXd inverse_checked(const MatrixXd& m, const char* what) {
  Eigen::FullPivLU<MatrixXd> lu(m);
  if (!lu.isInvertible()) throw DomainError(std::string(what) + ": matrix is singular");
  return lu.inverse();
}

bool all_positive(const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!(v(i) > 0.0)) return false;
  return true;
}

bool any_positive_real(const Eigen::VectorXcd& ev) {
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i).real() > 0.0) return true;
  return false;
}

enum class StepStatus { Ok, Overflow, Underflow };

// Fourth-order Runge-Kutta on z = ln y, where dz/dt = s o exp(B z) + delta.
// Working in logs avoids a logarithm per stage and keeps stocks positive.
class LogStepper {
 public:
  LogStepper(const EconomyParams& ep, const MatrixXd& B, double log_floor)
      : ep_(ep), B_(B), log_floor_(log_floor), n_(B.rows()),
        k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_), next_(n_) {}

  StepStatus step(const VectorXd& z, double h) {
    StepStatus st = slope(z, k1_);
    if (st != StepStatus::Ok) return st;
    tmp_ = z + 0.5 * h * k1_;
    if ((st = slope(tmp_, k2_)) != StepStatus::Ok) return st;
    tmp_ = z + 0.5 * h * k2_;
    if ((st = slope(tmp_, k3_)) != StepStatus::Ok) return st;
    tmp_ = z + h * k3_;
    if ((st = slope(tmp_, k4_)) != StepStatus::Ok) return st;
    next_ = z + (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    return classify(next_);
  }

  const VectorXd& next() const { return next_; }

 private:
  StepStatus classify(const VectorXd& z) const {
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (std::isnan(z(i))) return StepStatus::Overflow;
      if (z(i) > kLogMax) return StepStatus::Overflow;
      if (z(i) < log_floor_) return StepStatus::Underflow;
    }
    return StepStatus::Ok;
  }

  StepStatus slope(const VectorXd& z, VectorXd& k) const {
    for (Eigen::Index i = 0; i < n_; ++i) {
      double e = 0.0;
      for (Eigen::Index j = 0; j < n_; ++j) e += B_(i, j) * z(j);
      const double g = ep_.s(i) * std::exp(e) + ep_.delta(i);
      if (std::isnan(g)) return StepStatus::Overflow;
      if (std::isinf(g)) return g > 0.0 ? StepStatus::Overflow : StepStatus::Underflow;
      k(i) = g;
    }
    return StepStatus::Ok;
  }

  static constexpr double kLogMax = 709.782712893384;
  const EconomyParams& ep_;
  const MatrixXd& B_;
  double log_floor_;
  Eigen::Index n_;
  VectorXd k1_, k2_, k3_, k4_, tmp_, next_;
};

}  // namespace

void validate(const EconomyParams& ep) {
  const auto n = ep.alpha.size();
  if (n == 0) throw DomainError("economy must have at least one factor");
  if (ep.s.size() != n || ep.phi.size() != n || ep.delta.size() != n)
    throw DomainError("economy parameter vectors differ in length");
  if (!ep.names.empty() && static_cast<Eigen::Index>(ep.names.size()) != n)
    throw DomainError("economy factor names differ in length");
}

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  std::vector<double> alpha, s, phi, delta, y0;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto tk = tokens(line);
    if (tk.empty() || tk[0].front() == '#') continue;
    const std::string_view key = tk[0];
    if (key == "factor") {
      if (tk.size() != 7) throw InputError("factor line needs name alpha s phi delta y0", line_no);
      sc.economy.names.emplace_back(tk[1]);
      alpha.push_back(number(tk[2], line_no));
      s.push_back(number(tk[3], line_no));
      phi.push_back(number(tk[4], line_no));
      delta.push_back(number(tk[5], line_no));
      y0.push_back(number(tk[6], line_no));
      if (!(y0.back() > 0.0)) throw InputError("initial stock must be positive", line_no);
      continue;
    }
    if (tk.size() != 2) throw InputError("expected '<key> <value>'", line_no);
    if (key == "name") {
      sc.name = std::string(tk[1]);
    } else if (key == "start_year") {
      sc.start_year = number(tk[1], line_no);
    } else if (key == "dt") {
      sc.dt = number(tk[1], line_no);
      if (!(sc.dt > 0.0)) throw InputError("dt must be positive", line_no);
    } else if (key == "t_max") {
      sc.t_max = number(tk[1], line_no);
      if (!(sc.t_max > 0.0)) throw InputError("t_max must be positive", line_no);
    } else {
      throw InputError("unknown key '" + std::string(key) + "'", line_no);
    }
  }
  if (alpha.empty()) throw InputError("scenario declares no factors");
  const auto to_vec = [](const std::vector<double>& v) {
    return VectorXd(Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  sc.economy.alpha = to_vec(alpha);
  sc.economy.s = to_vec(s);
  sc.economy.phi = to_vec(phi);
  sc.economy.delta = to_vec(delta);
  sc.y0 = to_vec(y0);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  if (path == "baseline") return baseline();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open scenario file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

Scenario baseline() { return parse_scenario(dataio::detail::kBaselineScenario); }

Scenario with_factor(const Scenario& base, const std::string& name, double alpha, double s,
                     double delta, double y0) {
  if (!(y0 > 0.0)) throw DomainError("with_factor: initial stock must be positive");
  Scenario out = base;
  out.economy.names.push_back(name);
  out.economy.alpha = append(base.economy.alpha, alpha);
  out.economy.s = append(base.economy.s, s);
  out.economy.phi = append(base.economy.phi, 0.0);
  out.economy.delta = append(base.economy.delta, delta);
  out.y0 = append(base.y0, y0);
  return out;
}

MatrixXd build_B(const EconomyParams& ep) {
  validate(ep);
  const auto n = ep.alpha.size();
  MatrixXd B = VectorXd::Ones(n) * ep.alpha.transpose();
  B.col(0) += ep.phi;
  B -= MatrixXd::Identity(n, n);
  return B;
}

VectorXd matrix_power(const VectorXd& v, const MatrixXd& U) {
  if (!all_positive(v)) throw DomainError("matrix_power: base must be positive");
  return (U * v.array().log().matrix()).array().exp().matrix();
}

double output(const EconomyParams& ep, const VectorXd& y) {
  return std::exp(ep.alpha.dot(y.array().log().matrix()));
}

VectorXd drift(const EconomyParams& ep, const MatrixXd& B, const VectorXd& y) {
  const MatrixXd IB = B + MatrixXd::Identity(B.rows(), B.cols());
  return ep.s.cwiseProduct(matrix_power(y, IB)) + ep.delta.cwiseProduct(y);
}

VectorXd log_drift(const EconomyParams& ep, const MatrixXd& B, const VectorXd& y) {
  return ep.s.cwiseProduct(matrix_power(y, B)) + ep.delta;
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Explosion: return "explosion";
    case Outcome::Collapse: return "collapse";
    default: return "horizon";
  }
}

Trajectory simulate(const EconomyParams& ep, const VectorXd& y0, const SimulateOptions& options) {
  validate(ep);
  if (y0.size() != ep.alpha.size()) throw DomainError("simulate: y0 has the wrong length");
  if (!all_positive(y0)) throw DomainError("simulate: initial stocks must be positive");
  if (!(options.dt > 0.0) || !(options.t_max > 0.0) || !(options.record_interval > 0.0) ||
      !(options.collapse_level > 0.0))
    throw DomainError("simulate: dt, t_max, record_interval and collapse_level must be positive");

  const MatrixXd B = build_B(ep);
  LogStepper stepper(ep, B, std::log(options.collapse_level));
  Trajectory tr;
  const auto record = [&](double t, const VectorXd& z) {
    tr.t.push_back(t);
    tr.y.push_back(z.array().exp().matrix());
    tr.output.push_back(std::exp(ep.alpha.dot(z)));
  };

  VectorXd z = y0.array().log().matrix();
  double t = 0.0;
  double t_carry = 0.0;  // compensated summation keeps record times on the grid
  record(t, z);
  long next_record = 1;
  double h = options.dt;
  const double min_step = options.dt * 1e-20;
  while (t < options.t_max) {
    const double step = std::min(h, options.t_max - t);
    const StepStatus st = stepper.step(z, step);
    if (st == StepStatus::Overflow) {
      tr.outcome = Outcome::Explosion;
      break;
    }
    if (st == StepStatus::Underflow) {
      // Refine toward the collapse so the final recorded state lies close to it.
      h = step / 2.0;
      if (h < min_step) {
        tr.outcome = Outcome::Collapse;
        break;
      }
      continue;
    }
    z = stepper.next();
    const double inc = step - t_carry;
    const double t_new = t + inc;
    t_carry = (t_new - t) - inc;
    t = t_new;
    if (h < options.dt) h = std::min(options.dt, 2.0 * h);
    const double due = static_cast<double>(next_record) * options.record_interval;
    if (t >= due - 1e-9 * options.dt) {
      record(t, z);
      next_record = static_cast<long>(std::floor(t / options.record_interval + 1e-9)) + 1;
    }
  }
  if (tr.t.back() != t) record(t, z);
  tr.end_time = t;
  return tr;
}

Bifurcation bifurcation_threshold(const Scenario& sc, const std::vector<int>& shared, double lo,
                                  double hi, const SimulateOptions& options, int iterations) {
  if (!(lo > 0.0 && lo < hi)) throw DomainError("bifurcation_threshold: need 0 < lo < hi");
  const auto explodes = [&](double v) {
    VectorXd y0 = sc.y0;
    for (int i : shared) {
      if (i < 0 || i >= y0.size()) throw DomainError("bifurcation_threshold: factor index out of range");
      y0(i) = v;
    }
    SimulateOptions o = options;
    o.record_interval = o.t_max;
    return simulate(sc.economy, y0, o).outcome == Outcome::Explosion;
  };
  if (explodes(lo) || !explodes(hi))
    throw DomainError("bifurcation_threshold: endpoints do not bracket explosion");
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    (explodes(mid) ? hi : lo) = mid;
  }
  return {lo, hi};
}

VectorXd stasis_point(const EconomyParams& ep) {
  const MatrixXd B = build_B(ep);
  const VectorXd ratio = (-ep.delta).cwiseQuotient(ep.s);
  if (!all_positive(ratio)) throw DomainError("stasis_point: -delta/s must be positive");
  Eigen::FullPivLU<MatrixXd> lu(B);
  if (!lu.isInvertible()) throw DomainError("stasis_point: B is singular");
  return lu.solve(ratio.array().log().matrix()).array().exp().matrix();
}

double characteristic_lhs(const EconomyParams& ep, double lambda) {
  validate(ep);
  const double tech = 1.0 + lambda / -ep.delta(0) - ep.phi(0);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < ep.alpha.size(); ++i)
    sum += ep.alpha(i) / (1.0 + lambda / -ep.delta(i)) * (1.0 + ep.phi(i) / tech);
  return sum;
}

StabilityReport stability_at_stasis(const EconomyParams& ep) {
  StabilityReport rep;
  rep.stasis = stasis_point(ep);
  const MatrixXd B = build_B(ep);
  rep.jacobian = -(ep.delta.asDiagonal() * B);
  rep.eigenvalues = Eigen::EigenSolver<MatrixXd>(rep.jacobian, false).eigenvalues();
  const double ai = ep.alpha.sum();
  const double ap = ep.alpha.dot(ep.phi);
  const double phi0 = ep.phi(0);
  rep.instability_condition = ap + (1.0 - phi0) * (ai - 1.0);
  rep.scale_effect = ai + ap / (1.0 - phi0);
  rep.characteristic_at_zero = characteristic_lhs(ep, 0.0);
  rep.determinant = (ep.delta.asDiagonal() * B).determinant();
  rep.sufficient_for_instability = rep.determinant < 0.0;
  rep.unstable = any_positive_real(rep.eigenvalues);
  return rep;
}

ClosedFormEigen eigen_closed_form(const EconomyParams& ep) {
  validate(ep);
  const auto n = ep.alpha.size();
  const double ai = ep.alpha.sum();
  const double phi0 = ep.phi(0);
  const double half = (ai + phi0) / 2.0;
  const double disc = half * half + ep.alpha.dot(ep.phi) - phi0 * ai;
  ClosedFormEigen out;
  out.minus_one_multiplicity = static_cast<int>(n) - 2 > 0 ? static_cast<int>(n) - 2 : 0;
  if (disc < 0.0) {
    out.complex_roots = true;
    out.lambda_plus = out.lambda_minus = half - 1.0;
    return out;
  }
  const double root = std::sqrt(disc);
  out.lambda_plus = half - 1.0 + root;
  out.lambda_minus = half - 1.0 - root;
  out.v_plus = ep.phi + (out.lambda_plus + 1.0 - phi0) * VectorXd::Ones(n);
  out.v_minus = ep.phi + (out.lambda_minus + 1.0 - phi0) * VectorXd::Ones(n);
  return out;
}

GrowthSpaceReport growth_space_analysis(const EconomyParams& ep,
                                        const std::vector<bool>& endogenous) {
  validate(ep);
  const auto n = ep.alpha.size();
  if (static_cast<Eigen::Index>(endogenous.size()) != n)
    throw DomainError("growth_space_analysis: partition has the wrong length");
  std::vector<Eigen::Index> en, ex;
  for (Eigen::Index i = 0; i < n; ++i) (endogenous[static_cast<std::size_t>(i)] ? en : ex).push_back(i);

  GrowthSpaceReport rep;
  rep.endogenous = endogenous;
  rep.z_star = VectorXd::Zero(n);
  for (auto i : ex) rep.z_star(i) = ep.delta(i);
  const MatrixXd B = build_B(ep);
  const auto ne = static_cast<Eigen::Index>(en.size());
  const auto nx = static_cast<Eigen::Index>(ex.size());

  const bool tech_endogenous = endogenous[0];
  const double phi0 = tech_endogenous ? ep.phi(0) : 0.0;
  double alpha_ex_delta_ex = 0.0;
  for (auto i : ex) alpha_ex_delta_ex += ep.alpha(i) * ep.delta(i);

  if (ne == 0) {
    rep.output_growth = ep.alpha.dot(rep.z_star);
    rep.output_growth_consolidated = alpha_ex_delta_ex;
    rep.determinant_minus_B = 1.0;
    return rep;
  }

  MatrixXd Bee(ne, ne), Bex(ne, nx);
  VectorXd delta_ex(nx);
  for (Eigen::Index r = 0; r < ne; ++r) {
    for (Eigen::Index c = 0; c < ne; ++c) Bee(r, c) = B(en[r], en[c]);
    for (Eigen::Index c = 0; c < nx; ++c) Bex(r, c) = B(en[r], ex[c]);
  }
  for (Eigen::Index c = 0; c < nx; ++c) delta_ex(c) = ep.delta(ex[c]);
  const MatrixXd Bee_inv = inverse_checked(Bee, "growth_space_analysis");
  const VectorXd z_en = nx > 0 ? VectorXd(-Bee_inv * Bex * delta_ex) : VectorXd(VectorXd::Zero(ne));
  for (Eigen::Index r = 0; r < ne; ++r) rep.z_star(en[r]) = z_en(r);
  rep.output_growth = ep.alpha.dot(rep.z_star);

  VectorXd gap(ne);
  double alpha_en_iota = 0.0, alpha_en_phi = 0.0;
  for (Eigen::Index r = 0; r < ne; ++r) {
    gap(r) = z_en(r) - ep.delta(en[r]);
    alpha_en_iota += ep.alpha(en[r]);
    alpha_en_phi += ep.alpha(en[r]) * ep.phi(en[r]);
  }
  const MatrixXd jac = gap.asDiagonal() * Bee;
  rep.eigenvalues = Eigen::EigenSolver<MatrixXd>(jac, false).eigenvalues();
  rep.unstable = any_positive_real(rep.eigenvalues);
  rep.determinant_minus_B = (-Bee).determinant();
  if (tech_endogenous) {
    rep.scale_effect = alpha_en_iota + alpha_en_phi / (1.0 - phi0);
    rep.output_growth_consolidated = alpha_ex_delta_ex * (1.0 - phi0) / rep.determinant_minus_B;
  } else {
    rep.scale_effect = alpha_en_iota;
    rep.output_growth_consolidated =
        (alpha_ex_delta_ex + ep.delta(0) * alpha_en_phi) / rep.determinant_minus_B;
  }
  return rep;
}

DivergenceReport divergence_exponent(const EconomyParams& ep) {
  const MatrixXd B = build_B(ep);
  const Eigen::VectorXcd ev = Eigen::EigenSolver<MatrixXd>(B, false).eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < ev.size(); ++i)
    if (ev(i).real() > ev(best).real()) best = i;
  DivergenceReport rep;
  rep.lambda0 = ev(best);
  const double scale = std::max(1.0, std::abs(rep.lambda0));
  rep.valid = std::fabs(rep.lambda0.imag()) <= 1e-12 * scale && rep.lambda0.real() > 0.0;
  rep.output_exponent = rep.lambda0.real() / ep.alpha.sum();
  return rep;
}

VectorXd ClosedFormPath::at(double t) const {
  if (!(t < t_c)) throw DomainError("closed-form path is defined only before t_c");
  const double gap = t_c - t;
  return m.cwiseQuotient((k.array() * std::log(gap)).exp().matrix());
}

ClosedFormPath closed_form_solution(const EconomyParams& ep, double t_c) {
  const MatrixXd B = build_B(ep);
  if (ep.delta.cwiseAbs().maxCoeff() != 0.0)
    throw DomainError("closed_form_solution: requires delta = 0");
  const MatrixXd B_inv = inverse_checked(B, "closed_form_solution");
  const VectorXd k = B_inv * VectorXd::Ones(B.rows());
  const VectorXd base = k.cwiseQuotient(ep.s);
  if (!all_positive(base)) throw DomainError("closed_form_solution: k/s must be positive");
  return {k, matrix_power(base, B_inv), t_c};
}

}  // namespace superexp::growth
