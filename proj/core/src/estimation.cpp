#include "superexp/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "superexp/errors.hpp"
#include "superexp/optimize.hpp"
#include "superexp/stats.hpp"

namespace superexp::estimation {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Optimizer coordinates: b and nu are rescaled so that a unit step in each
// coordinate is of comparable consequence.
constexpr double kBScale = 1e-4;
constexpr double kNuScale = 10.0;

std::vector<double> to_theta(const PrimaryParams& pp) {
  return {pp.ln_a, pp.b / kBScale, pp.nu / kNuScale, pp.gamma};
}

PrimaryParams from_theta(const std::vector<double>& th) {
  return {th[0], th[1] * kBScale, th[2] * kNuScale, th[3]};
}

std::array<double, 4> as_array(const PrimaryParams& pp) { return {pp.ln_a, pp.b, pp.nu, pp.gamma}; }

PrimaryParams from_array(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }

// Finite-difference step per primary coordinate.
std::array<double, 4> fd_steps(const PrimaryParams& pp, double rel) {
  static constexpr std::array<double, 4> floor{1.0, 1e-6, 1e-2, 1e-2};
  const auto v = as_array(pp);
  std::array<double, 4> h{};
  for (int i = 0; i < 4; ++i) h[i] = rel * std::max(std::fabs(v[i]), floor[i]);
  return h;
}

struct Candidate {
  PrimaryParams pp;
  double ll;
};

PrimaryParams clip_nu(PrimaryParams pp, BoundaryKind kind) {
  if (kind == BoundaryKind::Absorbing) pp.nu = std::min(pp.nu, 0.0);
  else pp.nu = std::max(pp.nu, -1.0);
  return pp;
}

// Profiles ln a at fixed (b, nu, gamma).
Candidate profile_ln_a(PrimaryParams pp, BoundaryKind kind, const std::vector<Observation>& series,
                       double center, const densities::SeriesControl& control) {
  auto f = [&](double ln_a) {
    PrimaryParams q = pp;
    q.ln_a = ln_a;
    return -weighted_loglik(q, kind, series, control);
  };
  const auto m = optimize::brent_minimize(f, center - 12.0, center + 12.0, 1e-6, 100);
  pp.ln_a = m.x;
  return {pp, -m.f};
}

double sigma2_guess(const NlsResult& nls) {
  return std::isfinite(nls.sigma2) && nls.sigma2 > 0.0 ? nls.sigma2 : 1e-4;
}

Candidate refine(const Candidate& start, BoundaryKind kind, const std::vector<Observation>& series,
                 const densities::SeriesControl& control, int& evals, bool& converged) {
  auto objective = [&](const std::vector<double>& th) {
    return -weighted_loglik(from_theta(th), kind, series, control);
  };
  Candidate best = start;
  converged = false;
  for (int round = 0; round < 6; ++round) {
    const auto r = optimize::nelder_mead(objective, to_theta(best.pp), {0.3, 0.2, 0.2, 0.1},
                                         {1e-8, 1e-10, 20000});
    evals += r.evaluations;
    const double ll = -r.f;
    const bool improved = ll > best.ll + 1e-9;
    if (ll > best.ll) best = {from_theta(r.x), ll};
    if (!improved && r.converged) {
      converged = true;
      break;
    }
  }
  return best;
}

template <class F>
double safe_eval(F&& fn, const PrimaryParams& pp) {
  try {
    return fn(pp);
  } catch (const std::exception&) {
    return kNaN;
  }
}

Estimate estimate(const std::function<double(const PrimaryParams&)>& fn, const PrimaryParams& pp,
                  const Eigen::Matrix4d& cov, bool have_cov) {
  const double v = safe_eval(fn, pp);
  return {v, have_cov && std::isfinite(v) ? delta_method(fn, pp, cov) : kNaN};
}

}  // namespace

double weighted_loglik(const PrimaryParams& pp, BoundaryKind boundary,
                       const std::vector<Observation>& series,
                       const densities::SeriesControl& control) {
  if (!std::isfinite(pp.ln_a) || !std::isfinite(pp.b) || !std::isfinite(pp.nu) ||
      !std::isfinite(pp.gamma) || pp.gamma == 0.0)
    return kNegInf;
  if (!diffusion::admissible(boundary, pp.nu)) return kNegInf;
  if (series.size() < 2) throw DomainError("weighted_loglik: need at least two observations");
  const diffusion::FellerParams fp = diffusion::feller_from_primary(pp);
  if (!(fp.a > 0.0) || !std::isfinite(fp.a)) return kNegInf;
  const double B = -1.0 / pp.gamma;
  const double log_abs_B = std::log(std::fabs(B));
  double total = 0.0;
  try {
    double log_prev = std::log(series[0].value);
    for (std::size_t i = 1; i < series.size(); ++i) {
      const double log_y = std::log(series[i].value);
      const double dt = series[i].time - series[i - 1].time;
      const double x_0 = std::exp(-B * log_prev);
      const double x_t = std::exp(-B * log_y);
      const auto l = diffusion::log_feller_transition(boundary, x_t, x_0, dt, fp, control);
      if (l.sign <= 0 || !std::isfinite(l.log_abs)) return kNegInf;
      total += series[i].weight * (l.log_abs + log_abs_B - (B + 1.0) * log_y);
      log_prev = log_y;
    }
  } catch (const DomainError&) {
    return kNegInf;
  } catch (const ConvergenceError&) {
    return kNegInf;
  }
  return std::isfinite(total) ? total : kNegInf;
}

NlsResult fit_nls(const std::vector<Observation>& series) {
  const std::size_t n = series.size();
  if (n < 4) throw DomainError("fit_nls: need at least four observations");
  std::vector<double> g(n - 1), w(n - 1), y(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = series[i].time - series[i - 1].time;
    g[i - 1] = std::pow(series[i].value / series[i - 1].value, 1.0 / dt) - 1.0;
    w[i - 1] = dt;
    y[i - 1] = series[i - 1].value;
  }
  struct Ls {
    double s, delta, ssr;
    bool ok;
  };
  auto solve = [&](double B) -> Ls {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = std::pow(y[i], B);
      sw += w[i];
      sx += w[i] * x;
      sy += w[i] * g[i];
      sxx += w[i] * x * x;
      sxy += w[i] * x * g[i];
    }
    const double det = sw * sxx - sx * sx;
    if (!(std::fabs(det) > 1e-12 * sw * sxx) || !std::isfinite(det)) return {0, 0, kNaN, false};
    const double s = (sw * sxy - sx * sy) / det;
    const double delta = (sy - s * sx) / sw;
    double ssr = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double e = g[i] - s * std::pow(y[i], B) - delta;
      ssr += w[i] * e * e;
    }
    return {s, delta, ssr, std::isfinite(ssr)};
  };
  constexpr double lo = -1.0, hi = 3.0, step = 0.02;
  double best_B = kNaN, best_ssr = std::numeric_limits<double>::infinity();
  for (int k = 0; lo + k * step <= hi + 1e-12; ++k) {
    const double B = lo + k * step;
    if (std::fabs(B) < 0.01) continue;
    const Ls r = solve(B);
    if (r.ok && r.ssr < best_ssr) {
      best_ssr = r.ssr;
      best_B = B;
    }
  }
  if (!std::isfinite(best_B)) return {kNaN, kNaN, kNaN, kNaN, kNaN, false};
  const bool at_edge = best_B <= lo + 0.5 * step || best_B >= hi - 0.5 * step;
  double left = best_B - step, right = best_B + step;
  if (best_B > 0 && left < 0.01) left = 0.01;
  if (best_B < 0 && right > -0.01) right = -0.01;
  const auto m = optimize::brent_minimize(
      [&](double B) {
        const Ls r = solve(B);
        return r.ok ? r.ssr : std::numeric_limits<double>::infinity();
      },
      left, right, 1e-10, 200);
  const double B = m.f <= best_ssr ? m.x : best_B;
  const Ls r = solve(B);
  double s2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double e = g[i] - r.s * std::pow(y[i], B) - r.delta;
    s2 += e * e * w[i] / std::pow(y[i], B);
  }
  s2 /= static_cast<double>(g.size());
  return {r.s, B, r.delta, s2, r.ssr, !at_edge && r.s > 0.0};
}

PrimaryParams nls_start(const NlsResult& nls, BoundaryKind boundary) {
  if (!std::isfinite(nls.B) || nls.B == 0.0) return clip_nu({-12.0, 0.0, -5.0, -2.0}, boundary);
  const SuperexpParams sp{nls.s, nls.B, nls.delta, std::sqrt(sigma2_guess(nls))};
  return clip_nu(diffusion::superexp_to_primary(sp), boundary);
}

FitResult fit_kind(const std::vector<Observation>& series, BoundaryKind kind,
                   const FitOptions& options) {
  if (series.size() < 5) throw DomainError("fit: need at least five observations");
  const auto& control = options.control;
  NlsResult nls{};
  try {
    nls = fit_nls(series);
  } catch (const DomainError&) {
    nls = {kNaN, kNaN, kNaN, kNaN, kNaN, false};
  }
  const PrimaryParams start = nls_start(nls, kind);
  const double s2 = sigma2_guess(nls);
  auto center_for = [&](double gamma) { return std::log(s2 / (2.0 * gamma * gamma)); };

  std::vector<Candidate> starts;
  auto push = [&](PrimaryParams pp) {
    if (!diffusion::admissible(kind, pp.nu) || pp.gamma == 0.0) return;
    const Candidate c = profile_ln_a(pp, kind, series, center_for(pp.gamma), control);
    if (std::isfinite(c.ll)) starts.push_back(c);
  };
  {
    const double ll = weighted_loglik(start, kind, series, control);
    if (std::isfinite(ll)) starts.push_back({start, ll});
    push(start);
  }
  std::vector<double> gammas, nus;
  if (options.grid_starts) {
    gammas = {-4.0, -3.0, -2.5, -2.0, -1.5, -1.2, -1.0, -0.75, -0.5, -0.25};
    if (kind == BoundaryKind::Absorbing)
      nus = {-200, -150, -100, -70, -50, -35, -25, -18, -12, -8, -5, -3, -2, -1, -0.5, 0};
    else
      nus = {-1, -0.5, 0, 0.5, 1, 2, 4, 8, 16};
  } else {
    gammas = {start.gamma};
    if (kind == BoundaryKind::Absorbing) nus = {-100, -25, -5, -1};
    else nus = {-0.5, 1, 4};
  }
  for (double gm : gammas)
    for (double nu : nus) push({start.ln_a, start.b, nu, gm});
  if (starts.empty()) throw ConvergenceError("fit: no starting point has finite likelihood");

  std::stable_sort(starts.begin(), starts.end(),
                   [](const Candidate& a, const Candidate& b) { return a.ll > b.ll; });
  Candidate best{start, kNegInf};
  bool converged = false;
  int evals = 0;
  const int n_refine = std::max(1, std::min<int>(options.refined_starts, static_cast<int>(starts.size())));
  for (int i = 0; i < n_refine; ++i) {
    bool conv = false;
    const Candidate c = refine(starts[static_cast<std::size_t>(i)], kind, series, control, evals, conv);
    if (c.ll > best.ll) {
      best = c;
      converged = conv;
    }
  }

  FitResult fr{};
  fr.boundary = kind;
  fr.primary = best.pp;
  fr.loglik = best.ll;
  fr.converged = converged && std::isfinite(best.ll);
  fr.covariance = Eigen::Matrix4d::Constant(kNaN);
  fr.se = {kNaN, kNaN, kNaN, kNaN};
  fr.hessian_ok = false;
  fr.covariance_projected = false;
  fr.nonunique_solution_regime = diffusion::nonunique_solution_regime(kind, best.pp.nu);
  fr.evaluations = evals;
  fr.observations = static_cast<int>(series.size()) - 1;
  fr.first_time = series.front().time;
  fr.last_time = series.back().time;
  fr.first_value = series.front().value;
  fr.last_value = series.back().value;
  if (options.standard_errors) {
    const Covariance cov = covariance_at(fr.primary, kind, series, control);
    fr.covariance = cov.matrix;
    fr.hessian_ok = cov.ok;
    fr.covariance_projected = cov.projected;
    if (cov.ok)
      for (int i = 0; i < 4; ++i) fr.se[static_cast<std::size_t>(i)] = std::sqrt(cov.matrix(i, i));
  }
  fr.derived = derive(fr.primary, kind, fr.covariance, fr.hessian_ok, series);
  return fr;
}

FitResult fit_ml(const std::vector<Observation>& series, const FitOptions& options) {
  FitOptions inner = options;
  inner.standard_errors = false;
  std::vector<BoundaryKind> kinds;
  if (options.boundary != BoundaryChoice::Reflecting) kinds.push_back(BoundaryKind::Absorbing);
  if (options.boundary != BoundaryChoice::Absorbing) kinds.push_back(BoundaryKind::Reflecting);
  std::optional<FitResult> best;
  std::optional<double> other;
  for (BoundaryKind k : kinds) {
    FitResult r = fit_kind(series, k, inner);
    if (!best || r.loglik > best->loglik) {
      if (best) other = best->loglik;
      best = std::move(r);
    } else {
      other = r.loglik;
    }
  }
  FitResult fr = std::move(*best);
  fr.other_loglik = other;
  if (options.cev_test) fr.lr = fit_cev(series, fr, options);
  fr.nonunique_solution_regime = diffusion::nonunique_solution_regime(fr.boundary, fr.primary.nu);
  if (options.standard_errors) {
    const Covariance cov = covariance_at(fr.primary, fr.boundary, series, options.control);
    fr.covariance = cov.matrix;
    fr.hessian_ok = cov.ok;
    fr.covariance_projected = cov.projected;
    fr.se = {kNaN, kNaN, kNaN, kNaN};
    if (cov.ok)
      for (int i = 0; i < 4; ++i) fr.se[static_cast<std::size_t>(i)] = std::sqrt(cov.matrix(i, i));
  }
  fr.derived = derive(fr.primary, fr.boundary, fr.covariance, fr.hessian_ok, series);
  return fr;
}

LrTest fit_cev(const std::vector<Observation>& series, FitResult& unrestricted,
               const FitOptions& options) {
  const auto& control = options.control;
  // Restricted coordinates (ln a, b, B): gamma = -1/B and nu = -gamma = 1/B.
  auto expand = [](const std::vector<double>& th) {
    const double B = th[2];
    return PrimaryParams{th[0], th[1] * kBScale, 1.0 / B, -1.0 / B};
  };
  // Constant-growth starting values.
  double sw = 0.0, sg = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double dt = series[i].time - series[i - 1].time;
    sw += dt;
    sg += std::log(series[i].value / series[i - 1].value);
  }
  const double growth = sg / sw;

  std::optional<LrTest> best;
  for (BoundaryKind kind : {BoundaryKind::Absorbing, BoundaryKind::Reflecting}) {
    auto objective = [&](const std::vector<double>& th) {
      if (th[2] == 0.0) return std::numeric_limits<double>::infinity();
      return -weighted_loglik(expand(th), kind, series, control);
    };
    std::vector<Candidate> starts;
    for (double B : {-3.0, -2.0, -1.5, -1.0, -0.5, -0.2, -0.05, -0.01, 0.05, 0.2, 0.4, 0.6, 0.8,
                     1.0, 1.5, 2.5}) {
      const double nu = 1.0 / B;
      if (!diffusion::admissible(kind, nu)) continue;
      double s2 = 0.0;
      for (std::size_t i = 1; i < series.size(); ++i) {
        const double dt = series[i].time - series[i - 1].time;
        const double e = std::log(series[i].value / series[i - 1].value) / dt - growth;
        s2 += e * e * dt / std::pow(series[i - 1].value, B);
      }
      s2 /= static_cast<double>(series.size() - 1);
      const double center = std::log(std::max(s2, 1e-300) * B * B / 2.0);
      const PrimaryParams pp{center, -B * growth, nu, -1.0 / B};
      const Candidate c = profile_ln_a(pp, kind, series, center, control);
      if (std::isfinite(c.ll)) starts.push_back(c);
    }
    if (starts.empty()) continue;
    std::stable_sort(starts.begin(), starts.end(),
                     [](const Candidate& a, const Candidate& b) { return a.ll > b.ll; });
    const int n_refine = std::min<int>(3, static_cast<int>(starts.size()));
    for (int i = 0; i < n_refine; ++i) {
      const PrimaryParams& s = starts[static_cast<std::size_t>(i)].pp;
      std::vector<double> th{s.ln_a, s.b / kBScale, -1.0 / s.gamma};
      double f = -starts[static_cast<std::size_t>(i)].ll;
      bool conv = false;
      for (int round = 0; round < 6; ++round) {
        const auto r = optimize::nelder_mead(objective, th, {0.3, 0.2, 0.05 * std::max(1.0, std::fabs(th[2]))},
                                             {1e-8, 1e-10, 20000});
        const bool improved = r.f < f - 1e-9;
        if (r.f < f) {
          th = r.x;
          f = r.f;
        }
        if (r.converged && !improved) {
          conv = true;
          break;
        }
      }
      const double ll = -f;
      if (!best || ll > best->restricted_loglik)
        best = LrTest{0.0, 1.0, ll, kind, expand(th), conv};
    }
  }
  if (!best) throw ConvergenceError("fit_cev: no admissible restricted starting point");

  // The restricted optimum is a point of the unrestricted space; if it beats
  // the unrestricted fit, continue the unrestricted search from it.
  if (best->restricted_loglik > unrestricted.loglik + 1e-9) {
    int evals = 0;
    bool conv = false;
    const Candidate c = refine({best->restricted, best->restricted_loglik}, best->restricted_boundary,
                               series, control, evals, conv);
    if (c.ll > unrestricted.loglik) {
      if (best->restricted_boundary != unrestricted.boundary) unrestricted.other_loglik = unrestricted.loglik;
      unrestricted.boundary = best->restricted_boundary;
      unrestricted.primary = c.pp;
      unrestricted.loglik = c.ll;
      unrestricted.converged = conv;
      unrestricted.evaluations += evals;
    }
  }
  best->statistic = std::max(0.0, 2.0 * (unrestricted.loglik - best->restricted_loglik));
  best->p_value = stats::chi2_1_upper(best->statistic);
  return *best;
}

Covariance covariance_at(const PrimaryParams& pp, BoundaryKind kind,
                         const std::vector<Observation>& series,
                         const densities::SeriesControl& control) {
  const auto h = fd_steps(pp, 1e-4);
  const auto x0 = as_array(pp);
  auto f = [&](int i, double di, int j, double dj) {
    auto v = x0;
    if (i >= 0) v[static_cast<std::size_t>(i)] += di;
    if (j >= 0) v[static_cast<std::size_t>(j)] += dj;
    return weighted_loglik(from_array(v), kind, series, control);
  };
  const double f0 = f(-1, 0, -1, 0);
  Eigen::Matrix4d H;
  bool finite = std::isfinite(f0);
  for (int i = 0; i < 4 && finite; ++i) {
    const double hi = h[static_cast<std::size_t>(i)];
    H(i, i) = (f(i, hi, -1, 0) - 2.0 * f0 + f(i, -hi, -1, 0)) / (hi * hi);
    for (int j = i + 1; j < 4; ++j) {
      const double hj = h[static_cast<std::size_t>(j)];
      H(i, j) = (f(i, hi, j, hj) - f(i, hi, j, -hj) - f(i, -hi, j, hj) + f(i, -hi, j, -hj)) /
                (4.0 * hi * hj);
      H(j, i) = H(i, j);
    }
    finite = H.row(i).allFinite();
  }
  Covariance out{Eigen::Matrix4d::Constant(kNaN), false, false};
  if (!finite || !H.allFinite()) return out;
  const Eigen::Matrix4d neg = -H;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(neg);
  if (!lu.isInvertible()) return out;
  Eigen::Matrix4d cov = lu.inverse();
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov);
  if (es.eigenvalues().minCoeff() < 0.0) {
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
    cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    out.projected = true;
  }
  out.matrix = cov;
  out.ok = true;
  return out;
}

double delta_method(const std::function<double(const PrimaryParams&)>& fn, const PrimaryParams& pp,
                    const Eigen::Matrix4d& covariance) {
  const auto h = fd_steps(pp, 1e-5);
  const auto x0 = as_array(pp);
  Eigen::Vector4d grad;
  for (int i = 0; i < 4; ++i) {
    auto up = x0, dn = x0;
    up[static_cast<std::size_t>(i)] += h[static_cast<std::size_t>(i)];
    dn[static_cast<std::size_t>(i)] -= h[static_cast<std::size_t>(i)];
    const double fu = safe_eval(fn, from_array(up));
    const double fd = safe_eval(fn, from_array(dn));
    grad(i) = (fu - fd) / (2.0 * h[static_cast<std::size_t>(i)]);
  }
  if (!grad.allFinite() || !covariance.allFinite()) return kNaN;
  const double var = grad.dot(covariance * grad);
  return var >= 0.0 ? std::sqrt(var) : kNaN;
}

double phi_A_from_B(double B) {
  if (!(B > 0.0)) throw DomainError("phi_A_from_B: B must be positive");
  return 2.0 * B - 1.0 / (2.0 * B);
}

Derived derive(const PrimaryParams& pp, BoundaryKind kind, const Eigen::Matrix4d& covariance,
               bool have_covariance, const std::vector<Observation>& series) {
  using diffusion::primary_to_superexp;
  auto est = [&](const std::function<double(const PrimaryParams&)>& fn) {
    return estimate(fn, pp, covariance, have_covariance);
  };
  Derived d{};
  d.s = est([](const PrimaryParams& p) { return primary_to_superexp(p).s; });
  d.B = est([](const PrimaryParams& p) { return primary_to_superexp(p).B; });
  d.delta = est([](const PrimaryParams& p) { return primary_to_superexp(p).delta; });
  d.sigma = est([](const PrimaryParams& p) { return primary_to_superexp(p).sigma; });
  d.phi_A = est([](const PrimaryParams& p) { return phi_A_from_B(primary_to_superexp(p).B); });
  const SuperexpParams sp = primary_to_superexp(pp);
  if (sp.s != 0.0 && -sp.delta / sp.s > 0.0)
    d.steady_state = est([](const PrimaryParams& p) { return diffusion::steady_state(primary_to_superexp(p)); });
  if (kind == BoundaryKind::Absorbing && sp.B > 0.0 && pp.nu < 0.0 && !series.empty()) {
    const Observation first = series.front();
    const Observation last = series.back();
    auto survive = [](double y) {
      return [y](const PrimaryParams& p) {
        return diffusion::explosion_probability(y, primary_to_superexp(p)).survive;
      };
    };
    auto median_year = [](double t, double y) {
      return [t, y](const PrimaryParams& p) {
        return t + diffusion::explosion_quantile(0.5, y, primary_to_superexp(p));
      };
    };
    d.p_no_explosion_first = est(survive(first.value));
    d.p_no_explosion_last = est(survive(last.value));
    d.median_explosion_year_first = est(median_year(first.time, first.value));
    d.median_explosion_year_last = est(median_year(last.time, last.value));
  }
  return d;
}

}  // namespace superexp::estimation
