#pragma once

#include <functional>
#include <vector>

namespace superexp::optimize {

using Objective = std::function<double(const std::vector<double>&)>;

struct NelderMeadOptions {
  /// Simplex diameter, relative to 1 + |x|, below which the search stops.
  double x_tolerance = 1e-8;
  /// Spread of objective values across the simplex below which it stops.
  double f_tolerance = 1e-10;
  int max_evaluations = 20000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f;
  int evaluations;
  bool converged;
};

/// Minimizes `f` from `x0`, with an initial simplex spanned by `steps` along
/// the coordinate axes. Non-finite objective values are treated as +infinity.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const std::vector<double>& steps,
                             const NelderMeadOptions& options = {});

struct ScalarMinimum {
  double x;
  double f;
};

/// Brent's derivative-free minimization of a unimodal function on [lo, hi].
ScalarMinimum brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                             double tolerance = 1e-10, int max_iterations = 200);

}  // namespace superexp::optimize
