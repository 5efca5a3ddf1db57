#pragma once

namespace superexp {

/// One dated value of a series with its precision weight 1/(1 + 2h^2).
struct Observation {
  double time;
  double value;
  double h;
  double weight;
};

}  // namespace superexp
