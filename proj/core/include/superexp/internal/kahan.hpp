#pragma once

#include <cmath>

namespace superexp::internal {

/// Neumaier's variant of compensated summation.
template <class T>
class KahanSum {
 public:
  void add(T v) {
    const T t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

}  // namespace superexp::internal
