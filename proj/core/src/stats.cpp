#include "superexp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "superexp/errors.hpp"
#include "superexp/random.hpp"

namespace superexp {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

void CounterRng::refill() {
  std::array<std::uint32_t, 4> c = counter_;
  std::array<std::uint32_t, 2> k = key_;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  block_ = c;
  index_ = 0;
  if (++counter_[0] == 0) ++counter_[1];
}

std::uint32_t CounterRng::next_u32() {
  if (index_ >= 4) refill();
  return block_[index_++];
}

double CounterRng::uniform() {
  const std::uint64_t hi = next_u32() >> 5;  // 27 bits
  const std::uint64_t lo = next_u32() >> 6;  // 26 bits
  const double u53 = static_cast<double>((hi << 26) | lo);
  return (u53 + 0.5) / 9007199254740992.0;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

namespace stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double chi2_1_upper(double x) {
  if (!(x >= 0.0)) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

double ks_statistic_uniform(std::vector<double> sample) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double u = sample[i];
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

double ks_cdf(int n, double d) {
  if (n <= 0) throw DomainError("ks_cdf: n must be positive");
  if (d <= 0.0) return 0.0;
  if (d >= 1.0) return 1.0;
  const double nd = n * d;
  const int k = static_cast<int>(nd) + 1;
  const int m = 2 * k - 1;
  const double h = k - nd;
  using Mat = std::vector<double>;
  Mat H(static_cast<std::size_t>(m) * m);
  auto at = [m](Mat& a, int i, int j) -> double& { return a[static_cast<std::size_t>(i) * m + j]; };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) at(H, i, j) = (i - j + 1 < 0) ? 0.0 : 1.0;
  for (int i = 0; i < m; ++i) {
    at(H, i, 0) -= std::pow(h, i + 1);
    at(H, m - 1, i) -= std::pow(h, m - i);
  }
  at(H, m - 1, 0) += (2.0 * h - 1.0 > 0.0) ? std::pow(2.0 * h - 1.0, m) : 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i - j + 1 > 0)
        for (int g = 1; g <= i - j + 1; ++g) at(H, i, j) /= g;

  auto multiply = [&](const Mat& a, const Mat& b, int ea, int eb, int& eout) {
    Mat c(a.size(), 0.0);
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < m; ++l) {
        const double ail = a[static_cast<std::size_t>(i) * m + l];
        if (ail == 0.0) continue;
        for (int j = 0; j < m; ++j)
          c[static_cast<std::size_t>(i) * m + j] += ail * b[static_cast<std::size_t>(l) * m + j];
      }
    eout = ea + eb;
    return c;
  };
  // Matrix power with an explicit base-10^140 exponent to avoid overflow.
  auto power = [&](auto&& self, const Mat& a, int ea, int p, int& eout) -> Mat {
    if (p == 1) {
      eout = ea;
      return a;
    }
    int e_half = 0;
    Mat half = self(self, a, ea, p / 2, e_half);
    int e_sq = 0;
    Mat v = multiply(half, half, e_half, e_half, e_sq);
    if (p % 2 == 1) v = multiply(a, v, ea, e_sq, e_sq);
    if (v[static_cast<std::size_t>(k - 1) * m + k - 1] > 1e140) {
      for (auto& x : v) x *= 1e-140;
      e_sq += 140;
    }
    eout = e_sq;
    return v;
  };
  int e = 0;
  const Mat Q = power(power, H, 0, n, e);
  double s = Q[static_cast<std::size_t>(k - 1) * m + k - 1];
  for (int i = 1; i <= n; ++i) {
    s = s * i / n;
    if (s < 1e-140) {
      s *= 1e140;
      e -= 140;
    }
  }
  return s * std::pow(10.0, e);
}

TestResult ks_test_uniform(const std::vector<double>& sample) {
  if (sample.empty()) throw DomainError("ks_test_uniform: empty sample");
  const double d = ks_statistic_uniform(sample);
  const double p = 1.0 - ks_cdf(static_cast<int>(sample.size()), d);
  return {d, std::clamp(p, 0.0, 1.0)};
}

double lag1_autocorrelation(const std::vector<double>& u) {
  const std::size_t n = u.size();
  if (n < 3) throw DomainError("lag1_autocorrelation: need at least 3 values");
  const double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    den += (u[i] - mean) * (u[i] - mean);
    if (i + 1 < n) num += (u[i] - mean) * (u[i + 1] - mean);
  }
  return den > 0.0 ? num / den : 0.0;
}

TestResult serial_correlation_test(const std::vector<double>& u, int permutations,
                                   std::uint64_t seed) {
  const double observed = lag1_autocorrelation(u);
  CounterRng rng(seed, 0x5e71a1u);
  std::vector<double> perm = u;
  int extreme = 0;
  for (int r = 0; r < permutations; ++r) {
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
    if (std::fabs(lag1_autocorrelation(perm)) >= std::fabs(observed) - 1e-15) ++extreme;
  }
  return {observed, (extreme + 1.0) / (permutations + 1.0)};
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile_sorted: empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double lo_v = sorted[lo], hi_v = sorted[hi];
  if (std::isinf(lo_v) || std::isinf(hi_v)) return (h - static_cast<double>(lo) < 0.5) ? lo_v : hi_v;
  return lo_v + (h - static_cast<double>(lo)) * (hi_v - lo_v);
}

Summary mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

}  // namespace stats
}  // namespace superexp
