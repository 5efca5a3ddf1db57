#pragma once

#include <cstdint>
#include <vector>

namespace superexp::stats {

/// Standard normal CDF.
double normal_cdf(double z);

/// Upper tail of the chi-squared distribution with one degree of freedom.
double chi2_1_upper(double x);

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
double ks_statistic_uniform(std::vector<double> sample);

/// P[D_n < d] for the one-sample KS statistic, exact for continuous
/// distributions (Marsaglia, Tsang and Wang).
double ks_cdf(int n, double d);

struct TestResult {
  double statistic;
  double p_value;
};

/// KS test of the sample against Uniform(0, 1).
TestResult ks_test_uniform(const std::vector<double>& sample);

/// Lag-1 autocorrelation about the sample mean.
double lag1_autocorrelation(const std::vector<double>& u);

/// Two-sided permutation test of zero lag-1 autocorrelation.
TestResult serial_correlation_test(const std::vector<double>& u, int permutations = 5000,
                                   std::uint64_t seed = 0);

/// Linear-interpolation quantile (type 7) of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct Summary {
  double mean;
  double sd;
};
Summary mean_sd(const std::vector<double>& v);

}  // namespace superexp::stats
