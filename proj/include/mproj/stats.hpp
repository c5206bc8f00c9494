#pragma once

#include <optional>
#include <span>
#include <vector>

namespace mproj::stats {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1); nullopt for fewer than two values.
std::optional<double> stdev(std::span<const double> xs);
double pearson(std::span<const double> x, std::span<const double> y);
// 1-based ranks, ties share the average rank.
std::vector<double> average_ranks(std::span<const double> xs);
double spearman(std::span<const double> x, std::span<const double> y);
// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> xs, double q);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;  // two-sided
};
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct Summary {
  double mean = 0.0;
  std::optional<double> stdev;
  std::optional<double> ci_low, ci_high;          // mean +- 1.96 sd / sqrt(n)
  std::optional<double> pct_low, pct_high;        // 2.5th / 97.5th percentiles
  std::size_t n = 0;
};
Summary summarize(std::span<const double> xs);

}  // namespace mproj::stats
