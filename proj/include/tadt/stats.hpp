#pragma once

#include <span>
#include <vector>

namespace tadt::stats {

/// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);
/// Pearson correlation of average ranks; NaN when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);
double median(std::vector<double> values);
double mean(std::span<const double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
/// Ordinary least squares y = slope * x + intercept.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace tadt::stats
