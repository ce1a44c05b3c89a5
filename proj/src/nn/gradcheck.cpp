#include "tadt/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tadt/error.hpp"
#include "tadt/rng.hpp"

namespace tadt::nn {

Tensor<double> gumbel_sample(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> out(rows, cols);
  for (double& g : out.data) {
    const double u = std::clamp(rng.uniform(), 1e-300, 1.0 - 1e-16);
    g = -std::log(-std::log(u));
  }
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(const std::function<double(std::span<const double>)>& loss, std::span<const double> x,
                          std::span<const double> analytic, double tol, double step,
                          std::span<const std::size_t> indices, double floor) {
  require(tol > 0, ErrorKind::Parameter, "gradcheck tolerance must be positive");
  require(step > 0, ErrorKind::Parameter, "gradcheck step must be positive");
  require(analytic.size() == x.size(), ErrorKind::Shape, "analytic gradient length differs from the input");
  std::vector<double> probe(x.begin(), x.end());
  GradcheckReport report;
  auto check = [&](std::size_t i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = loss(probe);
    probe[i] = saved - step;
    const double down = loss(probe);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double rel = relative_error(analytic[i], numeric, floor);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic[i] - numeric));
    if (report.checked == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.worst_analytic = analytic[i];
      report.worst_numeric = numeric;
    }
    ++report.checked;
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) check(i);
  } else {
    for (std::size_t i : indices) {
      require(i < x.size(), ErrorKind::Parameter, "gradcheck index out of range");
      check(i);
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace tadt::nn
