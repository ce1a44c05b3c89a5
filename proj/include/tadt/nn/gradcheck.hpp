#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tadt/nn/tensor.hpp"

namespace tadt::nn {

/// rows x cols standard Gumbel draws -log(-log U), deterministic per seed.
Tensor<double> gumbel_sample(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct GradcheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-3);

/// Compares `analytic` against central differences of `loss` at `x`.
/// `loss` is evaluated at perturbed copies of `x`; `indices` restricts the
/// coordinates checked (all when empty).
GradcheckReport gradcheck(const std::function<double(std::span<const double>)>& loss, std::span<const double> x,
                          std::span<const double> analytic, double tol, double step = 1e-6,
                          std::span<const std::size_t> indices = {}, double floor = 1e-3);

}  // namespace tadt::nn
