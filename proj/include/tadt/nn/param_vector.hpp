#pragma once

#include <span>
#include <vector>

#include "tadt/error.hpp"
#include "tadt/nn/tensor.hpp"

namespace tadt::nn {

/// Concatenates parameter values (or gradients) into one flat vector, in list order.
template <typename Real>
std::vector<double> flatten_values(std::span<Parameter<Real>* const> params) {
  std::vector<double> out;
  for (const auto* p : params) out.insert(out.end(), p->value.data.begin(), p->value.data.end());
  return out;
}

template <typename Real>
std::vector<double> flatten_grads(std::span<Parameter<Real>* const> params) {
  std::vector<double> out;
  for (const auto* p : params) out.insert(out.end(), p->grad.data.begin(), p->grad.data.end());
  return out;
}

template <typename Real>
void assign_values(std::span<Parameter<Real>* const> params, std::span<const double> flat) {
  std::size_t k = 0;
  for (auto* p : params) {
    require(k + p->value.size() <= flat.size(), ErrorKind::Shape, "flat parameter vector too short");
    for (auto& x : p->value.data) x = static_cast<Real>(flat[k++]);
  }
  require(k == flat.size(), ErrorKind::Shape, "flat parameter vector too long");
}

}  // namespace tadt::nn
