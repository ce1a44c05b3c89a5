#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tadt/nn/tensor.hpp"

namespace tadt::nn {

template <typename Real>
struct AdamState {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor<Real>> m;  // one per parameter, in parameter order
  std::vector<Tensor<Real>> v;
};

/// Bias-corrected Adam update of every parameter from its `grad`. Moments are
/// created lazily on the first call. A non-finite gradient anywhere rejects
/// the whole update (nothing is modified) with a NonFinite error.
template <typename Real>
void adam_step(std::span<Parameter<Real>* const> params, AdamState<Real>& state);

/// Global L2 norm over all parameter gradients.
template <typename Real>
double global_grad_norm(std::span<Parameter<Real>* const> params);

/// Rescales gradients so their global norm is at most `max_norm`; returns the
/// norm before clipping.
template <typename Real>
double clip_grad_norm(std::span<Parameter<Real>* const> params, double max_norm);

}  // namespace tadt::nn
