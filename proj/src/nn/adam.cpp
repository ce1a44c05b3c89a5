#include "tadt/nn/adam.hpp"

#include <cmath>
#include <string>

#include "tadt/error.hpp"

namespace tadt::nn {

template <typename Real>
void adam_step(std::span<Parameter<Real>* const> params, AdamState<Real>& state) {
  require(state.beta1 >= 0 && state.beta1 < 1 && state.beta2 >= 0 && state.beta2 < 1 && state.eps > 0,
          ErrorKind::Parameter, "invalid Adam hyperparameters");
  require(state.step >= 0, ErrorKind::Parameter, "Adam step counter is negative");
  for (const auto* p : params)
    for (Real g : p->grad.data)
      if (!std::isfinite(static_cast<double>(g))) fail(ErrorKind::NonFinite, "gradient of '" + p->name + "' is not finite");

  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.rows, p->value.cols);
      state.v.emplace_back(p->value.rows, p->value.cols);
    }
  }
  require(state.m.size() == params.size(), ErrorKind::Shape, "Adam moments do not match the parameter list");

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    require(m.size() == p.value.size(), ErrorKind::Shape, "Adam moment shape mismatch for '" + p.name + "'");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = p.grad.data[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      const double update = state.lr * (mi / c1) / (std::sqrt(vi / c2) + state.eps);
      p.value.data[i] = static_cast<Real>(p.value.data[i] - update);
    }
  }
}

template <typename Real>
double global_grad_norm(std::span<Parameter<Real>* const> params) {
  double sq = 0.0;
  for (const auto* p : params)
    for (Real g : p->grad.data) sq += static_cast<double>(g) * g;
  return std::sqrt(sq);
}

template <typename Real>
double clip_grad_norm(std::span<Parameter<Real>* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0 && norm > max_norm && std::isfinite(norm)) {
    const Real factor = static_cast<Real>(max_norm / norm);
    for (auto* p : params)
      for (Real& g : p->grad.data) g *= factor;
  }
  return norm;
}

template void adam_step<float>(std::span<Parameter<float>* const>, AdamState<float>&);
template void adam_step<double>(std::span<Parameter<double>* const>, AdamState<double>&);
template double global_grad_norm<float>(std::span<Parameter<float>* const>);
template double global_grad_norm<double>(std::span<Parameter<double>* const>);
template double clip_grad_norm<float>(std::span<Parameter<float>* const>, double);
template double clip_grad_norm<double>(std::span<Parameter<double>* const>, double);

}  // namespace tadt::nn
