#include "tadt/nn/layers.hpp"

#include <cmath>

#include "tadt/error.hpp"

namespace tadt::nn {

template <typename Real>
Parameter<Real>& ParameterSet<Real>::add(const std::string& name, Tensor<Real> value) {
  require(find(name) == nullptr, ErrorKind::Parameter, "duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Parameter<Real>>(name, std::move(value)));
  return *params_.back();
}

template <typename Real>
std::vector<Parameter<Real>*> ParameterSet<Real>::all() const {
  std::vector<Parameter<Real>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename Real>
Parameter<Real>* ParameterSet<Real>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <typename Real>
void ParameterSet<Real>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename Real>
std::size_t ParameterSet<Real>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <typename Real>
Tensor<Real> init_tensor(std::size_t rows, std::size_t cols, Init kind, double scale, Rng& rng) {
  Tensor<Real> t(rows, cols);
  for (auto& x : t.data) {
    switch (kind) {
      case Init::Zeros: x = Real(0); break;
      case Init::Ones: x = Real(1); break;
      case Init::Uniform: x = static_cast<Real>(rng.uniform(-scale, scale)); break;
      case Init::Normal: x = static_cast<Real>(rng.normal() * scale); break;
    }
  }
  return t;
}

template <typename Real>
Dense<Real>::Dense(ParameterSet<Real>& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   bool bias)
    : in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = &params.add(name + ".weight", init_tensor<Real>(in, out, Init::Uniform, bound, rng));
  if (bias) bias_ = &params.add(name + ".bias", Tensor<Real>(1, out));
}

template <typename Real>
Var Dense<Real>::forward(Tape<Real>& tape, Var x) const {
  require(tape.value(x).cols == in_, ErrorKind::Shape,
          weight_->name + ": input " + tape.value(x).shape_string() + " but layer expects " + std::to_string(in_) +
              " features");
  Var y = tape.matmul(x, tape.parameter(*weight_));
  return bias_ != nullptr ? tape.add_row(y, tape.parameter(*bias_)) : y;
}

template <typename Real>
ReluMlp<Real>::ReluMlp(ParameterSet<Real>& params, const std::string& name, std::span<const std::size_t> widths,
                       Rng& rng) {
  require(widths.size() >= 2, ErrorKind::Parameter, "MLP needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.emplace_back(params, name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
}

template <typename Real>
Var ReluMlp<Real>::forward(Tape<Real>& tape, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, x);
    if (i + 1 < layers_.size()) x = tape.relu(x);
  }
  return x;
}

template <typename Real>
LayerNorm<Real>::LayerNorm(ParameterSet<Real>& params, const std::string& name, std::size_t width) {
  gain_ = &params.add(name + ".gain", Tensor<Real>(1, width, Real(1)));
  bias_ = &params.add(name + ".bias", Tensor<Real>(1, width));
}

template <typename Real>
Var LayerNorm<Real>::forward(Tape<Real>& tape, Var x) const {
  return tape.layer_norm(x, tape.parameter(*gain_), tape.parameter(*bias_));
}

template <typename Real>
Embedding<Real>::Embedding(ParameterSet<Real>& params, const std::string& name, std::size_t count,
                           std::size_t width, Rng& rng, double scale) {
  table_ = &params.add(name, init_tensor<Real>(count, width, Init::Normal, scale, rng));
}

template <typename Real>
Var Embedding<Real>::lookup(Tape<Real>& tape, std::span<const int> ids) const {
  return tape.gather_rows(tape.parameter(*table_), ids);
}

template <typename Real>
Var Embedding<Real>::table(Tape<Real>& tape) const {
  return tape.parameter(*table_);
}

template <typename Real>
CausalSelfAttentionBlock<Real>::CausalSelfAttentionBlock(ParameterSet<Real>& params, const std::string& name,
                                                         std::size_t width, std::size_t heads, Rng& rng)
    : width_(width), heads_(heads) {
  require(heads >= 1 && width % heads == 0, ErrorKind::Parameter, "width must be divisible by the head count");
  ln_attn_ = LayerNorm<Real>(params, name + ".ln_attn", width);
  query_ = Dense<Real>(params, name + ".query", width, width, rng);
  key_ = Dense<Real>(params, name + ".key", width, width, rng);
  value_ = Dense<Real>(params, name + ".value", width, width, rng);
  proj_ = Dense<Real>(params, name + ".proj", width, width, rng);
  ln_mlp_ = LayerNorm<Real>(params, name + ".ln_mlp", width);
  const std::size_t widths[] = {width, 2 * width, width};
  mlp_ = ReluMlp<Real>(params, name + ".mlp", widths, rng);
}

template <typename Real>
Var CausalSelfAttentionBlock<Real>::forward(Tape<Real>& tape, Var x, std::span<const Segment> segments,
                                            std::vector<Tensor<Real>>* attention) const {
  const Var h = ln_attn_.forward(tape, x);
  const Var q = query_.forward(tape, h);
  const Var k = key_.forward(tape, h);
  const Var v = value_.forward(tape, h);
  const std::size_t head_width = width_ / heads_;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(head_width));
  std::vector<Var> heads;
  for (std::size_t hd = 0; hd < heads_; ++hd) {
    std::vector<Tensor<Real>> weights;
    const std::size_t begin = hd * head_width;
    heads.push_back(tape.causal_attention(tape.slice_cols(q, begin, head_width), tape.slice_cols(k, begin, head_width),
                                          tape.slice_cols(v, begin, head_width), segments, scale,
                                          attention != nullptr ? &weights : nullptr));
    if (attention != nullptr) attention->insert(attention->end(), weights.begin(), weights.end());
  }
  const Var attended = heads.size() == 1 ? heads.front() : tape.concat_cols(heads);
  x = tape.add(x, proj_.forward(tape, attended));
  return tape.add(x, mlp_.forward(tape, ln_mlp_.forward(tape, x)));
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template Tensor<float> init_tensor<float>(std::size_t, std::size_t, Init, double, Rng&);
template Tensor<double> init_tensor<double>(std::size_t, std::size_t, Init, double, Rng&);
template class Dense<float>;
template class Dense<double>;
template class ReluMlp<float>;
template class ReluMlp<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class Embedding<float>;
template class Embedding<double>;
template class CausalSelfAttentionBlock<float>;
template class CausalSelfAttentionBlock<double>;

}  // namespace tadt::nn
