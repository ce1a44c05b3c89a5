#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tadt/nn/tape.hpp"
#include "tadt/rng.hpp"

namespace tadt::nn {

/// Owns parameters at stable addresses, in registration order.
template <typename Real>
class ParameterSet {
 public:
  Parameter<Real>& add(const std::string& name, Tensor<Real> value);
  std::vector<Parameter<Real>*> all() const;
  Parameter<Real>* find(const std::string& name) const;
  void zero_grad();
  std::size_t count() const;  // total scalar parameters

 private:
  std::vector<std::unique_ptr<Parameter<Real>>> params_;
};

enum class Init { Zeros, Ones, Uniform, Normal };

/// Initializes a rows x cols tensor. Uniform draws from +-scale, Normal from
/// N(0, scale^2).
template <typename Real>
Tensor<Real> init_tensor(std::size_t rows, std::size_t cols, Init kind, double scale, Rng& rng);

/// y = x W + b.
template <typename Real>
class Dense {
 public:
  Dense() = default;
  Dense(ParameterSet<Real>& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
        bool bias = true);
  Var forward(Tape<Real>& tape, Var x) const;
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Parameter<Real>& weight() const { return *weight_; }

 private:
  Parameter<Real>* weight_ = nullptr;
  Parameter<Real>* bias_ = nullptr;
  std::size_t in_ = 0, out_ = 0;
};

/// Dense layers with ReLU between them (none after the last).
template <typename Real>
class ReluMlp {
 public:
  ReluMlp() = default;
  ReluMlp(ParameterSet<Real>& params, const std::string& name, std::span<const std::size_t> widths, Rng& rng);
  Var forward(Tape<Real>& tape, Var x) const;

 private:
  std::vector<Dense<Real>> layers_;
};

template <typename Real>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterSet<Real>& params, const std::string& name, std::size_t width);
  Var forward(Tape<Real>& tape, Var x) const;

 private:
  Parameter<Real>* gain_ = nullptr;
  Parameter<Real>* bias_ = nullptr;
};

template <typename Real>
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterSet<Real>& params, const std::string& name, std::size_t count, std::size_t width, Rng& rng,
            double scale = 0.1);
  Var lookup(Tape<Real>& tape, std::span<const int> ids) const;
  Var table(Tape<Real>& tape) const;
  Parameter<Real>& parameter() const { return *table_; }

 private:
  Parameter<Real>* table_ = nullptr;
};

/// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)).
template <typename Real>
class CausalSelfAttentionBlock {
 public:
  CausalSelfAttentionBlock() = default;
  CausalSelfAttentionBlock(ParameterSet<Real>& params, const std::string& name, std::size_t width,
                           std::size_t heads, Rng& rng);
  /// `attention`, when non-null, receives per-head, per-segment weights.
  Var forward(Tape<Real>& tape, Var x, std::span<const Segment> segments,
              std::vector<Tensor<Real>>* attention = nullptr) const;

 private:
  LayerNorm<Real> ln_attn_, ln_mlp_;
  Dense<Real> query_, key_, value_, proj_;
  ReluMlp<Real> mlp_;
  std::size_t width_ = 0, heads_ = 1;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class Dense<float>;
extern template class Dense<double>;
extern template class ReluMlp<float>;
extern template class ReluMlp<double>;
extern template class LayerNorm<float>;
extern template class LayerNorm<double>;
extern template class Embedding<float>;
extern template class Embedding<double>;
extern template class CausalSelfAttentionBlock<float>;
extern template class CausalSelfAttentionBlock<double>;

}  // namespace tadt::nn
