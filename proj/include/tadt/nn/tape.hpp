#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "tadt/nn/tensor.hpp"

namespace tadt::nn {

/// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

/// Contiguous run of rows forming one causal sequence.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Reverse-mode automatic differentiation over 2-D tensors.
///
/// Every op appends a node holding its forward value and a closure that
/// pushes the node's gradient into its parents. backward() walks the tape in
/// reverse and finally accumulates leaf gradients into the bound Parameters.
/// Nodes whose inputs are all constants carry no gradient.
///
/// All ops are row-local except matmul's reduction dimension, the reductions
/// (sum/mean/mean_rows) and causal_attention, which reads only rows at or
/// before the query row inside its segment.
template <typename Real>
class Tape {
 public:
  using T = Tensor<Real>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(T value);
  /// Leaf that receives a gradient but is not tied to a Parameter.
  Var input(T value);
  /// Leaf bound to `p`; repeated calls return the same node.
  Var parameter(Parameter<Real>& p);

  const T& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient after backward(); zero-size if the node needs no gradient.
  const T& grad(Var v) const { return nodes_[v.id].grad; }
  Real scalar(Var v) const { return nodes_[v.id].value.data[0]; }
  std::size_t size() const { return nodes_.size(); }

  /// Backpropagates d(loss)/d(.) for a 1x1 `loss` and accumulates into the
  /// gradients of every bound Parameter.
  void backward(Var loss);

  // Linear algebra.
  Var matmul(Var a, Var b);     // [n x k] . [k x m]
  Var matmul_nt(Var a, Var b);  // [n x k] . [m x k]^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);       // elementwise
  Var add_row(Var a, Var row);  // broadcast a 1 x m row over every row of a
  Var scale(Var a, Real factor);
  Var scale_rows(Var a, std::span<const Real> factors);  // row r times factors[r]
  Var add_constant(Var a, Real c);

  // Nonlinearities.
  Var relu(Var a);
  Var square(Var a);
  Var log_clamped(Var a, Real floor);
  Var log_sigmoid(Var a);
  Var layer_norm(Var x, Var gain, Var bias, Real eps = Real(1e-5));
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);

  // Shape plumbing.
  Var gather_rows(Var table, std::span<const int> ids);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  Var pick(Var a, std::span<const int> col_per_row);  // [n x m] -> [n x 1]

  // Reductions.
  Var sum(Var a);
  Var mean(Var a);
  Var row_sum(Var a);    // [n x m] -> [n x 1]
  Var mean_rows(Var a);  // [n x m] -> [1 x m]

  /// Forward value is `hard`; the gradient flows to `soft` unchanged.
  Var straight_through(Var soft, T hard);

  /// Block-diagonal causal attention: inside each segment, query row i
  /// attends to key rows j <= i with softmax(q k^T * scale). `weights`, when
  /// given, receives the attention matrix of every segment (row-major,
  /// concatenated).
  Var causal_attention(Var q, Var k, Var v, std::span<const Segment> segments, Real scale,
                       std::vector<T>* weights = nullptr);

 private:
  struct Node {
    T value;
    T grad;
    std::function<void()> backward;
    Parameter<Real>* param = nullptr;
    bool needs_grad = false;
  };

  Var push(T value, bool needs_grad, std::function<void()> backward = {});
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  T& g(Var v) { return nodes_[v.id].grad; }
  const T& val(Var v) const { return nodes_[v.id].value; }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Real>*, Var> bound_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace tadt::nn
