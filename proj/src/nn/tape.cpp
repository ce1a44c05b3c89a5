#include "tadt/nn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "tadt/error.hpp"

namespace tadt::nn {

namespace {

template <typename Real>
void check_same(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
  require(a.same_shape(b), ErrorKind::Shape,
          std::string(op) + ": operand shapes differ " + a.shape_string() + " vs " + b.shape_string());
}

template <typename Real>
void add_into(Tensor<Real>& dst, const Tensor<Real>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

template <typename Real>
Var Tape<Real>::push(T value, bool needs_grad, std::function<void()> backward) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename Real>
Var Tape<Real>::constant(T value) {
  return push(std::move(value), false);
}

template <typename Real>
Var Tape<Real>::input(T value) {
  return push(std::move(value), true);
}

template <typename Real>
Var Tape<Real>::parameter(Parameter<Real>& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return it->second;
  Var v = push(p.value, true);
  nodes_[v.id].param = &p;
  bound_.emplace(&p, v);
  return v;
}

template <typename Real>
void Tape<Real>::backward(Var loss) {
  require(val(loss).rows == 1 && val(loss).cols == 1, ErrorKind::Shape,
          "backward needs a 1x1 loss, got " + val(loss).shape_string());
  for (auto& node : nodes_) {
    if (node.needs_grad) node.grad = T(node.value.rows, node.value.cols);
  }
  if (!nodes_[loss.id].needs_grad) return;
  nodes_[loss.id].grad.data[0] = Real(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.needs_grad && node.backward) node.backward();
  }
  for (auto& node : nodes_) {
    if (node.param != nullptr) add_into(node.param->grad, node.grad);
  }
}

template <typename Real>
Var Tape<Real>::matmul(Var a, Var b) {
  const T& A = val(a);
  const T& B = val(b);
  require(A.cols == B.rows, ErrorKind::Shape, "matmul: " + A.shape_string() + " . " + B.shape_string());
  const std::size_t n = A.rows, k = A.cols, m = B.cols;
  T C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    Real* c = C.data.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = A.data[i * k + p];
      const Real* brow = B.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) c[j] += aip * brow[j];
    }
  }
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out, n, k, m] {
    const T& dC = g(out);
    const T& A = val(a);
    const T& B = val(b);
    if (needs(a)) {
      T& dA = g(a);
      for (std::size_t i = 0; i < n; ++i) {
        const Real* dc = dC.data.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const Real* brow = B.data.data() + p * m;
          Real acc = 0;
          for (std::size_t j = 0; j < m; ++j) acc += dc[j] * brow[j];
          dA.data[i * k + p] += acc;
        }
      }
    }
    if (needs(b)) {
      T& dB = g(b);
      for (std::size_t i = 0; i < n; ++i) {
        const Real* dc = dC.data.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const Real aip = A.data[i * k + p];
          Real* db = dB.data.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) db[j] += aip * dc[j];
        }
      }
    }
  });
}

template <typename Real>
Var Tape<Real>::matmul_nt(Var a, Var b) {
  const T& A = val(a);
  const T& B = val(b);
  require(A.cols == B.cols, ErrorKind::Shape, "matmul_nt: " + A.shape_string() + " . " + B.shape_string() + "^T");
  const std::size_t n = A.rows, k = A.cols, m = B.rows;
  T C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const Real* arow = A.data.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const Real* brow = B.data.data() + j * k;
      Real acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      C.data[i * m + j] = acc;
    }
  }
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out, n, k, m] {
    const T& dC = g(out);
    const T& A = val(a);
    const T& B = val(b);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const Real d = dC.data[i * m + j];
        if (d == Real(0)) continue;
        if (needs(a)) {
          Real* da = g(a).data.data() + i * k;
          const Real* brow = B.data.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) da[p] += d * brow[p];
        }
        if (needs(b)) {
          Real* db = g(b).data.data() + j * k;
          const Real* arow = A.data.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) db[p] += d * arow[p];
        }
      }
    }
  });
}

template <typename Real>
Var Tape<Real>::add(Var a, Var b) {
  check_same(val(a), val(b), "add");
  T C = val(a);
  add_into(C, val(b));
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out] {
    if (needs(a)) add_into(g(a), g(out));
    if (needs(b)) add_into(g(b), g(out));
  });
}

template <typename Real>
Var Tape<Real>::sub(Var a, Var b) {
  check_same(val(a), val(b), "sub");
  T C = val(a);
  for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] -= val(b).data[i];
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out] {
    if (needs(a)) add_into(g(a), g(out));
    if (needs(b)) {
      T& db = g(b);
      const T& d = g(out);
      for (std::size_t i = 0; i < d.data.size(); ++i) db.data[i] -= d.data[i];
    }
  });
}

template <typename Real>
Var Tape<Real>::mul(Var a, Var b) {
  check_same(val(a), val(b), "mul");
  T C = val(a);
  for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] *= val(b).data[i];
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out] {
    const T& d = g(out);
    if (needs(a)) {
      T& da = g(a);
      for (std::size_t i = 0; i < d.data.size(); ++i) da.data[i] += d.data[i] * val(b).data[i];
    }
    if (needs(b)) {
      T& db = g(b);
      for (std::size_t i = 0; i < d.data.size(); ++i) db.data[i] += d.data[i] * val(a).data[i];
    }
  });
}

template <typename Real>
Var Tape<Real>::add_row(Var a, Var row) {
  const T& A = val(a);
  const T& R = val(row);
  require(R.rows == 1 && R.cols == A.cols, ErrorKind::Shape,
          "add_row: row " + R.shape_string() + " does not broadcast over " + A.shape_string());
  T C = A;
  for (std::size_t i = 0; i < C.rows; ++i)
    for (std::size_t j = 0; j < C.cols; ++j) C.data[i * C.cols + j] += R.data[j];
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a) || needs(row), [this, a, row, out] {
    const T& d = g(out);
    if (needs(a)) add_into(g(a), d);
    if (needs(row)) {
      T& dr = g(row);
      for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = 0; j < d.cols; ++j) dr.data[j] += d.data[i * d.cols + j];
    }
  });
}

template <typename Real>
Var Tape<Real>::scale(Var a, Real factor) {
  T C = val(a);
  for (auto& x : C.data) x *= factor;
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a), [this, a, out, factor] {
    T& da = g(a);
    const T& d = g(out);
    for (std::size_t i = 0; i < d.data.size(); ++i) da.data[i] += factor * d.data[i];
  });
}

template <typename Real>
Var Tape<Real>::scale_rows(Var a, std::span<const Real> factors) {
  const T& A = val(a);
  require(factors.size() == A.rows, ErrorKind::Shape, "scale_rows: factor count does not match rows");
  T C = A;
  for (std::size_t i = 0; i < C.rows; ++i)
    for (std::size_t j = 0; j < C.cols; ++j) C.data[i * C.cols + j] *= factors[i];
  std::vector<Real> f(factors.begin(), factors.end());
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a), [this, a, out, f = std::move(f)] {
    T& da = g(a);
    const T& d = g(out);
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < d.cols; ++j) da.data[i * d.cols + j] += f[i] * d.data[i * d.cols + j];
  });
}

template <typename Real>
Var Tape<Real>::add_constant(Var a, Real c) {
  T C = val(a);
  for (auto& x : C.data) x += c;
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a), [this, a, out] { add_into(g(a), g(out)); });
}

template <typename Real>
Var Tape<Real>::relu(Var a) {
  T C = val(a);
  for (auto& x : C.data) x = x > Real(0) ? x : Real(0);
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a), [this, a, out] {
    T& da = g(a);
    const T& d = g(out);
    const T& x = val(a);
    for (std::size_t i = 0; i < d.data.size(); ++i)
      if (x.data[i] > Real(0)) da.data[i] += d.data[i];
  });
}

template <typename Real>
Var Tape<Real>::square(Var a) {
  T C = val(a);
  for (auto& x : C.data) x *= x;
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a), [this, a, out] {
    T& da = g(a);
    const T& d = g(out);
    const T& x = val(a);
    for (std::size_t i = 0; i < d.data.size(); ++i) da.data[i] += Real(2) * x.data[i] * d.data[i];
  });
}

template <typename Real>
Var Tape<Real>::log_clamped(Var a, Real floor) {
  T C = val(a);
  for (auto& x : C.data) x = std::log(std::max(x, floor));
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a), [this, a, out, floor] {
    T& da = g(a);
    const T& d = g(out);
    const T& x = val(a);
    for (std::size_t i = 0; i < d.data.size(); ++i)
      if (x.data[i] > floor) da.data[i] += d.data[i] / x.data[i];
  });
}

template <typename Real>
Var Tape<Real>::log_sigmoid(Var a) {
  T C = val(a);
  for (auto& x : C.data) x = std::min(x, Real(0)) - std::log1p(std::exp(-std::abs(x)));
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(C), needs(a), [this, a, out] {
    T& da = g(a);
    const T& d = g(out);
    const T& x = val(a);
    for (std::size_t i = 0; i < d.data.size(); ++i) {
      // d/dx log(sigmoid(x)) = sigmoid(-x)
      const Real xi = x.data[i];
      const Real s = xi >= Real(0) ? std::exp(-xi) / (Real(1) + std::exp(-xi)) : Real(1) / (Real(1) + std::exp(xi));
      da.data[i] += d.data[i] * s;
    }
  });
}

template <typename Real>
Var Tape<Real>::layer_norm(Var x, Var gain, Var bias, Real eps) {
  const T& X = val(x);
  require(val(gain).rows == 1 && val(gain).cols == X.cols && val(bias).same_shape(val(gain)), ErrorKind::Shape,
          "layer_norm: gain/bias must be 1 x " + std::to_string(X.cols));
  const std::size_t n = X.rows, c = X.cols;
  T Y(n, c);
  T xhat(n, c);
  std::vector<Real> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real* xr = X.data.data() + i * c;
    Real mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<Real>(c);
    Real var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<Real>(c);
    inv_std[i] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat.data[i * c + j] = (xr[j] - mu) * inv_std[i];
      Y.data[i * c + j] = xhat.data[i * c + j] * val(gain).data[j] + val(bias).data[j];
    }
  }
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(x) || needs(gain) || needs(bias),
              [this, x, gain, bias, out, n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
                const T& d = g(out);
                if (needs(gain) || needs(bias)) {
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                      if (needs(gain)) g(gain).data[j] += d.data[i * c + j] * xhat.data[i * c + j];
                      if (needs(bias)) g(bias).data[j] += d.data[i * c + j];
                    }
                  }
                }
                if (!needs(x)) return;
                T& dx = g(x);
                const T& G = val(gain);
                for (std::size_t i = 0; i < n; ++i) {
                  Real mean_dxhat = 0, mean_dxhat_xhat = 0;
                  for (std::size_t j = 0; j < c; ++j) {
                    const Real dxh = d.data[i * c + j] * G.data[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat.data[i * c + j];
                  }
                  mean_dxhat /= static_cast<Real>(c);
                  mean_dxhat_xhat /= static_cast<Real>(c);
                  for (std::size_t j = 0; j < c; ++j) {
                    const Real dxh = d.data[i * c + j] * G.data[j];
                    dx.data[i * c + j] += inv_std[i] * (dxh - mean_dxhat - xhat.data[i * c + j] * mean_dxhat_xhat);
                  }
                }
              });
}

template <typename Real>
Var Tape<Real>::softmax_rows(Var a) {
  const T& A = val(a);
  T Y(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    const auto r = A.row(i);
    const Real mx = *std::max_element(r.begin(), r.end());
    Real total = 0;
    for (std::size_t j = 0; j < A.cols; ++j) total += (Y(i, j) = std::exp(r[j] - mx));
    for (std::size_t j = 0; j < A.cols; ++j) Y(i, j) /= total;
  }
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(a), [this, a, out] {
    const T& y = val(out);
    const T& d = g(out);
    T& da = g(a);
    for (std::size_t i = 0; i < y.rows; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < y.cols; ++j) dot += d(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) da(i, j) += y(i, j) * (d(i, j) - dot);
    }
  });
}

template <typename Real>
Var Tape<Real>::log_softmax_rows(Var a) {
  const T& A = val(a);
  T Y(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    const auto r = A.row(i);
    const Real mx = *std::max_element(r.begin(), r.end());
    Real total = 0;
    for (std::size_t j = 0; j < A.cols; ++j) total += std::exp(r[j] - mx);
    const Real lse = mx + std::log(total);
    for (std::size_t j = 0; j < A.cols; ++j) Y(i, j) = r[j] - lse;
  }
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(a), [this, a, out] {
    const T& y = val(out);
    const T& d = g(out);
    T& da = g(a);
    for (std::size_t i = 0; i < y.rows; ++i) {
      Real total = 0;
      for (std::size_t j = 0; j < y.cols; ++j) total += d(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) da(i, j) += d(i, j) - std::exp(y(i, j)) * total;
    }
  });
}

template <typename Real>
Var Tape<Real>::gather_rows(Var table, std::span<const int> ids) {
  const T& Tb = val(table);
  T Y(ids.size(), Tb.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    require(ids[r] >= 0 && static_cast<std::size_t>(ids[r]) < Tb.rows, ErrorKind::Shape,
            "gather_rows: id " + std::to_string(ids[r]) + " outside table " + Tb.shape_string());
    std::copy_n(Tb.data.data() + static_cast<std::size_t>(ids[r]) * Tb.cols, Tb.cols, Y.data.data() + r * Tb.cols);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(table), [this, table, out, idx = std::move(idx)] {
    T& dt = g(table);
    const T& d = g(out);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Real* dst = dt.data.data() + static_cast<std::size_t>(idx[r]) * dt.cols;
      const Real* src = d.data.data() + r * d.cols;
      for (std::size_t j = 0; j < d.cols; ++j) dst[j] += src[j];
    }
  });
}

template <typename Real>
Var Tape<Real>::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::Shape, "concat_rows: no operands");
  const std::size_t cols = val(parts.front()).cols;
  std::size_t rows = 0;
  bool any = false;
  for (Var p : parts) {
    require(val(p).cols == cols, ErrorKind::Shape,
            "concat_rows: column mismatch " + val(p).shape_string() + " vs " + std::to_string(cols));
    rows += val(p).rows;
    any = any || needs(p);
  }
  T Y(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    std::copy(val(p).data.begin(), val(p).data.end(), Y.data.begin() + offset * cols);
    offset += val(p).rows;
  }
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), any, [this, parts, out, cols] {
    const T& d = g(out);
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t n = val(p).rows * cols;
      if (needs(p)) {
        T& dp = g(p);
        for (std::size_t i = 0; i < n; ++i) dp.data[i] += d.data[offset * cols + i];
      }
      offset += val(p).rows;
    }
  });
}

template <typename Real>
Var Tape<Real>::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::Shape, "concat_cols: no operands");
  const std::size_t rows = val(parts.front()).rows;
  std::size_t cols = 0;
  bool any = false;
  for (Var p : parts) {
    require(val(p).rows == rows, ErrorKind::Shape,
            "concat_cols: row mismatch " + val(p).shape_string() + " vs " + std::to_string(rows));
    cols += val(p).cols;
    any = any || needs(p);
  }
  T Y(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const T& P = val(p);
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(P.data.data() + i * P.cols, P.cols, Y.data.data() + i * cols + offset);
    offset += P.cols;
  }
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), any, [this, parts, out, rows, cols] {
    const T& d = g(out);
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t pc = val(p).cols;
      if (needs(p)) {
        T& dp = g(p);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < pc; ++j) dp.data[i * pc + j] += d.data[i * cols + offset + j];
      }
      offset += pc;
    }
  });
}

template <typename Real>
Var Tape<Real>::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const T& A = val(a);
  require(begin + count <= A.cols, ErrorKind::Shape, "slice_cols: range outside " + A.shape_string());
  T Y(A.rows, count);
  for (std::size_t i = 0; i < A.rows; ++i)
    std::copy_n(A.data.data() + i * A.cols + begin, count, Y.data.data() + i * count);
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(a), [this, a, out, begin, count] {
    T& da = g(a);
    const T& d = g(out);
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < count; ++j) da.data[i * da.cols + begin + j] += d.data[i * count + j];
  });
}

template <typename Real>
Var Tape<Real>::reshape(Var a, std::size_t rows, std::size_t cols) {
  require(rows * cols == val(a).size(), ErrorKind::Shape,
          "reshape: " + val(a).shape_string() + " cannot become [" + std::to_string(rows) + "x" +
              std::to_string(cols) + "]");
  T Y(rows, cols, val(a).data);
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(a), [this, a, out] { add_into(g(a), g(out)); });
}

template <typename Real>
Var Tape<Real>::pick(Var a, std::span<const int> col_per_row) {
  const T& A = val(a);
  require(col_per_row.size() == A.rows, ErrorKind::Shape, "pick: index count does not match rows");
  T Y(A.rows, 1);
  for (std::size_t i = 0; i < A.rows; ++i) {
    require(col_per_row[i] >= 0 && static_cast<std::size_t>(col_per_row[i]) < A.cols, ErrorKind::Label,
            "pick: column " + std::to_string(col_per_row[i]) + " outside " + A.shape_string());
    Y.data[i] = A(i, static_cast<std::size_t>(col_per_row[i]));
  }
  std::vector<int> idx(col_per_row.begin(), col_per_row.end());
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(a), [this, a, out, idx = std::move(idx)] {
    T& da = g(a);
    const T& d = g(out);
    for (std::size_t i = 0; i < idx.size(); ++i) da(i, static_cast<std::size_t>(idx[i])) += d.data[i];
  });
}

template <typename Real>
Var Tape<Real>::sum(Var a) {
  Real total = 0;
  for (Real x : val(a).data) total += x;
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(T(1, 1, total), needs(a), [this, a, out] {
    const Real d = g(out).data[0];
    for (auto& x : g(a).data) x += d;
  });
}

template <typename Real>
Var Tape<Real>::mean(Var a) {
  require(val(a).size() > 0, ErrorKind::Shape, "mean of an empty tensor");
  return scale(sum(a), Real(1) / static_cast<Real>(val(a).size()));
}

template <typename Real>
Var Tape<Real>::row_sum(Var a) {
  const T& A = val(a);
  T Y(A.rows, 1);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) Y.data[i] += A(i, j);
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(a), [this, a, out] {
    T& da = g(a);
    const T& d = g(out);
    for (std::size_t i = 0; i < da.rows; ++i)
      for (std::size_t j = 0; j < da.cols; ++j) da(i, j) += d.data[i];
  });
}

template <typename Real>
Var Tape<Real>::mean_rows(Var a) {
  const T& A = val(a);
  require(A.rows > 0, ErrorKind::Shape, "mean_rows of an empty tensor");
  T Y(1, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) Y.data[j] += A(i, j);
  const Real inv = Real(1) / static_cast<Real>(A.rows);
  for (auto& y : Y.data) y *= inv;
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(Y), needs(a), [this, a, out, inv] {
    T& da = g(a);
    const T& d = g(out);
    for (std::size_t i = 0; i < da.rows; ++i)
      for (std::size_t j = 0; j < da.cols; ++j) da(i, j) += d.data[j] * inv;
  });
}

template <typename Real>
Var Tape<Real>::straight_through(Var soft, T hard) {
  check_same(val(soft), hard, "straight_through");
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(hard), needs(soft), [this, soft, out] { add_into(g(soft), g(out)); });
}

template <typename Real>
Var Tape<Real>::causal_attention(Var q, Var k, Var v, std::span<const Segment> segments, Real scale,
                                 std::vector<T>* weights) {
  const T& Q = val(q);
  const T& K = val(k);
  const T& V = val(v);
  require(Q.same_shape(K) && Q.rows == V.rows, ErrorKind::Shape,
          "causal_attention: q " + Q.shape_string() + ", k " + K.shape_string() + ", v " + V.shape_string());
  const std::size_t dk = Q.cols, dv = V.cols;
  T O(Q.rows, dv);
  std::vector<Segment> segs(segments.begin(), segments.end());
  std::vector<T> probs;
  probs.reserve(segs.size());
  for (const auto& seg : segs) {
    require(seg.offset + seg.length <= Q.rows, ErrorKind::Shape, "causal_attention: segment outside input");
    T P(seg.length, seg.length);
    for (std::size_t i = 0; i < seg.length; ++i) {
      const Real* qi = Q.data.data() + (seg.offset + i) * dk;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        const Real* kj = K.data.data() + (seg.offset + j) * dk;
        Real s = 0;
        for (std::size_t p = 0; p < dk; ++p) s += qi[p] * kj[p];
        P(i, j) = s * scale;
        mx = std::max(mx, P(i, j));
      }
      Real total = 0;
      for (std::size_t j = 0; j <= i; ++j) total += (P(i, j) = std::exp(P(i, j) - mx));
      Real* oi = O.data.data() + (seg.offset + i) * dv;
      for (std::size_t j = 0; j <= i; ++j) {
        P(i, j) /= total;
        const Real* vj = V.data.data() + (seg.offset + j) * dv;
        for (std::size_t p = 0; p < dv; ++p) oi[p] += P(i, j) * vj[p];
      }
    }
    probs.push_back(std::move(P));
  }
  if (weights != nullptr) *weights = probs;
  const Var out{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(O), needs(q) || needs(k) || needs(v),
              [this, q, k, v, out, segs = std::move(segs), probs = std::move(probs), scale, dk, dv] {
                const T& dO = g(out);
                const T& Q = val(q);
                const T& K = val(k);
                const T& V = val(v);
                std::vector<Real> dp;
                for (std::size_t s = 0; s < segs.size(); ++s) {
                  const auto& seg = segs[s];
                  const T& P = probs[s];
                  for (std::size_t i = 0; i < seg.length; ++i) {
                    const Real* doi = dO.data.data() + (seg.offset + i) * dv;
                    dp.assign(i + 1, Real(0));
                    Real weighted = 0;
                    for (std::size_t j = 0; j <= i; ++j) {
                      const Real* vj = V.data.data() + (seg.offset + j) * dv;
                      Real acc = 0;
                      for (std::size_t p = 0; p < dv; ++p) acc += doi[p] * vj[p];
                      dp[j] = acc;
                      weighted += acc * P(i, j);
                    }
                    for (std::size_t j = 0; j <= i; ++j) {
                      const Real pij = P(i, j);
                      if (needs(v)) {
                        Real* dvj = g(v).data.data() + (seg.offset + j) * dv;
                        for (std::size_t p = 0; p < dv; ++p) dvj[p] += pij * doi[p];
                      }
                      const Real ds = pij * (dp[j] - weighted) * scale;
                      if (ds == Real(0)) continue;
                      if (needs(q)) {
                        Real* dqi = g(q).data.data() + (seg.offset + i) * dk;
                        const Real* kj = K.data.data() + (seg.offset + j) * dk;
                        for (std::size_t p = 0; p < dk; ++p) dqi[p] += ds * kj[p];
                      }
                      if (needs(k)) {
                        Real* dkj = g(k).data.data() + (seg.offset + j) * dk;
                        const Real* qi = Q.data.data() + (seg.offset + i) * dk;
                        for (std::size_t p = 0; p < dk; ++p) dkj[p] += ds * qi[p];
                      }
                    }
                  }
                }
              });
}

template class Tape<float>;
template class Tape<double>;

}  // namespace tadt::nn
