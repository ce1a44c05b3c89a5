#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tadt/env/mdp.hpp"
#include "tadt/model.hpp"
#include "tadt/nn/tensor.hpp"

namespace tadt {

/// A state abstraction with code-level reward and transition models.
struct Abstraction {
  std::vector<int> code_of_state;          // f(s)
  nn::Tensor<double> reward;               // M x m predicted rewards
  nn::Tensor<double> transition;           // (M*m) x M next-code distributions, row c*m + a
  nn::Tensor<double> embeddings;           // |S| x d encoder outputs
  nn::Tensor<double> codebook;             // M x d

  int codebook_size() const { return static_cast<int>(codebook.rows); }
};

/// Each state is its own code, with the exact reward and transition tables
/// and one-hot embeddings.
Abstraction lossless_abstraction(const env::TabularMDP& mdp);

/// Codes by argmax of the zero-TA code distribution, RP predictions as the
/// reward table, and a softmax over CTP logits as the transition model.
template <typename Real>
Abstraction abstraction_from_model(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp);

struct BoundOptions {
  std::uint64_t seed = 0;
  std::size_t kappa_pairs = 20000;  // all pairs are used when there are fewer
  double value_tol = 1e-10;
};

struct BoundReport {
  double eps_r = 0.0;
  double eps_P = 0.0;
  double covering_radius = 0.0;  // max over states of the distance to the nearest code
  double kappa_hat = 0.0;
  double kappa_r = 0.0;
  double kappa_Q = 0.0;
  double kappa_required = 0.0;   // smallest kappa for which the bound still covers value_gap
  double I_hat = 1.0;
  double I_stderr = 0.0;
  int d = 0;
  int codebook_size = 0;
  double gamma = 0.0;
  double value_gap = 0.0;
  int worst_state = 0;
  double bound_value = 0.0;
  bool holds = false;
  std::vector<int> codes;
  std::vector<int> policy;  // abstract greedy action per state

  std::string to_json() const;
};

/// Value-gap bound:
///   2/(1-g)^2 * (eps_r + kappa * I^((d+2)/(2d)) * |C|^(-1/d) + g * eps_P * |C| / (1-g)).
double bound_formula(double eps_r, double eps_P, double kappa, double I, int d, int codebook_size, double gamma);

/// Exact check of an abstraction against a tabular MDP.
BoundReport check_bound(const env::TabularMDP& mdp, const Abstraction& abstraction, const BoundOptions& options = {});

template <typename Real>
BoundReport theorem_bound_check(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp,
                                const BoundOptions& options = {});

/// Leave-one-out Gaussian KDE estimate of integral p(e)^(d/(d+2)) de for
/// points rescaled to the unit cube, clamped to (0, 1]; returns {I, stderr}.
std::pair<double, double> concentration_factor(const nn::Tensor<double>& points);

}  // namespace tadt
