#include "tadt/bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "tadt/error.hpp"
#include "tadt/rng.hpp"

namespace tadt {

namespace {

constexpr double kMaxEnumeration = 1e6;

void require_enumerable(const env::TabularMDP& mdp) {
  const double size = static_cast<double>(mdp.n_states) * mdp.n_actions * mdp.n_states;
  require(size <= kMaxEnumeration, ErrorKind::Enumeration,
          "MDP has " + std::to_string(mdp.n_states) + " states and " + std::to_string(mdp.n_actions) +
              " actions; exact enumeration is limited to |S|*|A|*|S| <= 1e6");
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

Abstraction lossless_abstraction(const env::TabularMDP& mdp) {
  require_enumerable(mdp);
  const auto S = static_cast<std::size_t>(mdp.n_states), A = static_cast<std::size_t>(mdp.n_actions);
  Abstraction abs;
  abs.code_of_state.resize(S);
  std::iota(abs.code_of_state.begin(), abs.code_of_state.end(), 0);
  abs.reward = nn::Tensor<double>(S, A, mdp.reward);
  abs.transition = nn::Tensor<double>(S * A, S, mdp.transition);
  abs.embeddings = nn::Tensor<double>(S, S);
  for (std::size_t s = 0; s < S; ++s) abs.embeddings(s, s) = 1.0;
  abs.codebook = abs.embeddings;
  return abs;
}

template <typename Real>
Abstraction abstraction_from_model(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp) {
  require_enumerable(mdp);
  require(model.meta().m == mdp.n_actions && model.meta().d_s == mdp.d_s(), ErrorKind::Shape,
          "model and MDP disagree on action count or state dimension");
  Abstraction abs;
  const auto probs = model.code_probs(mdp.state_features);
  for (std::size_t s = 0; s < probs.rows; ++s) {
    const auto row = probs.row(s);
    abs.code_of_state.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  abs.reward = model.reward_table();
  auto logits = model.transition_logits();
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0;
    for (auto& x : row) z += x = std::exp(x - mx);
    for (auto& x : row) x /= z;
  }
  abs.transition = std::move(logits);
  abs.embeddings = model.encode_states(mdp.state_features);
  abs.codebook = model.codebook();
  return abs;
}

double bound_formula(double eps_r, double eps_P, double kappa, double I, int d, int codebook_size, double gamma) {
  const double C = static_cast<double>(codebook_size);
  const double cover = kappa * std::pow(I, (d + 2.0) / (2.0 * d)) * std::pow(C, -1.0 / d);
  return 2.0 / ((1 - gamma) * (1 - gamma)) * (eps_r + cover + gamma * eps_P * C / (1 - gamma));
}

std::pair<double, double> concentration_factor(const nn::Tensor<double>& points) {
  const std::size_t n = points.rows, d = points.cols;
  require(n >= 2 && d >= 1, ErrorKind::Evaluation, "concentration estimate needs at least two points");
  // Rescale each coordinate to [0, 1] so the support lies in the unit cube.
  nn::Tensor<double> x = points;
  for (std::size_t j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) lo = std::min(lo, x(i, j)), hi = std::max(hi, x(i, j));
    const double span = hi - lo;
    for (std::size_t i = 0; i < n; ++i) x(i, j) = span > 0 ? (x(i, j) - lo) / span : 0.5;
  }
  // Scott's rule on the pooled coordinate spread.
  double var = 0;
  for (std::size_t j = 0; j < d; ++j) {
    double mu = 0;
    for (std::size_t i = 0; i < n; ++i) mu += x(i, j);
    mu /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mu) * (x(i, j) - mu);
  }
  var /= static_cast<double>(n * d);
  const double h = std::max(1e-3, std::sqrt(var) * std::pow(static_cast<double>(n), -1.0 / (d + 4.0)));
  // log of the Gaussian normalizer, to keep high-dimensional densities finite.
  const double log_norm = -0.5 * static_cast<double>(d) * std::log(2 * M_PI * h * h);
  const double expo = -2.0 / (d + 2.0);  // I = E_p[p^(d/(d+2) - 1)]
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logs;
    logs.reserve(n - 1);
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) logs.push_back(-0.5 * std::pow(distance(x.row(i), x.row(k)) / h, 2));
    const double mx = *std::max_element(logs.begin(), logs.end());
    double s = 0;
    for (double l : logs) s += std::exp(l - mx);
    const double log_p = log_norm + mx + std::log(s / static_cast<double>(n - 1));
    terms[i] = std::exp(expo * log_p);
  }
  const double mean = std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(n);
  double var_t = 0;
  for (double t : terms) var_t += (t - mean) * (t - mean);
  const double stderr_ = std::sqrt(var_t / static_cast<double>(n - 1) / static_cast<double>(n));
  return {std::clamp(mean, std::numeric_limits<double>::min(), 1.0), stderr_};
}

BoundReport check_bound(const env::TabularMDP& mdp, const Abstraction& abs, const BoundOptions& options) {
  require_enumerable(mdp);
  const int S = mdp.n_states, A = mdp.n_actions, M = abs.codebook_size();
  require(static_cast<int>(abs.code_of_state.size()) == S, ErrorKind::Shape, "abstraction covers the wrong state count");
  require(abs.reward.rows == static_cast<std::size_t>(M) && abs.reward.cols == static_cast<std::size_t>(A),
          ErrorKind::Shape, "reward table must be M x m");
  require(abs.transition.rows == static_cast<std::size_t>(M * A) && abs.transition.cols == static_cast<std::size_t>(M),
          ErrorKind::Shape, "transition table must be (M*m) x M");
  BoundReport rep;
  rep.codes = abs.code_of_state;
  rep.codebook_size = M;
  rep.d = static_cast<int>(abs.embeddings.cols);
  rep.gamma = mdp.gamma;

  std::vector<int> preimage(M, 0);
  for (int c : abs.code_of_state) ++preimage[c];

  for (int s = 0; s < S; ++s) {
    const int c = abs.code_of_state[s];
    for (int a = 0; a < A; ++a) {
      rep.eps_r = std::max(rep.eps_r, std::abs(mdp.r(s, a) - abs.reward(c, a)));
      for (int t = 0; t < S; ++t) {
        const int ct = abs.code_of_state[t];
        const double ph = abs.transition(static_cast<std::size_t>(c) * A + a, ct) / preimage[ct];
        rep.eps_P = std::max(rep.eps_P, std::abs(mdp.p(s, a, t) - ph));
      }
    }
  }

  // Abstract MDP over codes, solved exactly, then lifted through f.
  env::TabularMDP abstract;
  abstract.n_states = M;
  abstract.n_actions = A;
  abstract.gamma = mdp.gamma;
  abstract.reward = abs.reward.data;
  abstract.transition = abs.transition.data;
  const auto abstract_solution = env::value_iteration(abstract, options.value_tol);
  for (int s = 0; s < S; ++s) rep.policy.push_back(abstract_solution.greedy_actions[abs.code_of_state[s]]);
  const auto lifted = env::PolicyTable::deterministic(rep.policy, A);
  const auto optimal = env::value_iteration(mdp, options.value_tol);
  // V* through the same evaluation routine, so identical policies give a gap of exactly 0.
  const auto v_star = env::policy_evaluation(mdp, optimal.greedy, options.value_tol);
  const auto v_theta = rep.policy == optimal.greedy_actions ? v_star : env::policy_evaluation(mdp, lifted, options.value_tol);
  rep.value_gap = 0;
  for (int s = 0; s < S; ++s) {
    const double gap = v_star[s] - v_theta[s];
    if (gap > rep.value_gap) rep.value_gap = gap, rep.worst_state = s;
  }

  for (int s = 0; s < S; ++s) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < abs.codebook.rows; ++k) best = std::min(best, distance(abs.embeddings.row(s), abs.codebook.row(k)));
    rep.covering_radius = std::max(rep.covering_radius, best);
  }

  // Lipschitz ratios of r and Q* over state pairs.
  const auto q = env::q_from_values(mdp, optimal.values);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < S; ++i)
    for (int j = i + 1; j < S; ++j) pairs.emplace_back(i, j);
  if (pairs.size() > options.kappa_pairs) {
    Rng rng(derive_seed(options.seed, 0x4B415050ULL));
    std::shuffle(pairs.begin(), pairs.end(), rng.engine());
    pairs.resize(options.kappa_pairs);
  }
  for (const auto& [i, j] : pairs) {
    const double dist = distance(abs.embeddings.row(i), abs.embeddings.row(j));
    if (dist <= 1e-12) continue;  // identical embeddings admit no finite ratio
    for (int a = 0; a < A; ++a) {
      rep.kappa_r = std::max(rep.kappa_r, std::abs(mdp.r(i, a) - mdp.r(j, a)) / dist);
      rep.kappa_Q = std::max(rep.kappa_Q, std::abs(q[static_cast<std::size_t>(i) * A + a] - q[static_cast<std::size_t>(j) * A + a]) / dist);
    }
  }
  // kappa = kappa_1 + gamma * kappa_2 with kappa_1 = 2 kappa_r, kappa_2 = kappa_Q (unit Zador constant).
  rep.kappa_hat = 2 * rep.kappa_r + mdp.gamma * rep.kappa_Q;
  std::tie(rep.I_hat, rep.I_stderr) = concentration_factor(abs.embeddings);

  rep.bound_value = bound_formula(rep.eps_r, rep.eps_P, rep.kappa_hat, rep.I_hat, rep.d, M, mdp.gamma);
  rep.holds = rep.value_gap <= rep.bound_value + 1e-12;
  const double unit = bound_formula(0, 0, 1, rep.I_hat, rep.d, M, mdp.gamma);
  const double rest = bound_formula(rep.eps_r, rep.eps_P, 0, rep.I_hat, rep.d, M, mdp.gamma);
  rep.kappa_required = std::max(0.0, (rep.value_gap - rest) / unit);
  return rep;
}

template <typename Real>
BoundReport theorem_bound_check(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp,
                                const BoundOptions& options) {
  return check_bound(mdp, abstraction_from_model(model, mdp), options);
}

std::string BoundReport::to_json() const {
  nlohmann::ordered_json j;
  j["eps_r"] = eps_r;
  j["eps_P"] = eps_P;
  j["covering_radius"] = covering_radius;
  j["kappa_hat"] = kappa_hat;
  j["kappa_r"] = kappa_r;
  j["kappa_Q"] = kappa_Q;
  j["kappa_required"] = kappa_required;
  j["I_hat"] = I_hat;
  j["I_stderr"] = I_stderr;
  j["d"] = d;
  j["codebook_size"] = codebook_size;
  j["gamma"] = gamma;
  j["value_gap"] = value_gap;
  j["worst_state"] = worst_state;
  j["bound_value"] = bound_value;
  j["holds"] = holds;
  j["holds_note"] = "conditional on the sampled Lipschitz estimate kappa_hat";
  j["codes"] = codes;
  j["policy"] = policy;
  return j.dump(2) + "\n";
}

template Abstraction abstraction_from_model<float>(const TadtCsaModel<float>&, const env::TabularMDP&);
template Abstraction abstraction_from_model<double>(const TadtCsaModel<double>&, const env::TabularMDP&);
template BoundReport theorem_bound_check<float>(const TadtCsaModel<float>&, const env::TabularMDP&, const BoundOptions&);
template BoundReport theorem_bound_check<double>(const TadtCsaModel<double>&, const env::TabularMDP&,
                                                 const BoundOptions&);

}  // namespace tadt
