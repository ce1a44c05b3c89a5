#include "tadt/env/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tadt/error.hpp"
#include "tadt/rng.hpp"

namespace tadt::env {

namespace {

constexpr double kRowTolerance = 1e-9;

int sample_categorical(Rng& rng, std::span<const double> probs) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = static_cast<int>(i);
    if (u < cumulative) return static_cast<int>(i);
  }
  return last_positive;
}

std::vector<double> policy_row(const PolicyTable& policy, int s) {
  return {policy.action_probs.begin() + static_cast<std::ptrdiff_t>(s) * policy.n_actions,
          policy.action_probs.begin() + static_cast<std::ptrdiff_t>(s + 1) * policy.n_actions};
}

void check_distribution(std::span<const double> row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    require(std::isfinite(p) && p >= 0.0, ErrorKind::Parameter, what + " has a negative or non-finite entry");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= kRowTolerance, ErrorKind::Parameter,
          what + " sums to " + std::to_string(sum) + " instead of 1");
}

std::vector<std::vector<double>> random_features(Rng& rng, int n_states, int d_s) {
  // Column s of a Gaussian matrix is the embedding of one-hot state s.
  std::vector<std::vector<double>> features(n_states, std::vector<double>(d_s));
  for (int s = 0; s < n_states; ++s)
    for (int k = 0; k < d_s; ++k) features[s][k] = rng.normal();
  return features;
}

}  // namespace

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
  PolicyTable p{n_states, n_actions, {}};
  p.action_probs.assign(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
  return p;
}

PolicyTable PolicyTable::deterministic(std::span<const int> actions, int n_actions) {
  PolicyTable p{static_cast<int>(actions.size()), n_actions, {}};
  p.action_probs.assign(actions.size() * n_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) p.prob(static_cast<int>(s), actions[s]) = 1.0;
  return p;
}

void validate(const TabularMDP& mdp) {
  require(mdp.n_states >= 1 && mdp.n_actions >= 1, ErrorKind::Parameter, "MDP needs at least one state and action");
  require(mdp.gamma >= 0.0 && mdp.gamma <= 1.0, ErrorKind::Parameter, "MDP gamma outside [0, 1]");
  const auto n_sa = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions;
  require(mdp.transition.size() == n_sa * mdp.n_states, ErrorKind::Parameter, "transition array has wrong size");
  require(mdp.reward.size() == n_sa, ErrorKind::Parameter, "reward array has wrong size");
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      check_distribution(mdp.row(s, a), "P[" + std::to_string(s) + "][" + std::to_string(a) + "]");
      const double r = mdp.r(s, a);
      require(std::isfinite(r) && r >= 0.0 && r <= 1.0, ErrorKind::Parameter, "reward outside [0, 1]");
    }
  }
  require(mdp.state_features.size() == static_cast<std::size_t>(mdp.n_states), ErrorKind::Parameter,
          "state_features must have one row per state");
  for (const auto& f : mdp.state_features)
    require(f.size() == mdp.state_features.front().size() && !f.empty(), ErrorKind::Parameter,
            "state_features rows differ in dimension");
  require(mdp.start_distribution.size() == static_cast<std::size_t>(mdp.n_states), ErrorKind::Parameter,
          "start_distribution has wrong size");
  check_distribution(mdp.start_distribution, "start_distribution");
  require(mdp.start_state >= 0 && mdp.start_state < mdp.n_states, ErrorKind::Parameter, "start_state out of range");
}

void validate(const PolicyTable& policy) {
  require(policy.n_states >= 1 && policy.n_actions >= 1, ErrorKind::Parameter, "empty policy table");
  require(policy.action_probs.size() == static_cast<std::size_t>(policy.n_states) * policy.n_actions,
          ErrorKind::Parameter, "policy table has wrong size");
  for (int s = 0; s < policy.n_states; ++s) check_distribution(policy_row(policy, s), "policy row");
}

TabularMDP make_random_mdp(std::uint64_t seed, int n_states, int n_actions, int d_s, double sparsity,
                           double gamma) {
  require(n_states >= 1 && n_actions >= 1 && d_s >= 1, ErrorKind::Parameter, "MDP sizes must be >= 1");
  require(sparsity > 0.0 && sparsity <= 1.0, ErrorKind::Parameter, "sparsity must lie in (0, 1]");
  require(gamma >= 0.0 && gamma < 1.0, ErrorKind::Parameter, "random MDP gamma must lie in [0, 1)");
  Rng rng(derive_seed(seed, 0x4D4450));
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  const int support = std::max(1, static_cast<int>(std::ceil(sparsity * n_states - 1e-12)));
  std::vector<int> successors(n_states);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      std::iota(successors.begin(), successors.end(), 0);
      // Partial Fisher-Yates: the first `support` entries are the reachable set.
      for (int i = 0; i < support; ++i) std::swap(successors[i], successors[i + rng.index(n_states - i)]);
      std::vector<double> weights(support);
      for (auto& w : weights) w = -std::log(rng.uniform());
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      for (int i = 0; i < support; ++i) mdp.p(s, a, successors[i]) = weights[i] / total;
      mdp.r(s, a) = rng.uniform();
    }
  }
  mdp.state_features = random_features(rng, n_states, d_s);
  mdp.start_distribution.assign(n_states, 1.0 / n_states);
  mdp.start_state = 0;
  return mdp;
}

StitchingProblem make_stitching_mdp(std::uint64_t seed, int d_s) {
  constexpr int kRegionSize = 4;
  constexpr int kActions = 4;
  constexpr double kSwitchProb = 0.02;
  constexpr double kGoodReward = 0.8;
  constexpr double kBadReward = 0.2;
  Rng rng(derive_seed(seed, 0x535449));

  StitchingProblem problem;
  problem.first_region_size = kRegionSize;
  TabularMDP& mdp = problem.mdp;
  mdp.n_states = 2 * kRegionSize;
  mdp.n_actions = kActions;
  mdp.gamma = 0.99;
  mdp.transition.assign(static_cast<std::size_t>(mdp.n_states) * kActions * mdp.n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(mdp.n_states) * kActions, kBadReward);

  std::vector<int> good(mdp.n_states);
  for (auto& g : good) g = rng.index(kActions);
  for (int s = 0; s < mdp.n_states; ++s) {
    const bool first = s < kRegionSize;
    for (int a = 0; a < kActions; ++a) {
      if (a == good[s]) mdp.r(s, a) = kGoodReward;
      // Movement ignores the action: drift through region one, then region two is absorbing.
      for (int t = 0; t < mdp.n_states; ++t) {
        const bool t_first = t < kRegionSize;
        double p = 0.0;
        if (first) p = t_first ? (1.0 - kSwitchProb) / kRegionSize : kSwitchProb / kRegionSize;
        else p = t_first ? 0.0 : 1.0 / kRegionSize;
        mdp.p(s, a, t) = p;
      }
    }
  }
  mdp.state_features = random_features(rng, mdp.n_states, d_s);
  mdp.start_distribution.assign(mdp.n_states, 0.0);
  mdp.start_distribution[0] = 1.0;
  mdp.start_state = 0;

  std::vector<int> act_a(mdp.n_states), act_b(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    const bool first = s < kRegionSize;
    const int wrong = (good[s] + 1) % kActions;
    act_a[s] = first ? good[s] : wrong;
    act_b[s] = first ? wrong : good[s];
  }
  problem.behavior_a = PolicyTable::deterministic(act_a, kActions);
  problem.behavior_b = PolicyTable::deterministic(act_b, kActions);
  return problem;
}

std::vector<double> q_from_values(const TabularMDP& mdp, std::span<const double> values) {
  std::vector<double> q(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.row(s, a);
      double expected = 0.0;
      for (int t = 0; t < mdp.n_states; ++t) expected += row[t] * values[t];
      q[static_cast<std::size_t>(s) * mdp.n_actions + a] = mdp.r(s, a) + mdp.gamma * expected;
    }
  }
  return q;
}

PolicyTable greedy_from_q(std::span<const double> q, int n_states, int n_actions) {
  std::vector<int> best(n_states, 0);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 1; a < n_actions; ++a)
      if (q[static_cast<std::size_t>(s) * n_actions + a] > q[static_cast<std::size_t>(s) * n_actions + best[s]])
        best[s] = a;
  }
  return PolicyTable::deterministic(best, n_actions);
}

SolveResult value_iteration(const TabularMDP& mdp, double tol, int max_iterations) {
  require(mdp.gamma < 1.0, ErrorKind::Unsupported, "value iteration needs gamma < 1");
  require(tol > 0.0, ErrorKind::Parameter, "tolerance must be positive");
  SolveResult result;
  std::vector<double> v(mdp.n_states, 0.0);
  for (int it = 1; it <= max_iterations; ++it) {
    const auto q = q_from_values(mdp, v);
    double delta = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = q[static_cast<std::size_t>(s) * mdp.n_actions];
      for (int a = 1; a < mdp.n_actions; ++a) best = std::max(best, q[static_cast<std::size_t>(s) * mdp.n_actions + a]);
      delta = std::max(delta, std::abs(best - v[s]));
      v[s] = best;
    }
    result.iterations = it;
    if (delta <= tol) break;
  }
  result.greedy = greedy_from_q(q_from_values(mdp, v), mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      if (result.greedy.prob(s, a) == 1.0) {
        result.greedy_actions.push_back(a);
        break;
      }
  result.values = std::move(v);
  return result;
}

std::vector<double> policy_evaluation(const TabularMDP& mdp, const PolicyTable& policy, double tol,
                                      int max_iterations) {
  require(mdp.gamma < 1.0, ErrorKind::Unsupported, "policy evaluation needs gamma < 1");
  require(tol > 0.0, ErrorKind::Parameter, "tolerance must be positive");
  require(policy.n_states == mdp.n_states && policy.n_actions == mdp.n_actions, ErrorKind::Shape,
          "policy table does not match the MDP");
  std::vector<double> v(mdp.n_states, 0.0);
  for (int it = 0; it < max_iterations; ++it) {
    const auto q = q_from_values(mdp, v);
    double delta = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      double value = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) value += policy.prob(s, a) * q[static_cast<std::size_t>(s) * mdp.n_actions + a];
      delta = std::max(delta, std::abs(value - v[s]));
      v[s] = value;
    }
    if (delta <= tol) break;
  }
  return v;
}

double expected_episode_return(const TabularMDP& mdp, const PolicyTable& policy, int horizon) {
  std::vector<double> dist = mdp.start_distribution;
  std::vector<double> next(mdp.n_states);
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (dist[s] == 0.0) continue;
      for (int a = 0; a < mdp.n_actions; ++a) {
        const double w = dist[s] * policy.prob(s, a);
        if (w == 0.0) continue;
        total += w * mdp.r(s, a);
        const auto row = mdp.row(s, a);
        for (int u = 0; u < mdp.n_states; ++u) next[u] += w * row[u];
      }
    }
    dist.swap(next);
  }
  return total;
}

PolicyTable mix_with_uniform(const PolicyTable& policy, double epsilon) {
  require(epsilon >= 0.0 && epsilon <= 1.0, ErrorKind::Parameter, "epsilon_noise must lie in [0, 1]");
  PolicyTable mixed = policy;
  for (auto& p : mixed.action_probs) p = (1.0 - epsilon) * p + epsilon / policy.n_actions;
  return mixed;
}

std::vector<Trajectory> collect_trajectories(const TabularMDP& mdp, const PolicyTable& policy, int n, int horizon,
                                             std::uint64_t seed, const CollectOptions& options) {
  require(horizon >= 1, ErrorKind::Parameter, "horizon must be >= 1");
  require(n >= 0, ErrorKind::Parameter, "episode count must be non-negative");
  require(policy.n_states == mdp.n_states && policy.n_actions == mdp.n_actions, ErrorKind::Shape,
          "policy table does not match the MDP");
  const PolicyTable behavior = mix_with_uniform(policy, options.epsilon_noise);
  std::vector<Trajectory> out(n);

  auto run_episode = [&](int k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    Trajectory traj;
    traj.user_id = options.user_prefix + std::to_string(k);
    int s = sample_categorical(rng, mdp.start_distribution);
    for (int t = 0; t < horizon; ++t) {
      const int a = sample_categorical(rng, policy_row(behavior, s));
      const double mean = mdp.r(s, a);
      const double reward = options.bernoulli_rewards ? (rng.bernoulli(mean) ? 1.0 : 0.0) : mean;
      traj.states.push_back(mdp.state_features[s]);
      traj.actions.push_back(a);
      traj.rewards.push_back(reward);
      s = sample_categorical(rng, mdp.row(s, a));
    }
    out[k] = std::move(traj);
  };

  const int workers = std::clamp(options.workers, 1, std::max(n, 1));
  if (workers == 1) {
    for (int k = 0; k < n; ++k) run_episode(k);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w)
      threads.emplace_back([&, w] {
        for (int k = w; k < n; k += workers) run_episode(k);
      });
    for (auto& th : threads) th.join();
  }
  return out;
}

std::vector<double> rollout_returns(const TabularMDP& mdp, const ActFn& act, int n_episodes, int horizon,
                                    std::uint64_t seed, const RolloutOptions& options) {
  require(horizon >= 1, ErrorKind::Parameter, "rollout horizon must be >= 1");
  require(n_episodes >= 1, ErrorKind::Parameter, "rollout needs at least one episode");
  std::vector<double> returns(n_episodes, 0.0);
  for (int k = 0; k < n_episodes; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k), 0x524F4C4C));
    History h;
    int s = sample_categorical(rng, mdp.start_distribution);
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) {
      h.states.push_back(s);
      h.observations.push_back(mdp.state_features[s]);
      const int a = act(h);
      require(a >= 0 && a < mdp.n_actions, ErrorKind::Evaluation,
              "policy returned invalid action " + std::to_string(a));
      const double mean = mdp.r(s, a);
      const double reward = options.bernoulli_rewards ? (rng.bernoulli(mean) ? 1.0 : 0.0) : mean;
      h.actions.push_back(a);
      h.rewards.push_back(reward);
      total += reward;
      s = sample_categorical(rng, mdp.row(s, a));
    }
    returns[k] = total;
  }
  return returns;
}

double rollout_policy(const TabularMDP& mdp, const ActFn& act, int n_episodes, int horizon, std::uint64_t seed,
                      const RolloutOptions& options) {
  const auto returns = rollout_returns(mdp, act, n_episodes, horizon, seed, options);
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
}

std::string mdp_to_json(const TabularMDP& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  nlohmann::json p = nlohmann::json::array();
  nlohmann::json r = nlohmann::json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    nlohmann::json ps = nlohmann::json::array();
    nlohmann::json rs = nlohmann::json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.row(s, a);
      ps.push_back(std::vector<double>(row.begin(), row.end()));
      rs.push_back(mdp.r(s, a));
    }
    p.push_back(std::move(ps));
    r.push_back(std::move(rs));
  }
  j["P"] = std::move(p);
  j["r"] = std::move(r);
  j["features"] = mdp.state_features;
  j["start_distribution"] = mdp.start_distribution;
  j["start_state"] = mdp.start_state;
  return j.dump();
}

TabularMDP mdp_from_json(const std::string& text) {
  TabularMDP mdp;
  try {
    const auto j = nlohmann::json::parse(text);
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    const auto p = j.at("P").get<std::vector<std::vector<std::vector<double>>>>();
    const auto r = j.at("r").get<std::vector<std::vector<double>>>();
    require(p.size() == static_cast<std::size_t>(mdp.n_states) && r.size() == p.size(), ErrorKind::Schema,
            "P/r do not match n_states");
    for (int s = 0; s < mdp.n_states; ++s) {
      require(p[s].size() == static_cast<std::size_t>(mdp.n_actions) && r[s].size() == p[s].size(),
              ErrorKind::Schema, "P/r do not match n_actions");
      for (int a = 0; a < mdp.n_actions; ++a) {
        require(p[s][a].size() == static_cast<std::size_t>(mdp.n_states), ErrorKind::Schema,
                "P row does not match n_states");
        mdp.transition.insert(mdp.transition.end(), p[s][a].begin(), p[s][a].end());
        mdp.reward.push_back(r[s][a]);
      }
    }
    mdp.state_features = j.at("features").get<std::vector<std::vector<double>>>();
    if (j.contains("start_distribution")) {
      mdp.start_distribution = j.at("start_distribution").get<std::vector<double>>();
    } else {
      mdp.start_distribution.assign(mdp.n_states, 1.0 / mdp.n_states);
    }
    mdp.start_state = j.value("start_state", 0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("MDP file: ") + e.what());
  }
  validate(mdp);
  return mdp;
}

void save_mdp(const std::filesystem::path& path, const TabularMDP& mdp) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Parameter, "cannot write " + path.string());
  out << mdp_to_json(mdp) << '\n';
}

TabularMDP load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Parse, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return mdp_from_json(buffer.str());
}

}  // namespace tadt::env
