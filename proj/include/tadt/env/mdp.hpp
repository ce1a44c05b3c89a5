#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tadt/trajectory.hpp"

namespace tadt::env {

/// Explicit (S, A, P, r, gamma) arrays plus the observation map.
/// `transition` is indexed [(s * n_actions + a) * n_states + s'].
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.9;
  std::vector<double> transition;
  std::vector<double> reward;                       // [s * n_actions + a], in [0, 1]
  std::vector<std::vector<double>> state_features;  // n_states x d_s
  std::vector<double> start_distribution;           // episodes start here
  int start_state = 0;                              // designated state for value comparisons

  double p(int s, int a, int s_next) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next];
  }
  double& p(int s, int a, int s_next) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next];
  }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  std::span<const double> row(int s, int a) const {
    return {transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
            static_cast<std::size_t>(n_states)};
  }
  int d_s() const { return state_features.empty() ? 0 : static_cast<int>(state_features.front().size()); }
};

/// n_states x n_actions action distribution.
struct PolicyTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> action_probs;

  double prob(int s, int a) const { return action_probs[static_cast<std::size_t>(s) * n_actions + a]; }
  double& prob(int s, int a) { return action_probs[static_cast<std::size_t>(s) * n_actions + a]; }

  static PolicyTable uniform(int n_states, int n_actions);
  static PolicyTable deterministic(std::span<const int> actions, int n_actions);
};

/// Throws Parameter on any violated stochastic-matrix / reward-range invariant.
void validate(const TabularMDP& mdp);
void validate(const PolicyTable& policy);

/// Random MDP: each (s, a) row has ceil(sparsity * n_states) reachable
/// successors with Dirichlet(1) weights; rewards U[0, 1]; features are a
/// fixed random linear embedding of the one-hot state.
TabularMDP make_random_mdp(std::uint64_t seed, int n_states, int n_actions, int d_s, double sparsity,
                           double gamma = 0.9);

struct StitchingProblem {
  TabularMDP mdp;
  PolicyTable behavior_a;  // competent in the first region only
  PolicyTable behavior_b;  // competent in the second region only
  int first_region_size = 0;
};

/// Two-region MDP. Episodes start in region one and drift into the absorbing
/// region two; each region has its own per-state rewarding action, so the
/// optimal policy switches behaviour at the boundary.
StitchingProblem make_stitching_mdp(std::uint64_t seed, int d_s = 20);

struct SolveResult {
  std::vector<double> values;
  PolicyTable greedy;
  std::vector<int> greedy_actions;  // argmax action per state
  int iterations = 0;
};

/// Value iteration until the sup-norm step is <= tol; greedy ties go to the
/// lowest action id.
SolveResult value_iteration(const TabularMDP& mdp, double tol = 1e-10, int max_iterations = 1'000'000);

/// Fixed point of the Bellman expectation operator within tol.
std::vector<double> policy_evaluation(const TabularMDP& mdp, const PolicyTable& policy, double tol = 1e-10,
                                      int max_iterations = 1'000'000);

/// Q(s, a) = r(s, a) + gamma * sum_s' P(s'|s,a) V(s').
std::vector<double> q_from_values(const TabularMDP& mdp, std::span<const double> values);

/// Greedy (lowest-index tie break) policy from a Q table.
PolicyTable greedy_from_q(std::span<const double> q, int n_states, int n_actions);

/// Exact expected undiscounted return of `policy` over `horizon` steps from
/// the start distribution.
double expected_episode_return(const TabularMDP& mdp, const PolicyTable& policy, int horizon);

/// (1 - epsilon) * policy + epsilon * uniform.
PolicyTable mix_with_uniform(const PolicyTable& policy, double epsilon);

struct CollectOptions {
  double epsilon_noise = 0.0;
  bool bernoulli_rewards = true;  // false emits the mean reward r(s, a)
  int workers = 1;
  std::string user_prefix = "u";
};

/// Samples `n` episodes of `horizon` steps. Episode k draws from its own RNG
/// stream derived from (seed, k), so output is identical for any worker count.
std::vector<Trajectory> collect_trajectories(const TabularMDP& mdp, const PolicyTable& policy, int n, int horizon,
                                             std::uint64_t seed, const CollectOptions& options = {});

struct History {
  std::vector<int> states;  // state ids visited so far, including the current one
  std::vector<std::vector<double>> observations;
  std::vector<int> actions;
  std::vector<double> rewards;
};

/// Called with the history up to and including the current state; returns an
/// action id.
using ActFn = std::function<int(const History&)>;

struct RolloutOptions {
  bool bernoulli_rewards = true;
};

/// Mean undiscounted episode return of `act` over n_episodes.
double rollout_policy(const TabularMDP& mdp, const ActFn& act, int n_episodes, int horizon, std::uint64_t seed,
                      const RolloutOptions& options = {});

/// Per-episode returns (same streams as rollout_policy).
std::vector<double> rollout_returns(const TabularMDP& mdp, const ActFn& act, int n_episodes, int horizon,
                                    std::uint64_t seed, const RolloutOptions& options = {});

std::string mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const std::string& text);
void save_mdp(const std::filesystem::path& path, const TabularMDP& mdp);
TabularMDP load_mdp(const std::filesystem::path& path);

}  // namespace tadt::env
