#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tadt/config.hpp"
#include "tadt/dataset.hpp"
#include "tadt/env/mdp.hpp"
#include "tadt/generate.hpp"

namespace tadt {

/// Wraps raw trajectories of an MDP into an un-annotated dataset.
Dataset dataset_from(const env::TabularMDP& mdp, std::vector<Trajectory> trajectories);

struct StitchingOptions {
  std::uint64_t env_seed = 1;
  int episodes_per_behavior = 50;
  int horizon = 200;
  double epsilon_noise = 0.1;
  int eval_episodes = 10;
  int eval_points = 5;  // rollout evaluations along training, the last one at the end
};

struct StitchingCurvePoint {
  int chunk_length = 0;
  long step = 0;
  double mean_return = 0.0;
  double normalized_return = 0.0;  // mean_return / optimal expected return
};

struct StitchingResult {
  double optimal_return = 0.0;  // exact expected undiscounted return of pi* over the horizon
  double behavior_a_return = 0.0;
  double behavior_b_return = 0.0;
  std::vector<int> chunk_lengths;
  std::vector<std::size_t> transitions;  // per chunk length; identical by construction
  std::vector<StitchingCurvePoint> curve;

  double best_behavior_normalized() const;
  /// Normalized return at the last evaluation for `chunk_length`.
  double final_normalized(int chunk_length) const;
  std::string to_csv() const;  // chunk_length,step,mean_return,normalized_return
};

/// Collects behaviour data from both stitching policies, re-chunks it for
/// every chunk length, trains from scratch on each and tracks rollout return.
/// Generation restarts its context every chunk_length steps unless the
/// configuration sets rtg_reanchor.
StitchingResult stitching_experiment(const TrainConfig& config, std::span<const int> chunk_lengths,
                                     const StitchingOptions& options = {});

struct Variant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// full, no_tac, no_tac+no_ctp, no_tac+no_ctp+no_rp, no_csa, no_csa+no_ta.
std::vector<Variant> ablation_variants();
TrainConfig apply_variant(TrainConfig config, const Variant& variant);

struct VariantScore {
  std::string name;
  double mean_return = 0.0;
};

/// Trains every variant on the same prepared dataset and scores it by mean
/// rollout return on `mdp`.
std::vector<VariantScore> compare_variants(const TrainConfig& base, std::span<const Variant> variants,
                                           const Dataset& prepared, const env::TabularMDP& mdp, int eval_episodes,
                                           int horizon, std::uint64_t eval_seed);

/// Codebook usage perplexity of the trained model over every step of the
/// dataset (exp of the entropy of the mean assignment distribution).
double trained_usage_perplexity(const TrainConfig& config, const Dataset& prepared);

}  // namespace tadt
