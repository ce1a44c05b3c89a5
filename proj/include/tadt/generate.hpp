#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tadt/env/mdp.hpp"
#include "tadt/model.hpp"

namespace tadt {

enum class GenMode { RtgDecrement, ModelPredicted };
GenMode parse_gen_mode(const std::string& text);

struct GenerateOptions {
  GenMode mode = GenMode::RtgDecrement;
  double target_return = -1.0;  // negative: the model's dataset max RTG
  bool greedy = true;
  bool clamp_rtg = true;  // keep conditioning RTGs inside the training range
  std::uint64_t seed = 0;
  /// > 0: every this many steps the context restarts and RTG/TA are reset to
  /// the target, mirroring training data chunked to that length.
  int reanchor_every = 0;
};

GenerateOptions generate_options_from(const TrainConfig& config);

struct GeneratedStep {
  int t = 0;
  int action = 0;
  double rtg = 0.0;
  double ta = 0.0;
};

/// Autoregressive decoding state for one model. The returned act function
/// keeps per-episode conditioning state and detects a new episode from an
/// empty action history. Not thread-safe.
template <typename Real>
class ModelAgent {
 public:
  ModelAgent(const TadtCsaModel<Real>& model, GenerateOptions options);

  /// Action for the current step of `history`.
  int act(const env::History& history);
  env::ActFn as_act_fn();
  /// Steps emitted in the current episode.
  const std::vector<GeneratedStep>& steps() const { return steps_; }

 private:
  void advance_returns(const env::History& history);
  std::size_t context_start(std::size_t t) const;

  const TadtCsaModel<Real>* model_;
  GenerateOptions options_;
  std::vector<double> rtg_, ta_;
  std::vector<GeneratedStep> steps_;
  std::uint64_t episode_ = 0;
  Rng rng_;
};

extern template class ModelAgent<float>;
extern template class ModelAgent<double>;

struct GeneratedEpisode {
  std::vector<GeneratedStep> steps;
  std::vector<int> states;
  std::vector<double> rewards;
  double total_reward = 0.0;
};

/// One episode of `horizon` steps in `mdp`; horizon 0 yields an empty episode.
template <typename Real>
GeneratedEpisode generate_episode(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp,
                                  const GenerateOptions& options, int horizon, std::uint64_t env_seed);

/// Mean undiscounted return of the model over n episodes.
template <typename Real>
double model_rollout_return(const TadtCsaModel<Real>& model, const env::TabularMDP& mdp,
                            const GenerateOptions& options, int n_episodes, int horizon, std::uint64_t seed);

/// JSONL lines {"t","action","rtg","ta"}.
std::string generated_to_jsonl(const std::vector<GeneratedStep>& steps);

}  // namespace tadt
