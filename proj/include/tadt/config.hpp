#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tadt/csa.hpp"

namespace tadt {

/// Every tunable of a run. Field names double as config-file keys.
struct TrainConfig {
  // Optimization.
  double lr = 5e-3;
  int batch_size = 128;
  int epochs = 50;
  int max_steps = 0;  // 0: no cap beyond epochs
  double grad_clip = 1.0;
  int checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // Architecture.
  int hidden_dim = 64;
  int codebook_size = 64;
  int T_max = 30;
  int n_layers = 2;
  int n_heads = 2;
  double gamma = -1.0;  // negative: use the dataset's gamma

  // Loss weights.
  double lambda1 = 1.0;  // rank
  double lambda2 = 1.0;  // return prediction
  double lambda3 = 1.0;  // reward prediction
  double lambda4 = 1.0;  // contrastive transition
  double lambda5 = 0.1;  // entropy regularizer

  // Quantizer and ranking.
  double alpha = 0.7;
  double beta = 0.5;
  double delta = 0.3;
  double bin_width = 0.1;
  int k_neg = 4;
  double tau_start = 1.0;
  double tau_end = 0.3;
  std::string reg_mode = "per_sample";
  std::string ctp_denominator = "with_positive";
  std::string reduction = "mean";
  bool hard_assign = true;
  bool ctp_stop_grad = true;  // CTP targets and negatives do not backpropagate into the encoder/codebook
  int rank_pair_cap = 256;
  bool rank_loss = true;

  // Ablations.
  bool no_tac = false;
  bool no_ctp = false;
  bool no_rp = false;
  bool no_csa = false;
  bool no_ta = false;

  // Run control.
  std::uint64_t seed = 0;
  std::string precision = "single";
  bool deterministic = true;
  int workers = 1;

  // Generation.
  std::string decode = "greedy";
  std::string gen_mode = "rtg_decrement";
  double target_return = -1.0;  // negative: dataset max RTG
  bool clamp_rtg = true;
  int rtg_reanchor = 0;  // generation: restart context and RTG every n steps (0 = never)

  double effective_alpha() const { return no_tac ? 1.0 : alpha; }
  double effective_lambda1() const { return rank_loss && !no_csa ? lambda1 : 0.0; }
  double effective_lambda3() const { return no_rp || no_csa ? 0.0 : lambda3; }
  double effective_lambda4() const { return no_ctp || no_csa ? 0.0 : lambda4; }
  double effective_lambda5() const { return no_csa ? 0.0 : lambda5; }
  csa::RegMode reg_mode_enum() const { return csa::parse_reg_mode(reg_mode); }
  csa::CtpDenominator ctp_denominator_enum() const { return csa::parse_ctp_denominator(ctp_denominator); }
  csa::Reduction reduction_enum() const { return csa::parse_reduction(reduction); }

  /// Throws Parameter on any invalid or inconsistent value.
  void validate() const;

  /// Sets one field from text; throws Parameter on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  /// Stable 64-bit hash of the resolved configuration.
  std::uint64_t hash() const;

  /// Gumbel temperature at `step` of `total_steps` (exponential anneal).
  double tau_at(long step, long total_steps) const;

  static std::vector<std::string> keys();
};

/// Reads a JSON object or flat `key = value` lines (# starts a comment).
TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config_text(const std::string& text);

/// Applies `key=value` overrides in order.
void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides);

/// Small configuration used by tests and the desk experiments.
TrainConfig desk_config();

}  // namespace tadt
