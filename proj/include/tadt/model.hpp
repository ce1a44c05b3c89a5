#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tadt/config.hpp"
#include "tadt/dataset.hpp"
#include "tadt/nn/adam.hpp"
#include "tadt/nn/checkpoint.hpp"
#include "tadt/nn/layers.hpp"
#include "tadt/nn/tape.hpp"
#include "tadt/rank.hpp"

namespace tadt {

/// A contiguous slice of one annotated trajectory, at most T_max steps long.
struct Window {
  std::vector<std::vector<double>> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<ReturnSignal> signals;
  bool starts_episode = true;  // first step is the trajectory's first step

  std::size_t length() const { return actions.size(); }
};

/// Splits annotated trajectories into consecutive windows of T_max steps.
std::vector<Window> make_windows(std::span<const Trajectory> trajectories, int T_max);

/// Normalization and range statistics carried with a model.
struct ModelMeta {
  int d_s = 1;
  int m = 1;
  double gamma = 1.0;
  std::array<double, 2> return_mean{0.0, 0.0};
  std::array<double, 2> return_std{1.0, 1.0};
  double rtg_min = 0.0;
  double rtg_max = 0.0;
};

ModelMeta model_meta_from(const Dataset& dataset);

struct ForwardOptions {
  bool training = true;   // Gumbel noise and straight-through hardening; otherwise argmax codes
  bool losses = true;     // build the loss graph
  double tau = 1.0;
  std::uint64_t noise_seed = 0;
  std::vector<nn::Tensor<double>>* attention = nullptr;  // receives attention weights when set
};

/// Weighted loss contributions; total is their sum.
struct LossBreakdown {
  double total = 0, action = 0, rank = 0, ret = 0, reward = 0, transition = 0, reg = 0;
};

struct ForwardResult {
  nn::Var total, action, rank, ret, reward, transition, reg;  // weighted, invalid when not built
  LossBreakdown values;
  std::vector<std::size_t> offsets;  // first row of each window
  std::vector<int> codes;            // code id per row (-1 without quantization)
  nn::Var action_logits;             // N x m
  nn::Var return_pred;               // N x 2, standardized
  nn::Var assign_probs;              // N x M (invalid without quantization)
  nn::Var assignment;                // N x M rows that read the codebook
  nn::Var embeddings;                // N x d state-encoder outputs
  std::size_t rank_pairs = 0;
};

/// The full policy: state encoder, TA-conditioned quantizer, return/action
/// encoders, causal transformer, action/return heads and the RP/CTP heads.
template <typename Real>
class TadtCsaModel {
 public:
  TadtCsaModel(const TrainConfig& config, const ModelMeta& meta);

  const TrainConfig& config() const { return config_; }
  const ModelMeta& meta() const { return meta_; }
  nn::ParameterSet<Real>& parameters() { return params_; }
  std::vector<nn::Parameter<Real>*> parameter_list() const { return params_.all(); }

  /// Builds the forward graph (and losses) for a batch of windows on `tape`.
  ForwardResult forward(nn::Tape<Real>& tape, std::span<const Window> windows, const ForwardOptions& options) const;

  /// Loss values only.
  LossBreakdown evaluate_losses(std::span<const Window> windows, const ForwardOptions& options) const;

  /// Per-step action logits and return predictions without noise.
  struct Inference {
    nn::Tensor<double> action_logits;  // N x m
    nn::Tensor<double> return_pred;    // N x 2, de-standardized [rtg, ta]
    nn::Tensor<double> assign_probs;   // N x M (empty under no_csa)
    std::vector<int> codes;
    std::vector<std::size_t> offsets;
    std::vector<nn::Tensor<double>> attention;
  };
  Inference infer(std::span<const Window> windows, bool capture_attention = false) const;

  /// Encoder outputs e = f(s) for raw state vectors (rows).
  nn::Tensor<double> encode_states(const std::vector<std::vector<double>>& states) const;
  /// Code distribution with a zero TA embedding (the abstraction used at episode start).
  nn::Tensor<double> code_probs(const std::vector<std::vector<double>>& states) const;
  /// Reward-head prediction for every (code, action).
  nn::Tensor<double> reward_table() const;  // M x m
  /// CTP logits over next codes for every (code, action): row (c * m + a).
  nn::Tensor<double> transition_logits() const;  // (M*m) x M
  nn::Tensor<double> codebook() const;

  nn::CheckpointData to_checkpoint(const nn::AdamState<Real>* adam = nullptr,
                                   const nlohmann::ordered_json& extra = {}) const;
  /// Loads parameters (and Adam moments when `adam` is given) from `data`.
  void load_checkpoint(const nn::CheckpointData& data, nn::AdamState<Real>* adam = nullptr);

  double standardize(double value, int component) const;
  double destandardize(double value, int component) const;

 private:
  TrainConfig config_;
  ModelMeta meta_;
  nn::ParameterSet<Real> params_;
  nn::ReluMlp<Real> state_encoder_;
  nn::Dense<Real> ta_embedder_;
  nn::Parameter<Real>* codebook_ = nullptr;
  nn::Dense<Real> rtg_embed_, ta_embed_;
  nn::ReluMlp<Real> return_encoder_;
  nn::Embedding<Real> item_emb_;
  nn::Dense<Real> action_encoder_;
  nn::Embedding<Real> pos_emb_;
  std::vector<nn::CausalSelfAttentionBlock<Real>> blocks_;
  nn::LayerNorm<Real> final_norm_;
  nn::Dense<Real> action_head_;
  nn::Parameter<Real>* return_start_ = nullptr;
  nn::ReluMlp<Real> return_head_;
  nn::ReluMlp<Real> rp_net_;
  nn::ReluMlp<Real> ctp_net_;
};

extern template class TadtCsaModel<float>;
extern template class TadtCsaModel<double>;

/// Reads the model configuration and meta out of a checkpoint.
TrainConfig checkpoint_config(const nn::CheckpointData& data);
ModelMeta checkpoint_meta(const nn::CheckpointData& data);

}  // namespace tadt
