#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tadt/config.hpp"
#include "tadt/dataset.hpp"
#include "tadt/model.hpp"
#include "tadt/nn/adam.hpp"

namespace tadt {

struct RunLogRow {
  long step = 0;
  LossBreakdown loss;
  double lr = 0.0;
  double tau = 0.0;
};

struct RunMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version;
  std::string precision;
};

/// Append-only per-step training record.
class RunLog {
 public:
  RunMeta meta;

  void append(const RunLogRow& row);
  const std::vector<RunLogRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  std::string meta_json() const;

  static constexpr const char* kHeader = "step,loss_total,loss_a,loss_rank,loss_R,loss_r,loss_c,loss_reg,lr,tau";

 private:
  std::vector<RunLogRow> rows_;
};

template <typename Real>
struct TrainResult {
  std::unique_ptr<TadtCsaModel<Real>> model;
  nn::AdamState<Real> adam;
  RunLog log;
  long steps = 0;
};

template <typename Real>
struct TrainHooks {
  /// Called after every `checkpoint_every` steps (and never for step 0).
  std::function<void(long step, const TadtCsaModel<Real>&, const nn::AdamState<Real>&)> on_checkpoint;
  /// Directory for checkpoint files and metrics.csv; nothing is written when empty.
  std::filesystem::path out_dir;
};

/// Resolves the gamma override, annotates and normalizes the dataset in place.
void prepare_for_training(Dataset& dataset, const TrainConfig& config);

/// Number of optimizer steps the configuration will run on `n_windows` windows.
long planned_steps(const TrainConfig& config, std::size_t n_windows);

/// Minimizes the total loss with Adam over shuffled mini-batches of windows.
/// Aborts with a NonFinite error naming the batch and loss components when
/// the loss stops being finite.
template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& dataset, const TrainHooks<Real>& hooks = {});

extern template TrainResult<float> train<float>(const TrainConfig&, const Dataset&, const TrainHooks<float>&);
extern template TrainResult<double> train<double>(const TrainConfig&, const Dataset&, const TrainHooks<double>&);

template <typename Real>
void save_model(const std::filesystem::path& path, const TadtCsaModel<Real>& model,
                const nn::AdamState<Real>* adam = nullptr);

/// Rebuilds a model from a checkpoint file.
template <typename Real>
std::unique_ptr<TadtCsaModel<Real>> load_model(const std::filesystem::path& path, nn::AdamState<Real>* adam = nullptr);

template <typename Real>
std::unique_ptr<TadtCsaModel<Real>> model_from_checkpoint(const nn::CheckpointData& data,
                                                           nn::AdamState<Real>* adam = nullptr);

}  // namespace tadt
