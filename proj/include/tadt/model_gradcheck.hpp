#pragma once

#include <string>
#include <vector>

#include "tadt/model.hpp"
#include "tadt/nn/gradcheck.hpp"

namespace tadt {

struct LossGradcheck {
  std::string loss;  // action, rank, return, reward, transition, reg, total
  nn::GradcheckReport report;
};

struct ModelGradcheck {
  std::string precision;
  double tolerance = 0.0;
  std::vector<LossGradcheck> losses;
  bool passed = false;
};

/// Tiny configuration (T=2, m=3, M=4, d=8) with the soft assignment path.
TrainConfig gradcheck_config(std::uint64_t seed = 0);

/// Meta for the tiny configuration, with non-trivial normalization statistics.
ModelMeta gradcheck_meta();

/// Random annotated windows (continuous rewards) of `length` steps for the given meta.
std::vector<Window> random_windows(const ModelMeta& meta, std::size_t count, std::size_t length, std::uint64_t seed);

/// Checks the analytic gradient of every loss component the configuration
/// builds (and the total) against central differences over all parameters.
/// In single precision the
/// analytic gradient comes from the float model and the reference from a
/// double model holding the same values.
ModelGradcheck gradcheck_model(const TrainConfig& config, const ModelMeta& meta, const std::vector<Window>& windows,
                               bool single_precision, double tolerance, double step = 1e-6);

}  // namespace tadt
