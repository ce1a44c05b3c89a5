#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tadt {

/// Per-timestep conditioning pair [RTG, TA].
struct ReturnSignal {
  double rtg = 0.0;
  double ta = 0.0;

  bool operator==(const ReturnSignal&) const = default;
};

/// One user's interaction sequence. `signals` is empty until
/// attach_return_signals() fills it.
struct Trajectory {
  std::string user_id;
  std::vector<std::vector<double>> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<ReturnSignal> signals;

  std::size_t length() const { return actions.size(); }
  bool annotated() const { return !signals.empty() && signals.size() == actions.size(); }
};

struct DatasetMeta {
  double gamma = 1.0;
  int d_s = 1;
  int m = 1;
  // Standardization statistics for [RTG, TA]; std is 1 until fitted.
  std::array<double, 2> return_mean{0.0, 0.0};
  std::array<double, 2> return_std{1.0, 1.0};
};

/// output[t] = sum_{i>=t} gamma^(i-t) * rewards[i].
std::vector<double> compute_rtg(std::span<const double> rewards, double gamma);

/// Discounted accumulation of successive RTG differences. The first entry is
/// the empty sum (0); afterwards ta[t] = gamma * ta[t-1] + (rtg[t] - rtg[t-1]).
std::vector<double> compute_ta(std::span<const double> rtg, double gamma);

/// Same as compute_ta but checks the RTG sequence belongs to a trajectory of
/// `expected_length` steps.
std::vector<double> compute_ta(std::span<const double> rtg, double gamma, std::size_t expected_length);

/// Validates `traj` against d_s/m and fills traj.signals. Idempotent.
void attach_return_signals(Trajectory& traj, double gamma);

/// Checks the Trajectory invariants; m <= 0 / d_s <= 0 skip those checks.
void validate_trajectory(const Trajectory& traj, int d_s, int m);

/// Fits per-component mean/std of [RTG, TA] over every annotated timestep.
void fit_return_normalization(std::span<const Trajectory> trajectories, DatasetMeta& meta);

/// Splits each trajectory into consecutive pieces of at most `chunk_length`
/// steps and re-annotates each piece as a standalone trajectory.
std::vector<Trajectory> chunk_trajectories(std::span<const Trajectory> trajectories, std::size_t chunk_length,
                                           double gamma);

}  // namespace tadt
