#include "tadt/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "tadt/error.hpp"

namespace tadt {

namespace {

void check_gamma(double gamma) {
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma <= 1.0, ErrorKind::Parameter,
          "gamma must lie in [0, 1], got " + std::to_string(gamma));
}

}  // namespace

std::vector<double> compute_rtg(std::span<const double> rewards, double gamma) {
  check_gamma(gamma);
  require(!rewards.empty(), ErrorKind::EmptyTrajectory, "reward sequence is empty");
  std::vector<double> rtg(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    require(std::isfinite(rewards[t]), ErrorKind::Parameter, "non-finite reward at t=" + std::to_string(t));
    running = rewards[t] + gamma * running;
    rtg[t] = running;
  }
  return rtg;
}

std::vector<double> compute_ta(std::span<const double> rtg, double gamma) {
  check_gamma(gamma);
  std::vector<double> ta(rtg.size(), 0.0);
  for (std::size_t t = 1; t < rtg.size(); ++t) ta[t] = gamma * ta[t - 1] + (rtg[t] - rtg[t - 1]);
  return ta;
}

std::vector<double> compute_ta(std::span<const double> rtg, double gamma, std::size_t expected_length) {
  require(rtg.size() == expected_length, ErrorKind::Shape,
          "rtg has " + std::to_string(rtg.size()) + " entries, trajectory has " + std::to_string(expected_length));
  return compute_ta(rtg, gamma);
}

void validate_trajectory(const Trajectory& traj, int d_s, int m) {
  const std::size_t T = traj.actions.size();
  require(T >= 1, ErrorKind::EmptyTrajectory, "trajectory '" + traj.user_id + "' is empty");
  require(traj.states.size() == T && traj.rewards.size() == T, ErrorKind::Shape,
          "trajectory '" + traj.user_id + "': states/actions/rewards lengths differ (" +
              std::to_string(traj.states.size()) + "/" + std::to_string(T) + "/" +
              std::to_string(traj.rewards.size()) + ")");
  for (std::size_t t = 0; t < T; ++t) {
    if (d_s > 0) {
      require(traj.states[t].size() == static_cast<std::size_t>(d_s), ErrorKind::Schema,
              "trajectory '" + traj.user_id + "': state at t=" + std::to_string(t) + " has dimension " +
                  std::to_string(traj.states[t].size()) + ", expected " + std::to_string(d_s));
    }
    for (double x : traj.states[t]) require(std::isfinite(x), ErrorKind::Parameter, "non-finite state feature");
    require(traj.actions[t] >= 0 && (m <= 0 || traj.actions[t] < m), ErrorKind::Label,
            "trajectory '" + traj.user_id + "': action " + std::to_string(traj.actions[t]) + " out of range");
    require(std::isfinite(traj.rewards[t]), ErrorKind::Parameter, "non-finite reward");
  }
}

void attach_return_signals(Trajectory& traj, double gamma) {
  validate_trajectory(traj, -1, -1);
  const auto rtg = compute_rtg(traj.rewards, gamma);
  const auto ta = compute_ta(rtg, gamma, traj.length());
  traj.signals.resize(rtg.size());
  for (std::size_t t = 0; t < rtg.size(); ++t) traj.signals[t] = {rtg[t], ta[t]};
}

void fit_return_normalization(std::span<const Trajectory> trajectories, DatasetMeta& meta) {
  std::array<double, 2> sum{0.0, 0.0};
  std::array<double, 2> sum_sq{0.0, 0.0};
  double count = 0.0;
  for (const auto& traj : trajectories) {
    for (const auto& sig : traj.signals) {
      sum[0] += sig.rtg;
      sum[1] += sig.ta;
      sum_sq[0] += sig.rtg * sig.rtg;
      sum_sq[1] += sig.ta * sig.ta;
      count += 1.0;
    }
  }
  for (int c = 0; c < 2; ++c) {
    if (count == 0.0) {
      meta.return_mean[c] = 0.0;
      meta.return_std[c] = 1.0;
      continue;
    }
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sum_sq[c] / count - mean * mean);
    meta.return_mean[c] = mean;
    // A degenerate component (e.g. TA under a constant-return dataset) keeps unit scale.
    meta.return_std[c] = std::sqrt(var) > 1e-8 ? std::sqrt(var) : 1.0;
  }
}

std::vector<Trajectory> chunk_trajectories(std::span<const Trajectory> trajectories, std::size_t chunk_length,
                                           double gamma) {
  require(chunk_length >= 1, ErrorKind::Parameter, "chunk length must be positive");
  std::vector<Trajectory> chunks;
  for (const auto& traj : trajectories) {
    const std::size_t T = traj.length();
    for (std::size_t begin = 0, index = 0; begin < T; begin += chunk_length, ++index) {
      const std::size_t end = std::min(T, begin + chunk_length);
      Trajectory piece;
      piece.user_id = traj.user_id + "#" + std::to_string(index);
      piece.states.assign(traj.states.begin() + begin, traj.states.begin() + end);
      piece.actions.assign(traj.actions.begin() + begin, traj.actions.begin() + end);
      piece.rewards.assign(traj.rewards.begin() + begin, traj.rewards.begin() + end);
      attach_return_signals(piece, gamma);
      chunks.push_back(std::move(piece));
    }
  }
  return chunks;
}

}  // namespace tadt
