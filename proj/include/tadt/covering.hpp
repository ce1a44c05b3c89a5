#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tadt/nn/tensor.hpp"
#include "tadt/rng.hpp"

namespace tadt {

/// k-means++ seeding followed by Lloyd iterations. When `initial` has rows,
/// they are kept as the first centers and the rest are seeded by D^2 sampling.
/// Empty clusters keep their previous center.
nn::Tensor<double> fit_kmeans(const nn::Tensor<double>& points, int k, std::uint64_t seed, int iterations = 50,
                              const nn::Tensor<double>* initial = nullptr);

/// max over probe points of the distance to the nearest code.
double covering_radius(const nn::Tensor<double>& codebook, const nn::Tensor<double>& probes);

/// Probe set for [0,1]^d: an inclusive grid of `resolution` points per axis
/// for d <= 2, otherwise `samples` uniform points.
nn::Tensor<double> unit_cube_probes(int d, int resolution, int samples, std::uint64_t seed);

struct CoveringOptions {
  int training_points = 20000;
  int iterations = 50;
  int grid_resolution = 400;
  int probe_samples = 200000;
  bool nested = false;  // each codebook starts from the previous one's codes
};

struct CoveringResult {
  int d = 0;
  std::vector<int> sizes;
  std::vector<double> radii;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool degenerate = false;  // a radius was non-positive/non-finite or sizes did not increase
  std::string warning;

  std::string to_csv() const;
};

/// Fits codebooks of each size to uniform data on [0,1]^d and regresses
/// log radius on log size. Needs at least four increasing sizes.
CoveringResult covering_radius_scaling(int d, std::span<const int> sizes, std::uint64_t seed,
                                       const CoveringOptions& options = {});

}  // namespace tadt
