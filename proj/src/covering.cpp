#include "tadt/covering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "tadt/error.hpp"
#include "tadt/stats.hpp"

namespace tadt {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::size_t nearest(const nn::Tensor<double>& codebook, std::span<const double> x, double* best_out = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < codebook.rows; ++k) {
    const double d = sq_dist(codebook.row(k), x);
    if (d < best_d) best_d = d, best = k;
  }
  if (best_out) *best_out = best_d;
  return best;
}

}  // namespace

nn::Tensor<double> fit_kmeans(const nn::Tensor<double>& points, int k, std::uint64_t seed, int iterations,
                              const nn::Tensor<double>* initial) {
  require(k >= 1, ErrorKind::Parameter, "k-means needs k >= 1");
  require(points.rows >= static_cast<std::size_t>(k), ErrorKind::Parameter, "k-means needs at least k points");
  const std::size_t d = points.cols, n = points.rows;
  Rng rng(seed);
  nn::Tensor<double> centers(static_cast<std::size_t>(k), d);
  std::size_t have = 0;
  if (initial != nullptr && initial->rows > 0) {
    require(initial->cols == d && initial->rows <= static_cast<std::size_t>(k), ErrorKind::Shape,
            "initial centers do not fit the requested codebook");
    std::copy(initial->data.begin(), initial->data.end(), centers.data.begin());
    have = initial->rows;
  } else {
    const auto first = points.row(static_cast<std::size_t>(rng.index(static_cast<int>(n))));
    std::copy(first.begin(), first.end(), centers.row(0).begin());
    have = 1;
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < have; ++c) dist[i] = std::min(dist[i], sq_dist(points.row(i), centers.row(c)));
  for (; have < static_cast<std::size_t>(k); ++have) {
    std::discrete_distribution<std::size_t> pick(dist.begin(), dist.end());
    const auto chosen = points.row(pick(rng.engine()));
    std::copy(chosen.begin(), chosen.end(), centers.row(have).begin());
    for (std::size_t i = 0; i < n; ++i) dist[i] = std::min(dist[i], sq_dist(points.row(i), centers.row(have)));
  }

  std::vector<std::size_t> assign(n, 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = nearest(centers, points.row(i));
      if (c != assign[i]) changed = true;
      assign[i] = c;
    }
    if (!changed) break;
    nn::Tensor<double> sums(static_cast<std::size_t>(k), d);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < d; ++j) sums(assign[i], j) += points(i, j);
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
      if (counts[c] > 0)
        for (std::size_t j = 0; j < d; ++j) centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
  }
  return centers;
}

double covering_radius(const nn::Tensor<double>& codebook, const nn::Tensor<double>& probes) {
  require(codebook.rows > 0 && codebook.cols == probes.cols, ErrorKind::Shape, "codebook and probes disagree");
  double worst = 0;
  for (std::size_t i = 0; i < probes.rows; ++i) {
    double d2 = 0;
    nearest(codebook, probes.row(i), &d2);
    worst = std::max(worst, d2);
  }
  return std::sqrt(worst);
}

nn::Tensor<double> unit_cube_probes(int d, int resolution, int samples, std::uint64_t seed) {
  require(d >= 1, ErrorKind::Parameter, "dimension must be >= 1");
  if (d <= 2) {
    require(resolution >= 2, ErrorKind::Parameter, "grid resolution must be >= 2");
    const std::size_t r = static_cast<std::size_t>(resolution);
    const std::size_t n = d == 1 ? r : r * r;
    nn::Tensor<double> g(n, static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < n; ++i) {
      g(i, 0) = static_cast<double>(i % r) / static_cast<double>(r - 1);
      if (d == 2) g(i, 1) = static_cast<double>(i / r) / static_cast<double>(r - 1);
    }
    return g;
  }
  Rng rng(seed);
  nn::Tensor<double> p(static_cast<std::size_t>(samples), static_cast<std::size_t>(d));
  for (auto& x : p.data) x = rng.uniform();
  return p;
}

std::string CoveringResult::to_csv() const {
  std::ostringstream out;
  out << "codebook_size,covering_radius\n";
  char buf[96];
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.9g\n", sizes[i], radii[i]);
    out << buf;
  }
  return out.str();
}

CoveringResult covering_radius_scaling(int d, std::span<const int> sizes, std::uint64_t seed,
                                       const CoveringOptions& options) {
  require(sizes.size() >= 4, ErrorKind::Parameter, "covering scaling needs at least four codebook sizes");
  CoveringResult res;
  res.d = d;
  res.sizes.assign(sizes.begin(), sizes.end());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    require(sizes[i] >= 1, ErrorKind::Parameter, "codebook sizes must be >= 1");
    if (i > 0 && sizes[i] <= sizes[i - 1]) {
      res.degenerate = true;
      res.warning = "codebook sizes are not increasing";
    }
  }
  Rng rng(derive_seed(seed, 0x44415441ULL));
  nn::Tensor<double> train(static_cast<std::size_t>(options.training_points), static_cast<std::size_t>(d));
  for (auto& x : train.data) x = rng.uniform();
  const auto probes = unit_cube_probes(d, options.grid_resolution, options.probe_samples, derive_seed(seed, 0x50524F42ULL));

  nn::Tensor<double> previous;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const bool reuse = options.nested && previous.rows > 0 && previous.rows <= static_cast<std::size_t>(sizes[i]);
    const auto codebook = fit_kmeans(train, sizes[i], derive_seed(seed, 0x4B4D45414EULL, i), options.iterations,
                                     reuse ? &previous : nullptr);
    const double r = covering_radius(codebook, probes);
    res.radii.push_back(r);
    if (!(r > 0) || !std::isfinite(r)) {
      res.degenerate = true;
      res.warning = "non-positive or non-finite covering radius";
    } else {
      lx.push_back(std::log(static_cast<double>(sizes[i])));
      ly.push_back(std::log(r));
    }
    previous = codebook;
  }
  if (lx.size() >= 2 && lx.front() != lx.back()) {
    const auto fit = stats::linear_fit(lx, ly);
    res.slope = fit.slope;
    res.intercept = fit.intercept;
    res.r2 = fit.r2;
  } else {
    res.degenerate = true;
    res.warning = "too few valid radii to fit a slope";
  }
  return res;
}

}  // namespace tadt
