#pragma once

#include <cstddef>
#include <optional>

#include "depthfuse/raster.hpp"
#include "depthfuse/sampling.hpp"

namespace depthfuse {

struct Alignment {
  double s = 1.0;
  double t = 0.0;
  bool degenerate = false;  // constant prediction: s = 0, t = mean(gt)
};

struct AlignResult {
  Alignment alignment;
  DepthMap aligned;
};

struct MetricsReport {
  double absrel = 0.0;
  double sqrel = 0.0;
  double rms = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  // Empty when the ground truth yields no pairs (edgeless or smaller than
  // the 3x3 Sobel support).
  std::optional<double> d3r;
  std::optional<double> ord;
  std::size_t n_valid = 0;
  Alignment alignment;
  // Aligned predictions <= 0 replaced by kPositiveClamp for log10 and delta.
  std::size_t clamped = 0;
};

inline constexpr double kPositiveClamp = 1e-6;

// Pixels that count in every metric: gt > 0 and valid in both maps.
Mask valid_set(const DepthMap& pred, const DepthMap& gt);

// Least-squares s, t minimising sum (s * pred + t - gt)^2 over the valid set.
// The aligned map is s * pred + t everywhere.
AlignResult align_scale_shift(const DepthMap& pred, const DepthMap& gt);

struct MetricsOptions {
  bool align = true;
  SampleConfig sampling;           // d3r pair sampling on gt edges
  std::size_t ord_pairs = 50000;
  bool ordinal = true;             // false skips d3r and ord
  std::uint64_t seed = 42;
};

// Dense metrics plus d3r / ord. InverseDepth inputs are converted to depth
// with their stored extremum first.
MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                              const MetricsOptions& opts = {});
MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt, bool align);

// Weighted ordinal disagreement over pairs drawn on the gt edge map (weight 1).
// pred is used as given.
double d3r(const DepthMap& pred, const DepthMap& gt, const SampleConfig& cfg, Rng& rng);

// Same functional over uniformly random valid pixel pairs i != j.
double ord(const DepthMap& pred, const DepthMap& gt, std::size_t n_pairs, double tau, Rng& rng);

// Disagreement rate of ordinal_relation(pred) vs ordinal_relation(gt).
double ordinal_disagreement(const Raster& pred, const Raster& gt, const PairList& pairs,
                            double tau);

}  // namespace depthfuse
