#pragma once

#include <span>
#include <vector>

#include "depthfuse/raster.hpp"
#include "depthfuse/sampling.hpp"

namespace depthfuse {

struct LossBreakdown {
  double milnr = 0.0;
  double rank = 0.0;
  double total = 0.0;
  std::vector<double> per_scale_milnr;
  std::vector<double> per_scale_rank;
};

// Mean / standard deviation over the values left after dropping the lowest
// and highest `trim` fraction. The deviation is floored.
struct TrimmedStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool floored = false;
  std::vector<std::uint8_t> kept;
  std::size_t kept_count = 0;
};

inline constexpr double kIlnrTrim = 0.1;
inline constexpr double kIlnrStdFloor = 1e-6;
inline constexpr double kIlnrTanhScale = 100.0;

TrimmedStats trimmed_stats(std::span<const double> values, double trim = kIlnrTrim,
                           double floor = kIlnrStdFloor);

// Image-level normalised regression: both images normalised by their own
// trimmed statistics, then mean(|p - t| + |tanh(p/100) - tanh(t/100)|).
double ilnr(const Raster& pred, const Raster& target);

// Sum over scales of ilnr(pred_r, resize(d_low, r)).
double milnr(std::span<const Raster> preds, const Raster& d_low,
             std::vector<double>* per_scale = nullptr);

// z=1: log(1 + exp(-1 / |(pf_i - pf_j) - (pgf_i - pgf_j) + sigma|)), 0 at a zero
// argument; z=0: (pf_i - pf_j)^2.
double rank_pair_term(double pf_i, double pf_j, double pgf_i, double pgf_j, int z,
                      double sigma);

// Weighted mean of rank_pair_term over the pairs. Empty list -> 0 (warning).
double ranking_loss(const Raster& f, const Raster& d_gf, const PairList& pairs,
                    double sigma = 0.1);

// Supervision for one output head.
struct ScaleTargets {
  Raster low;       // d_low resized to the head grid
  Raster gf;        // d_gf resized to the head grid
  PairList pairs;   // merged gf/high pairs sampled on the head grid
};

// Builds targets for `n_scales` heads at full/2^s of (full_w, full_h). Pairs
// are drawn from d_gf and d_high edges with beta halved per level; z comes
// from d_gf.
std::vector<ScaleTargets> build_scale_targets(const Raster& d_low, const Raster& d_gf,
                                              const Raster& d_high, int full_w, int full_h,
                                              int n_scales, const SampleConfig& cfg, Rng& rng);

LossBreakdown fusion_loss(std::span<const Raster> preds, std::span<const ScaleTargets> targets,
                          double sigma);

// Convenience form: resizes d_low / d_gf per head; pairs given per head.
LossBreakdown fusion_loss(std::span<const Raster> preds, const Raster& d_low,
                          const Raster& d_gf, std::span<const PairList> pairs_per_scale,
                          double sigma = 0.1);

// ---- ablation variants (not used by training) ------------------------------

// Multi-scale gradient matching: R = pred - target, then the sum over
// `scales` subsamplings (every 2^s-th pixel) of mean(|dR/dx| + |dR/dy|).
double gradient_loss(const Raster& pred, const Raster& target, int scales = 4);

// Ordinal ranking loss with a signed label l = ordinal_relation(gf_i, gf_j):
// log(1 + exp(-l (f_i - f_j))) for l != 0, (f_i - f_j)^2 for l == 0;
// weighted mean over the pairs, 0 for an empty list.
double ordinal_ranking_loss(const Raster& f, const Raster& d_gf, const PairList& pairs,
                            double tau = 0.001);

}  // namespace depthfuse
