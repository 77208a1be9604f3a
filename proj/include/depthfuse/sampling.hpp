#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "depthfuse/gradops.hpp"
#include "depthfuse/raster.hpp"

namespace depthfuse {

using Rng = std::mt19937_64;

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

enum class PairSource { FromGf, FromHigh, FromGt };

const char* to_string(PairSource s);

struct PointPair {
  Pixel i;
  Pixel j;
  PairSource source = PairSource::FromGf;
  double weight = 1.0;
  int z = 0;

  friend bool operator==(const PointPair&, const PointPair&) = default;
};

using PairList = std::vector<PointPair>;

struct SampleConfig {
  double alpha = 0.15;  // edge threshold fraction
  double beta = 60.0;   // max |offset| along the gradient, pixels
  double tau = 0.001;   // ordinal tolerance
  double sigma = 0.1;   // ranking-loss regulariser
  double weight_gf = 12.0;
  double weight_high = 8.0;
  std::size_t max_pairs = 10000;  // per sampling call; 0 = unlimited
  std::uint64_t rng_seed = 42;

  void validate() const;
  // Same config with beta divided by 2^level (per head resolution).
  SampleConfig at_level(int level) const;
};

// Signed ordinal relation of (v_i, v_j) under tolerance tau:
// +1 if v_i / v_j >= 1 + tau, -1 if v_i / v_j <= 1 / (1 + tau), else 0.
// Pairs of near-zero magnitude and negative operands follow the rules in
// classify_pair.
int ordinal_relation(double v_i, double v_j, double tau);

// z = 1 when the two values differ by at least the tolerance ratio.
int classify_pair(double v_i, double v_j, double tau);

// Draws offsets da < db < 0 < dc < dd (|d| <= beta) along the gradient
// direction of every edge pixel and emits the pairs (a,b), (b,c), (c,d).
// z is taken from `supervision`.
PairList sample_edge_pairs(const Raster& supervision, const GradientField& g,
                           const EdgeMap& edges, const SampleConfig& cfg,
                           PairSource source, Rng& rng);

// Full pipeline on one raster: sobel + edge_map + sample_edge_pairs, with z
// computed on `supervision` (which may differ from `edges_from`).
PairList sample_pairs_on(const Raster& edges_from, const Raster& supervision,
                         const SampleConfig& cfg, PairSource source, Rng& rng);

// Concatenates the two lists and attaches per-source weights.
PairList merge_pair_sets(PairList gf_pairs, PairList high_pairs, double weight_gf,
                         double weight_high);

// Quadruple offsets as drawn by the sampler; exposed for property tests.
struct Offsets {
  double a, b, c, d;
};
Offsets draw_offsets(double beta, Rng& rng);

}  // namespace depthfuse
