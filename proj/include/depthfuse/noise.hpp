#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "depthfuse/raster.hpp"
#include "depthfuse/sampling.hpp"
#include "depthfuse/synthetic.hpp"

namespace depthfuse {

enum class NoiseKind { Gaussian, Pepper };

const char* to_string(NoiseKind k);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double param = 0.0;  // variance for Gaussian, snr for Pepper
  std::uint64_t seed = 42;

  static NoiseSpec gaussian(double variance, std::uint64_t seed = 42);
  static NoiseSpec pepper(double snr, std::uint64_t seed = 42);
  // variance in [0, 0.01], snr in [0.9, 1]. Throws InvalidConfig.
  void validate() const;
};

// x + N(0, sqrt(variance)) clamped to [0,1]. Throws OutOfRangeInput when the
// input leaves [0,1]. `clamped` receives the number of clamped pixels.
Raster add_gaussian(const Raster& img, double variance, Rng& rng,
                    std::size_t* clamped = nullptr);

// Each pixel replaced with probability 1 - snr by 0 or 1 (equal odds).
Raster add_pepper(const Raster& img, double snr, Rng& rng,
                  std::size_t* corrupted = nullptr);

// Applies the spec with a generator seeded from spec.seed.
Raster apply_noise(const Raster& img, const NoiseSpec& spec);

// Gaussian specs for the variances 0, 0.001, ..., 0.009.
std::vector<NoiseSpec> variance_grid(std::uint64_t seed = 42);

struct SweepRow {
  NoiseKind kind = NoiseKind::Gaussian;
  double param = 0.0;
  std::uint64_t seed = 0;
  std::string fixture;
  double delta1 = 0.0;
  double absrel = 0.0;
};

using FusionPipeline = std::function<DepthMap(const DepthMap& low, const DepthMap& high)>;

// For every (fixture, spec): noise on the fixture image, inputs re-derived,
// fused by `pipeline`, scored against the clean ground truth after
// scale/shift alignment. Rows are ordered fixture-major.
std::vector<SweepRow> noise_sweep(const FusionPipeline& pipeline,
                                  std::span<const Fixture> fixtures,
                                  std::span<const NoiseSpec> specs);

// CSV with header kind,param,seed,fixture,delta1,absrel.
std::string sweep_csv(std::span<const SweepRow> rows);
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace depthfuse
