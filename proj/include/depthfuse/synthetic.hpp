#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthfuse/raster.hpp"

// Synthetic depth fixtures.
//
// Each fixture starts from an "image" I in [0,1] on the high-resolution grid:
// a background level plus axis-aligned rectangles of random intensity, i.e.
// piecewise constant. Depth is an affine function of intensity,
//
//   depth(I) = depth_near + (depth_far - depth_near) * I,
//
// so brighter regions are farther away and every intensity edge is a depth
// discontinuity. The two inputs mimic a monocular estimator run at two
// resolutions on the same picture:
//
//   d_low  = downsample_bilinear(gaussian_blur(depth(I), blur_sigma))   (low grid)
//   d_high = depth(I) + bias_x * (x/W - 0.5) + bias_y * (y/H - 0.5)     (high grid)
//
// d_low keeps the global layout but loses the edges; d_high keeps the edges
// but carries a smooth planar bias that no global scale/shift removes. The
// ground truth is depth(I) on the high grid.
//
// Image-domain noise is applied to I before derive_inputs, so both inputs see
// the same corrupted picture and the ground truth stays clean.
namespace depthfuse {

struct FixtureParams {
  int low_w = 64;
  int low_h = 64;
  int high_w = 192;
  int high_h = 192;
  int rectangles = 40;
  int min_size = 6;   // rectangle side range, high-grid pixels
  int max_size = 48;
  double depth_near = 1.0;
  double depth_far = 5.0;
  double blur_sigma = 8.0;  // high-grid pixels
  double bias_x = 2.0;
  double bias_y = -1.5;
};

struct Fixture {
  std::string name;
  std::uint64_t seed = 0;
  FixtureParams params;
  Raster image;
  DepthMap gt;
  DepthMap low;
  DepthMap high;
};

struct FixtureInputs {
  DepthMap low;
  DepthMap high;
};

// Separable Gaussian, kernel truncated at 3 sigma, clamp-to-edge borders.
// sigma <= 0 returns the input.
Raster gaussian_blur(const Raster& r, double sigma);

Raster synthetic_image(const FixtureParams& p, std::uint64_t seed);
Raster depth_from_image(const Raster& image, const FixtureParams& p);
FixtureInputs derive_inputs(const Raster& image, const FixtureParams& p);

Fixture make_fixture(const FixtureParams& p, std::uint64_t seed, std::string name);
// `count` fixtures named fixture_000, fixture_001, ... with seeds derived from
// `seed`.
std::vector<Fixture> make_fixture_set(const FixtureParams& p, int count, std::uint64_t seed);

}  // namespace depthfuse
