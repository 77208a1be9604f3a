#pragma once

#include "depthfuse/raster.hpp"

namespace depthfuse {

struct GradientField {
  Raster gx;
  Raster gy;
  Raster mag;
};

struct EdgeMap {
  Mask mask;
  double alpha = 0.15;
};

// 3x3 Sobel, clamp-to-edge borders. gx responds to horizontal change.
GradientField sobel(const Raster& r);

// mask = mag >= (1 - alpha) * max(mag). An all-zero magnitude gives an empty
// mask rather than the degenerate all-true one.
EdgeMap edge_map(const GradientField& g, double alpha);
EdgeMap edge_map(const Raster& mag, double alpha);

// Mean over the (2r+1)^2 window clipped to the image, via an integral image.
Raster box_filter(const Raster& r, int radius);

// Edge-preserving guided filter (local linear model of `input` in `guide`).
Raster guided_filter(const Raster& guide, const Raster& input, int radius, double eps);

struct GuidedFuseParams {
  int radius = 0;       // 0 selects floor(W / 12) of the high-resolution width
  double eps = 1e-12;

  int effective_radius(int width) const { return radius > 0 ? radius : std::max(1, width / 12); }
};

// d_gf: d_low upsampled to d_high's grid, guided-filtered with d_high as guide.
DepthMap guided_fuse(const DepthMap& d_low, const DepthMap& d_high,
                     const GuidedFuseParams& params = {});
Raster guided_fuse(const Raster& d_low, const Raster& d_high,
                   const GuidedFuseParams& params = {});

}  // namespace depthfuse
