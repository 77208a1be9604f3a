#pragma once

#include "depthfuse/gradops.hpp"
#include "depthfuse/raster.hpp"

namespace depthfuse {

// Omega: where the high-resolution gradients are transplanted. The outer ring
// of pixels is never part of the mask so the interior problem always has a
// Dirichlet boundary.
struct FusionMask {
  Mask mask;
};

// 5-point stencil 4c - N - S - E - W with clamp-to-edge borders.
Raster laplacian(const Raster& r);

// Chebyshev dilation of the edge mask by `dilate_radius`, border cleared.
FusionMask mask_from_edges(const EdgeMap& edges, int dilate_radius);

// Clears the outer ring of an arbitrary mask.
FusionMask make_fusion_mask(Mask m);

struct PoissonOptions {
  double tol = 1e-12;
  int max_iter = 0;  // 0 selects 10 * sqrt(#unknowns)
};

struct PoissonResult {
  Raster fused;
  int iterations = 0;
  double relative_residual = 0.0;
};

// Outside omega the result equals d_low_up exactly; inside it solves
// lap(f) = lap(d_high) with Dirichlet values from d_low_up, by Jacobi-
// preconditioned conjugate gradient. Throws NoConvergence.
PoissonResult poisson_fuse(const Raster& d_low_up, const Raster& d_high,
                           const FusionMask& omega, const PoissonOptions& opts = {});

// Edge-mask pipeline: d_low upsampled to d_high's grid, omega = dilated
// Sobel edge map of d_high at threshold alpha, then poisson_fuse.
struct EdgePoissonResult {
  DepthMap fused;
  PoissonResult solve;
  std::size_t omega_size = 0;
};

EdgePoissonResult poisson_fuse_edges(const DepthMap& d_low, const DepthMap& d_high, double alpha,
                                     int dilate_radius, const PoissonOptions& opts = {});

}  // namespace depthfuse
