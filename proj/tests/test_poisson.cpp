#include <doctest.h>

#include "depthfuse/error.hpp"
#include "depthfuse/poisson.hpp"
#include "oracles.hpp"

using namespace depthfuse;

namespace {

Mask random_interior_mask(int w, int h, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  Mask m(w, h);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) m.set(x, y, coin(rng));
  }
  return m;
}

}  // namespace

TEST_SUITE("poisson") {

TEST_CASE("laplacian stencil") {
  const Raster flat = laplacian(Raster(5, 5, 3.0));
  for (double v : flat.data()) CHECK(v == 0.0);
  Raster ramp(6, 6);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) ramp(x, y) = 0.5 * x - 2.0 * y;
  }
  const Raster lr = laplacian(ramp);
  for (int y = 1; y < 5; ++y) {
    for (int x = 1; x < 5; ++x) CHECK(std::abs(lr(x, y)) <= 1e-12);
  }
  Raster imp(5, 5);
  imp(2, 2) = 1.0;
  const Raster li = laplacian(imp);
  CHECK(li(2, 2) == 4.0);
  CHECK(li(1, 2) == -1.0);
  CHECK(li(3, 2) == -1.0);
  CHECK(li(2, 1) == -1.0);
  CHECK(li(2, 3) == -1.0);
  CHECK(li(1, 1) == 0.0);
  CHECK_THROWS_AS(laplacian(Raster(2, 2)), Error);
}

TEST_CASE("mask_from_edges") {
  EdgeMap e{Mask(7, 7), 0.15};
  CHECK(!mask_from_edges(e, 2).mask.any());
  e.mask.set(3, 3, true);
  const Mask m1 = mask_from_edges(e, 1).mask;
  CHECK(m1.count() == 9);
  for (int y = 2; y <= 4; ++y) {
    for (int x = 2; x <= 4; ++x) CHECK(m1(x, y));
  }
  const Mask m2 = mask_from_edges(e, 2).mask;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    if (m1[i]) CHECK(m2[i]);
  }
  // Radius 2 reaches the ring, which is cleared.
  CHECK(m2.count() == 25);
  CHECK(!mask_from_edges(e, 3).mask(0, 3));

  EdgeMap corner{Mask(5, 5), 0.15};
  corner.mask.set(0, 0, true);
  const Mask mc = mask_from_edges(corner, 1).mask;
  CHECK(mc.count() == 1);
  CHECK(mc(1, 1));
}

TEST_CASE("empty omega is a bit-exact identity") {
  const Raster low = oracle::random_raster(12, 10, 1), high = oracle::random_raster(12, 10, 2);
  const PoissonResult r = poisson_fuse(low, high, FusionMask{Mask(12, 10)});
  CHECK(r.fused == low);
  CHECK(r.iterations == 0);
}

TEST_CASE("outside omega is untouched, inside matches the dense solve") {
  for (auto [w, h, seed] : {std::tuple{8, 8, 1}, {11, 9, 2}, {16, 16, 3}, {13, 15, 4}}) {
    const Raster low = oracle::random_raster(w, h, seed, 1, 3);
    const Raster high = oracle::random_raster(w, h, seed + 100, 0, 5);
    const FusionMask omega = make_fusion_mask(random_interior_mask(w, h, 0.6, seed));
    const PoissonResult r = poisson_fuse(low, high, omega);
    const Raster ref = oracle::dense_poisson(low, high, omega.mask);
    CHECK(oracle::max_abs_diff(r.fused, ref) <= 1e-8);
    for (std::size_t i = 0; i < low.size(); ++i) {
      if (!omega.mask[i]) CHECK(r.fused[i] == low[i]);
    }
  }
}

TEST_CASE("interior 4x4 on 8x8") {
  const Raster low = oracle::random_raster(8, 8, 5), high = oracle::random_raster(8, 8, 6);
  Mask m(8, 8);
  for (int y = 2; y < 6; ++y) {
    for (int x = 2; x < 6; ++x) m.set(x, y, true);
  }
  const PoissonResult r = poisson_fuse(low, high, FusionMask{m});
  CHECK(oracle::max_abs_diff(r.fused, oracle::dense_poisson(low, high, m)) <= 1e-8);
}

TEST_CASE("constant offset of d_high changes nothing") {
  const Raster low = oracle::random_raster(16, 16, 7, 1, 2);
  Raster high(16, 16);
  for (std::size_t i = 0; i < high.size(); ++i) high[i] = low[i] + 3.0;
  const FusionMask omega = make_fusion_mask(random_interior_mask(16, 16, 0.7, 8));
  CHECK(oracle::max_abs_diff(poisson_fuse(low, high, omega).fused, low) <= 1e-7);

  const Raster h2 = oracle::random_raster(16, 16, 9);
  Raster h3 = h2;
  for (double& v : h3.data()) v += 11.0;
  CHECK(oracle::max_abs_diff(poisson_fuse(low, h2, omega).fused,
                             poisson_fuse(low, h3, omega).fused) <= 1e-7);
}

TEST_CASE("residual bound and iteration bound") {
  const int w = 20, h = 18;
  const Raster low = oracle::random_raster(w, h, 10), high = oracle::random_raster(w, h, 11);
  const FusionMask omega = make_fusion_mask(random_interior_mask(w, h, 0.8, 12));
  PoissonOptions opts;
  opts.tol = 1e-10;
  opts.max_iter = static_cast<int>(omega.mask.count());
  const PoissonResult r = poisson_fuse(low, high, omega, opts);
  CHECK(r.iterations <= opts.max_iter);
  CHECK(r.relative_residual <= opts.tol);
  const Raster lf = laplacian(r.fused), lh = laplacian(high);
  double lh_inf = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < lh.size(); ++i) lh_inf = std::max(lh_inf, std::abs(lh[i]));
  for (std::size_t i = 0; i < lh.size(); ++i) {
    if (omega.mask[i]) worst = std::max(worst, std::abs(lf[i] - lh[i]));
  }
  CHECK(worst <= 10 * opts.tol * lh_inf + 1e-9);
}

TEST_CASE("errors") {
  const Raster a(8, 8), b(9, 8);
  CHECK_THROWS_AS(poisson_fuse(a, b, FusionMask{Mask(8, 8)}), Error);
  const Raster low = oracle::random_raster(30, 30, 13), high = oracle::random_raster(30, 30, 14);
  const FusionMask omega = make_fusion_mask(Mask(30, 30, true));
  PoissonOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-14;
  try {
    poisson_fuse(low, high, omega, opts);
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoConvergence);
  }
}

TEST_CASE("edge pipeline on an edgeless input returns upsampled low") {
  const DepthMap low(Raster(8, 8, 2.0)), high(Raster(24, 24, 5.0));
  const EdgePoissonResult r = poisson_fuse_edges(low, high, 0.15, 0);
  CHECK(r.omega_size == 0);
  CHECK(r.fused.raster == resize_bilinear(low.raster, 24, 24));
}

}  // TEST_SUITE
