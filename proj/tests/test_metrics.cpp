#include <doctest.h>

#include "depthfuse/error.hpp"
#include "depthfuse/metrics.hpp"
#include "depthfuse/synthetic.hpp"
#include "oracles.hpp"

using namespace depthfuse;

namespace {

MetricsOptions dense_only(bool align = true) {
  MetricsOptions o;
  o.align = align;
  o.ordinal = false;
  return o;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected depthfuse::Error");
  return Errc::IoFailure;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("identity") {
  const DepthMap gt(oracle::random_raster(20, 20, 1, 1, 5));
  for (bool align : {false, true}) {
    const MetricsReport r = compute_metrics(gt, gt, dense_only(align));
    CHECK(r.absrel <= 1e-14);
    CHECK(r.sqrel <= 1e-14);
    CHECK(r.rms <= 1e-14);
    CHECK(r.log10 <= 1e-14);
    CHECK(r.delta1 == 1.0);
    CHECK(r.delta2 == 1.0);
    CHECK(r.delta3 == 1.0);
    CHECK(r.n_valid == 400);
  }
}

TEST_CASE("three-pixel hand fixture") {
  const DepthMap gt(Raster(3, 1, std::vector<double>{1, 2, 4}));
  const DepthMap pred(Raster(3, 1, std::vector<double>{1, 1, 5}));
  const MetricsReport r = compute_metrics(pred, gt, dense_only(false));
  CHECK(r.absrel == 0.25);
  CHECK(r.sqrel == doctest::Approx((0.25 + 0.0625) / 3));
  CHECK(r.rms == doctest::Approx(std::sqrt(2.0 / 3)));
  CHECK(r.log10 == doctest::Approx((std::log10(2.0) + std::log10(1.25)) / 3));
  // Ratios 1, 2, 1.25; the threshold is strict, so only the first pixel counts.
  CHECK(r.delta1 == 1.0 / 3);
  CHECK(r.delta2 == 2.0 / 3);
  CHECK(r.delta3 == 2.0 / 3);
}

TEST_CASE("alignment inverts affines and matches least squares") {
  const Raster gt = oracle::random_raster(17, 13, 2, 1, 4);
  Raster pred(17, 13);
  for (std::size_t i = 0; i < gt.size(); ++i) pred[i] = (gt[i] - 3.0) / 2.0;
  const AlignResult a = align_scale_shift(DepthMap(pred), DepthMap(gt));
  CHECK(std::abs(a.alignment.s - 2.0) <= 1e-12);
  CHECK(std::abs(a.alignment.t - 3.0) <= 1e-12);
  CHECK(oracle::max_abs_diff(a.aligned.raster, gt) <= 1e-12);
  CHECK(compute_metrics(DepthMap(pred), DepthMap(gt), dense_only()).absrel <= 1e-12);

  const Raster noisy = oracle::random_raster(17, 13, 3, 0, 2);
  Eigen::MatrixXd A(gt.size(), 2);
  Eigen::VectorXd b(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    A(i, 0) = noisy[i];
    A(i, 1) = 1.0;
    b(i) = gt[i];
  }
  const Eigen::Vector2d st = A.colPivHouseholderQr().solve(b);
  const Alignment al = align_scale_shift(DepthMap(noisy), DepthMap(gt)).alignment;
  CHECK(std::abs(al.s - st(0)) <= 1e-10);
  CHECK(std::abs(al.t - st(1)) <= 1e-10);

  // Invalid pixels are excluded from the fit.
  DepthMap masked(noisy);
  masked.valid = Mask(17, 13, true);
  masked.valid->set(0, 0, false);
  Raster g2 = gt;
  g2(0, 0) = 1000.0;
  const Alignment am = align_scale_shift(masked, DepthMap(g2)).alignment;
  CHECK(std::abs(am.s) < 10.0);
}

TEST_CASE("degenerate, clamped and invalid inputs") {
  const DepthMap gt(oracle::random_raster(10, 10, 4, 1, 3));
  const AlignResult c = align_scale_shift(DepthMap(Raster(10, 10, 5.0)), gt);
  CHECK(c.alignment.degenerate);
  CHECK(c.alignment.s == 0.0);
  double mean = 0.0;
  for (double v : gt.raster.data()) mean += v;
  CHECK(c.alignment.t == doctest::Approx(mean / 100));

  // Least squares gives s = 2.7, t = -0.8, so the first aligned value is -0.8.
  const DepthMap g4(Raster(2, 2, std::vector<double>{1, 1, 1, 10}));
  const DepthMap p4(Raster(2, 2, std::vector<double>{0, 1, 2, 3}));
  const AlignResult a4 = align_scale_shift(p4, g4);
  CHECK(a4.alignment.s == doctest::Approx(2.7));
  CHECK(a4.alignment.t == doctest::Approx(-0.8));
  const MetricsReport r = compute_metrics(p4, g4, dense_only());
  CHECK(r.clamped == 1);
  CHECK(std::isfinite(r.log10));

  Raster zero = gt.raster;
  zero[3] = 0.0;
  CHECK(code_of([&] { compute_metrics(DepthMap(zero), gt, dense_only(false)); }) == Errc::NonPositiveForLog);
  CHECK(code_of([&] { compute_metrics(gt, DepthMap(Raster(10, 10, 0.0)), dense_only()); }) == Errc::EmptyValidSet);
  DepthMap none = gt;
  none.valid = Mask(10, 10, false);
  CHECK(code_of([&] { compute_metrics(none, gt, dense_only()); }) == Errc::EmptyValidSet);
  CHECK(code_of([&] { compute_metrics(gt, DepthMap(Raster(9, 10, 1.0)), dense_only()); }) == Errc::DimMismatch);
}

TEST_CASE("d3r and ord") {
  const Fixture f = make_fixture(FixtureParams{}, 6, "m");
  SampleConfig sc;
  Rng r1(1);
  CHECK(d3r(f.gt, f.gt, sc, r1) == 0.0);

  // A constant prediction is "equal" on every pair: d3r is the fraction of
  // gt pairs that are unequal, counted independently here.
  const DepthMap flat(Raster(192, 192, 2.0));
  Rng r2(2), r3(2);
  PairList pairs = sample_pairs_on(f.gt.raster, f.gt.raster, sc, PairSource::FromGt, r3);
  std::size_t unequal = 0;
  for (const PointPair& p : pairs) {
    unequal += ordinal_relation(f.gt.raster(p.i.x, p.i.y), f.gt.raster(p.j.x, p.j.y), sc.tau) != 0;
  }
  CHECK(d3r(flat, f.gt, sc, r2) == doctest::Approx(static_cast<double>(unequal) / pairs.size()));

  // Reversed order, counted pair by pair.
  Raster rev(192, 192);
  for (std::size_t i = 0; i < rev.size(); ++i) rev[i] = 10.0 - f.gt.raster[i];
  std::size_t wrong = 0;
  for (const PointPair& p : pairs) {
    wrong += ordinal_relation(rev(p.i.x, p.i.y), rev(p.j.x, p.j.y), sc.tau) !=
             ordinal_relation(f.gt.raster(p.i.x, p.i.y), f.gt.raster(p.j.x, p.j.y), sc.tau);
  }
  CHECK(wrong >= unequal * 9 / 10);
  Rng r4(2);
  CHECK(d3r(DepthMap(rev), f.gt, sc, r4) == doctest::Approx(static_cast<double>(wrong) / pairs.size()));

  Rng r5(3), r6(3);
  CHECK(ord(f.gt, f.gt, 5000, 0.001, r5) == 0.0);
  const double o = ord(DepthMap(rev), f.gt, 5000, 0.001, r6);
  CHECK(o > 0.5);

  const MetricsReport full = compute_metrics(f.gt, f.gt);
  REQUIRE(full.d3r.has_value());
  REQUIRE(full.ord.has_value());
  CHECK(*full.d3r == 0.0);
  CHECK(!compute_metrics(DepthMap(Raster(8, 8, 1.0)), DepthMap(Raster(8, 8, 1.0))).d3r.has_value());
}

TEST_CASE("inverse-depth inputs are converted first") {
  const DepthMap gt(oracle::random_raster(12, 12, 7, 1, 5));
  const DepthMap inv = to_inverse_depth(gt);
  const MetricsReport r = compute_metrics(inv, gt, dense_only(false));
  CHECK(r.absrel <= 1e-14);
  DepthMap bare = inv;
  bare.stored_max.reset();
  CHECK(code_of([&] { compute_metrics(bare, gt, dense_only()); }) == Errc::InvalidConfig);
}

}  // TEST_SUITE
