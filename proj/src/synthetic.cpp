#include "depthfuse/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "depthfuse/error.hpp"

namespace depthfuse {

Raster gaussian_blur(const Raster& r, double sigma) {
  if (sigma <= 0.0) return r;
  const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * rad + 1);
  double sum = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    k[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + rad];
  }
  for (double& v : k) v /= sum;

  const int w = r.width(), h = r.height();
  Raster tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -rad; i <= rad; ++i) acc += k[i + rad] * r.at_clamped(x + i, y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -rad; i <= rad; ++i) acc += k[i + rad] * tmp.at_clamped(x, y + i);
      out(x, y) = acc;
    }
  }
  return out;
}

Raster synthetic_image(const FixtureParams& p, std::uint64_t seed) {
  if (p.high_w < 8 || p.high_h < 8) throw Error(Errc::TooSmall, "fixture grid below 8x8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> level(0.1, 0.9);
  Raster img(p.high_w, p.high_h, level(rng));
  std::uniform_int_distribution<int> side(p.min_size, std::max(p.min_size, p.max_size));
  std::uniform_int_distribution<int> px(0, p.high_w - 1);
  std::uniform_int_distribution<int> py(0, p.high_h - 1);
  for (int n = 0; n < p.rectangles; ++n) {
    const int x0 = px(rng), y0 = py(rng);
    const int x1 = std::min(p.high_w - 1, x0 + side(rng) - 1);
    const int y1 = std::min(p.high_h - 1, y0 + side(rng) - 1);
    const double v = level(rng);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) img(x, y) = v;
    }
  }
  return img;
}

Raster depth_from_image(const Raster& image, const FixtureParams& p) {
  Raster d = image;
  for (double& v : d.data()) v = p.depth_near + (p.depth_far - p.depth_near) * v;
  return d;
}

FixtureInputs derive_inputs(const Raster& image, const FixtureParams& p) {
  const Raster depth = depth_from_image(image, p);
  FixtureInputs in;
  in.low = DepthMap(resize_bilinear(gaussian_blur(depth, p.blur_sigma), p.low_w, p.low_h));
  Raster high = depth;
  for (int y = 0; y < high.height(); ++y) {
    for (int x = 0; x < high.width(); ++x) {
      high(x, y) += p.bias_x * ((x + 0.5) / high.width() - 0.5) +
                    p.bias_y * ((y + 0.5) / high.height() - 0.5);
    }
  }
  in.high = DepthMap(std::move(high));
  return in;
}

Fixture make_fixture(const FixtureParams& p, std::uint64_t seed, std::string name) {
  Fixture f;
  f.name = std::move(name);
  f.seed = seed;
  f.params = p;
  f.image = synthetic_image(p, seed);
  f.gt = DepthMap(depth_from_image(f.image, p));
  FixtureInputs in = derive_inputs(f.image, p);
  f.low = std::move(in.low);
  f.high = std::move(in.high);
  return f;
}

std::vector<Fixture> make_fixture_set(const FixtureParams& p, int count, std::uint64_t seed) {
  std::vector<Fixture> out;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "fixture_%03d", i);
    out.push_back(make_fixture(p, rng(), name));
  }
  return out;
}

}  // namespace depthfuse
