#include "depthfuse/gradops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "depthfuse/error.hpp"

namespace depthfuse {

GradientField sobel(const Raster& r) {
  if (r.width() < 3 || r.height() < 3) {
    throw Error(Errc::TooSmall, "sobel needs at least 3x3 input");
  }
  const int w = r.width();
  const int h = r.height();
  GradientField g{Raster(w, h), Raster(w, h), Raster(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tl = r.at_clamped(x - 1, y - 1), tc = r.at_clamped(x, y - 1),
                   tr = r.at_clamped(x + 1, y - 1);
      const double ml = r.at_clamped(x - 1, y), mr = r.at_clamped(x + 1, y);
      const double bl = r.at_clamped(x - 1, y + 1), bc = r.at_clamped(x, y + 1),
                   br = r.at_clamped(x + 1, y + 1);
      const double gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      const double gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
      g.gx(x, y) = gx;
      g.gy(x, y) = gy;
      g.mag(x, y) = std::hypot(gx, gy);
    }
  }
  return g;
}

EdgeMap edge_map(const Raster& mag, double alpha) {
  EdgeMap e{Mask(mag.width(), mag.height()), alpha};
  const double peak = mag.max();
  if (!(peak > 0.0)) return e;
  const double threshold = (1.0 - alpha) * peak;
  for (std::size_t i = 0; i < mag.size(); ++i) e.mask.set(i, mag[i] >= threshold);
  return e;
}

EdgeMap edge_map(const GradientField& g, double alpha) { return edge_map(g.mag, alpha); }

Raster box_filter(const Raster& r, int radius) {
  if (radius < 1) throw Error(Errc::OutOfRange, "box filter radius must be >= 1");
  const int w = r.width();
  const int h = r.height();
  // (w+1)x(h+1) summed-area table.
  std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  auto at = [&](int x, int y) -> double& {
    return sat[static_cast<std::size_t>(y) * (w + 1) + x];
  };
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += r(x, y);
      at(x + 1, y + 1) = at(x + 1, y) + row;
    }
  }
  Raster out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w, x + radius + 1);
      const double sum = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
      out(x, y) = sum / static_cast<double>((x1 - x0) * (y1 - y0));
    }
  }
  return out;
}

namespace {

double mean_of(const Raster& r) {
  return std::accumulate(r.values().begin(), r.values().end(), 0.0) /
         static_cast<double>(r.size());
}

Raster shifted(const Raster& r, double offset) {
  Raster out = r;
  for (auto& v : out.data()) v -= offset;
  return out;
}

Raster product(const Raster& a, const Raster& b) {
  Raster out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

Raster guided_filter(const Raster& guide, const Raster& input, int radius, double eps) {
  if (!guide.same_dims(input)) {
    throw Error(Errc::DimMismatch, "guide and input dims differ");
  }
  if (radius < 1) throw Error(Errc::OutOfRange, "guided filter radius must be >= 1");
  if (!(eps > 0.0)) throw Error(Errc::OutOfRange, "guided filter eps must be > 0");

  // Centre both signals first: with eps ~ 1e-12 the E[I^2] - E[I]^2 variance is
  // cancellation-limited, and the filter is equivariant to the shift anyway.
  const double gmean = mean_of(guide);
  const double pmean = mean_of(input);
  const Raster I = shifted(guide, gmean);
  const Raster p = shifted(input, pmean);

  const Raster mean_I = box_filter(I, radius);
  const Raster mean_p = box_filter(p, radius);
  const Raster mean_II = box_filter(product(I, I), radius);
  const Raster mean_Ip = box_filter(product(I, p), radius);

  Raster a(I.width(), I.height());
  Raster b(I.width(), I.height());
  for (std::size_t k = 0; k < I.size(); ++k) {
    const double var = std::max(0.0, mean_II[k] - mean_I[k] * mean_I[k]);
    const double cov = mean_Ip[k] - mean_I[k] * mean_p[k];
    a[k] = cov / (var + eps);
    b[k] = mean_p[k] - a[k] * mean_I[k];
  }
  const Raster mean_a = box_filter(a, radius);
  const Raster mean_b = box_filter(b, radius);
  Raster q(I.width(), I.height());
  for (std::size_t i = 0; i < I.size(); ++i) {
    q[i] = mean_a[i] * I[i] + mean_b[i] + pmean;
  }
  return q;
}

Raster guided_fuse(const Raster& d_low, const Raster& d_high, const GuidedFuseParams& params) {
  if (d_low.width() > d_high.width() || d_low.height() > d_high.height()) {
    throw Error(Errc::DimMismatch, "d_high must be at least as large as d_low");
  }
  const Raster low_up = resize_bilinear(d_low, d_high.width(), d_high.height());
  return guided_filter(d_high, low_up, params.effective_radius(d_high.width()), params.eps);
}

DepthMap guided_fuse(const DepthMap& d_low, const DepthMap& d_high,
                     const GuidedFuseParams& params) {
  DepthMap out(guided_fuse(d_low.raster, d_high.raster, params), d_low.semantics);
  out.stored_max = d_low.stored_max;
  out.valid = d_high.valid;
  return out;
}

}  // namespace depthfuse
