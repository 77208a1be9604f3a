#include "depthfuse/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "depthfuse/error.hpp"

namespace depthfuse {

Raster laplacian(const Raster& r) {
  if (r.width() < 3 || r.height() < 3) {
    throw Error(Errc::TooSmall, "laplacian needs at least 3x3 input");
  }
  Raster out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      out(x, y) = 4.0 * r(x, y) - r.at_clamped(x, y - 1) - r.at_clamped(x, y + 1) -
                  r.at_clamped(x - 1, y) - r.at_clamped(x + 1, y);
    }
  }
  return out;
}

FusionMask make_fusion_mask(Mask m) {
  const int w = m.width();
  const int h = m.height();
  for (int x = 0; x < w; ++x) {
    m.set(x, 0, false);
    m.set(x, h - 1, false);
  }
  for (int y = 0; y < h; ++y) {
    m.set(0, y, false);
    m.set(w - 1, y, false);
  }
  return FusionMask{std::move(m)};
}

FusionMask mask_from_edges(const EdgeMap& edges, int dilate_radius) {
  if (dilate_radius < 0) throw Error(Errc::OutOfRange, "dilate radius must be >= 0");
  const Mask& src = edges.mask;
  const int w = src.width();
  const int h = src.height();
  // Separable max filter: rows then columns.
  Mask rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!src(x, y)) continue;
      for (int dx = std::max(0, x - dilate_radius); dx <= std::min(w - 1, x + dilate_radius); ++dx) {
        rows.set(dx, y, true);
      }
    }
  }
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!rows(x, y)) continue;
      for (int dy = std::max(0, y - dilate_radius); dy <= std::min(h - 1, y + dilate_radius); ++dy) {
        out.set(x, dy, true);
      }
    }
  }
  return make_fusion_mask(std::move(out));
}

PoissonResult poisson_fuse(const Raster& d_low_up, const Raster& d_high,
                           const FusionMask& omega, const PoissonOptions& opts) {
  if (!d_low_up.same_dims(d_high) || omega.mask.width() != d_high.width() ||
      omega.mask.height() != d_high.height()) {
    throw Error(Errc::DimMismatch, "poisson_fuse inputs must share dims");
  }
  const int w = d_high.width();
  const int h = d_high.height();
  PoissonResult result{d_low_up, 0, 0.0};

  // Unknown numbering; -1 marks fixed pixels.
  std::vector<int> index(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::size_t> pixel;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (omega.mask[i]) {
        index[i] = static_cast<int>(pixel.size());
        pixel.push_back(i);
      }
    }
  }
  const std::size_t n = pixel.size();
  if (n == 0) return result;

  const Raster lap_high = laplacian(d_high);
  const std::ptrdiff_t offsets[4] = {-1, 1, -static_cast<std::ptrdiff_t>(w),
                                     static_cast<std::ptrdiff_t>(w)};

  std::vector<double> b(n), x(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = pixel[k];
    double rhs = lap_high[i];
    for (auto off : offsets) {
      const std::size_t j = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + off);
      if (index[j] < 0) rhs += d_low_up[j];
    }
    b[k] = rhs;
    x[k] = d_low_up[i];
  }

  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = pixel[k];
      double s = 4.0 * v[k];
      for (auto off : offsets) {
        const int j = index[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + off)];
        if (j >= 0) s -= v[static_cast<std::size_t>(j)];
      }
      out[k] = s;
    }
  };
  auto dot = [n](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * c[k];
    return s;
  };

  const double b_norm = std::sqrt(dot(b, b));
  const int max_iter = opts.max_iter > 0
                           ? opts.max_iter
                           : std::max(1, static_cast<int>(10.0 * std::sqrt(static_cast<double>(n))));

  std::vector<double> r(n), z(n), p(n), q(n);
  apply(x, q);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
  // The stencil diagonal is 4 everywhere, so the Jacobi preconditioner is a
  // uniform scaling.
  constexpr double inv_diag = 0.25;
  for (std::size_t k = 0; k < n; ++k) z[k] = inv_diag * r[k];
  p = z;
  double rz = dot(r, z);
  double r_norm = std::sqrt(dot(r, r));
  const double target = opts.tol * b_norm;

  int it = 0;
  while (r_norm > target && it < max_iter) {
    apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double step = rz / pq;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += step * p[k];
      r[k] -= step * q[k];
    }
    for (std::size_t k = 0; k < n; ++k) z[k] = inv_diag * r[k];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    r_norm = std::sqrt(dot(r, r));
    ++it;
  }

  result.iterations = it;
  result.relative_residual = b_norm > 0.0 ? r_norm / b_norm : r_norm;
  if (r_norm > target) {
    throw Error(Errc::NoConvergence,
                "conjugate gradient stopped at relative residual " +
                    std::to_string(result.relative_residual) + " after " +
                    std::to_string(it) + " iterations (tol " + std::to_string(opts.tol) + ")");
  }
  for (std::size_t k = 0; k < n; ++k) result.fused[pixel[k]] = x[k];
  return result;
}

EdgePoissonResult poisson_fuse_edges(const DepthMap& d_low, const DepthMap& d_high, double alpha,
                                     int dilate_radius, const PoissonOptions& opts) {
  const Raster low_up = resize_bilinear(d_low.raster, d_high.width(), d_high.height());
  const FusionMask omega = mask_from_edges(edge_map(sobel(d_high.raster), alpha), dilate_radius);
  EdgePoissonResult r;
  r.omega_size = omega.mask.count();
  r.solve = poisson_fuse(low_up, d_high.raster, omega, opts);
  r.fused = DepthMap(r.solve.fused, d_low.semantics);
  r.fused.valid = d_high.valid;
  return r;
}

}  // namespace depthfuse
