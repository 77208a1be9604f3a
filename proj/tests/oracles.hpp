#pragma once

// Slow, obviously-correct reference implementations used as test oracles.
// Nothing here shares code with the library beyond the Raster container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "depthfuse/raster.hpp"

namespace oracle {

using depthfuse::Mask;
using depthfuse::Raster;

inline Raster random_raster(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Raster r(w, h);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = u(rng);
  return r;
}

inline double max_abs_diff(const Raster& a, const Raster& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Mean over the window clipped to the image.
inline Raster box(const Raster& r, int rad) {
  Raster out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      double s = 0.0;
      int n = 0;
      for (int v = std::max(0, y - rad); v <= std::min(r.height() - 1, y + rad); ++v) {
        for (int u = std::max(0, x - rad); u <= std::min(r.width() - 1, x + rad); ++u) {
          s += r(u, v);
          ++n;
        }
      }
      out(x, y) = s / n;
    }
  }
  return out;
}

// Guided filter computed window by window: a_k, b_k from direct sums over
// window k, then output_i averages a_k, b_k over the windows that contain i.
inline Raster guided(const Raster& I, const Raster& p, int rad, double eps) {
  const int w = I.width(), h = I.height();
  Raster a(w, h), b(w, h);
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      double si = 0, sp = 0, sii = 0, sip = 0;
      int n = 0;
      for (int y = std::max(0, ky - rad); y <= std::min(h - 1, ky + rad); ++y) {
        for (int x = std::max(0, kx - rad); x <= std::min(w - 1, kx + rad); ++x) {
          si += I(x, y);
          sp += p(x, y);
          sii += I(x, y) * I(x, y);
          sip += I(x, y) * p(x, y);
          ++n;
        }
      }
      const double mi = si / n, mp = sp / n;
      const double var = sii / n - mi * mi;
      const double cov = sip / n - mi * mp;
      a(kx, ky) = cov / (var + eps);
      b(kx, ky) = mp - a(kx, ky) * mi;
    }
  }
  const Raster ma = box(a, rad), mb = box(b, rad);
  Raster out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ma[i] * I[i] + mb[i];
  return out;
}

inline double clamped(const Raster& r, int x, int y) {
  return r(std::clamp(x, 0, r.width() - 1), std::clamp(y, 0, r.height() - 1));
}

// Sobel by explicit correlation with the two kernels.
inline void sobel(const Raster& r, Raster& gx, Raster& gy) {
  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  gx = Raster(r.width(), r.height());
  gy = Raster(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      double sx = 0, sy = 0;
      for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
          const double v = clamped(r, x + i, y + j);
          sx += kx[j + 1][i + 1] * v;
          sy += ky[j + 1][i + 1] * v;
        }
      }
      gx(x, y) = sx;
      gy(x, y) = sy;
    }
  }
}

// Half-pixel-centre bilinear sample of r at output pixel (x, y) of a
// (nw x nh) grid, clamp-to-edge.
inline double bilinear(const Raster& r, int nw, int nh, int x, int y) {
  const double sx = (x + 0.5) * r.width() / nw - 0.5;
  const double sy = (y + 0.5) * r.height() / nh - 0.5;
  const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0, fy = sy - y0;
  return (1 - fx) * (1 - fy) * clamped(r, x0, y0) + fx * (1 - fy) * clamped(r, x0 + 1, y0) +
         (1 - fx) * fy * clamped(r, x0, y0 + 1) + fx * fy * clamped(r, x0 + 1, y0 + 1);
}

// Assembles the full pixel system (identity rows outside omega, 5-point
// Laplacian rows inside) and solves it with a dense LU.
inline Raster dense_poisson(const Raster& low_up, const Raster& high, const Mask& omega) {
  const int w = low_up.width(), h = low_up.height();
  const int n = w * h;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (!omega(x, y)) {
        A(i, i) = 1.0;
        b(i) = low_up(x, y);
        continue;
      }
      A(i, i) = 4.0;
      b(i) = 4.0 * high(x, y) - high(x - 1, y) - high(x + 1, y) - high(x, y - 1) - high(x, y + 1);
      for (auto [dx, dy] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) A(i, (y + dy) * w + x + dx) = -1.0;
    }
  }
  const Eigen::VectorXd f = A.partialPivLu().solve(b);
  Raster out(w, h);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = f(i);
  return out;
}

// NCHW convolution with zero padding, by nested loops.
inline std::vector<double> conv2d(std::span<const double> x, int n, int c, int h, int w,
                                  std::span<const double> wt, int oc, int k,
                                  std::span<const double> bias, int stride, int pad, int& oh,
                                  int& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n) * oc * oh * ow);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < oc; ++o) {
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx) {
          double s = bias[o];
          for (int ci = 0; ci < c; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int iy = yy * stride - pad + ky, ix = xx * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                s += wt[((o * c + ci) * k + ky) * k + kx] * x[((b * c + ci) * h + iy) * w + ix];
              }
            }
          }
          out[((b * oc + o) * oh + yy) * ow + xx] = s;
        }
      }
    }
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  const auto p = std::filesystem::temp_directory_path() /
                 ("depthfuse_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
