#include "depthfuse/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include <Eigen/Core>

#include "depthfuse/error.hpp"
#include "depthfuse/losses.hpp"

namespace depthfuse::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;

std::atomic<std::uint64_t> g_tape_generation{1};

void require(bool cond, const std::string& what) {
  if (!cond) throw Error(Errc::ShapeMismatch, what);
}

// Per-axis bilinear 2x upsampling taps (half-pixel centres, clamped), the same
// convention as resize_bilinear.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<double> w1;
};

Taps upsample_taps(int in) {
  const int out = 2 * in;
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w1.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double f = std::clamp((o + 0.5) * scale - 0.5, 0.0, in - 1.0);
    const int i0 = static_cast<int>(std::floor(f));
    t.i0[o] = i0;
    t.i1[o] = std::min(i0 + 1, in - 1);
    t.w1[o] = f - i0;
  }
  return t;
}

struct ConvGeom {
  int c, h, w;        // input
  int k, stride, pad;
  int oh, ow;         // output
  std::size_t rows() const { return static_cast<std::size_t>(c) * k * k; }
  std::size_t cols() const { return static_cast<std::size_t>(oh) * ow; }
};

// Output columns [lo, hi) whose input column ox*stride + kw - pad is inside
// the image.
std::pair<int, int> valid_cols(const ConvGeom& g, int kw) {
  const int off = kw - g.pad;
  int lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  int hi = (g.w - 1 - off) >= 0 ? (g.w - 1 - off) / g.stride + 1 : 0;
  lo = std::min(lo, g.ow);
  hi = std::clamp(hi, lo, g.ow);
  return {lo, hi};
}

// col[(ci*k + kh)*k + kw][oy*ow + ox] = x[ci][oy*s + kh - pad][ox*s + kw - pad]
void im2col(const double* x, const ConvGeom& g, double* col) {
  const std::size_t cols = g.cols();
  for (int ci = 0; ci < g.c; ++ci) {
    const double* plane = x + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int kh = 0; kh < g.k; ++kh) {
      for (int kw = 0; kw < g.k; ++kw) {
        double* dst = col + (static_cast<std::size_t>(ci * g.k + kh) * g.k + kw) * cols;
        const auto [lo, hi] = valid_cols(g, kw);
        const int off = kw - g.pad;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride + kh - g.pad;
          double* row = dst + static_cast<std::size_t>(oy) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.w + off;
          std::fill(row, row + lo, 0.0);
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, row + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) row[ox] = src[ox * g.stride];
          }
          std::fill(row + hi, row + g.ow, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeom& g, double* dx) {
  const std::size_t cols = g.cols();
  for (int ci = 0; ci < g.c; ++ci) {
    double* plane = dx + static_cast<std::size_t>(ci) * g.h * g.w;
    for (int kh = 0; kh < g.k; ++kh) {
      for (int kw = 0; kw < g.k; ++kw) {
        const double* src = col + (static_cast<std::size_t>(ci * g.k + kh) * g.k + kw) * cols;
        const auto [lo, hi] = valid_cols(g, kw);
        const int off = kw - g.pad;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride + kh - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.w + off;
          const double* row = src + static_cast<std::size_t>(oy) * g.ow;
          for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride] += row[ox];
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

std::string Shape::str() const {
  std::ostringstream s;
  s << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return s.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), 0.0);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  require(data.size() == shape.numel(), "tensor data length does not match shape " + shape.str());
  impl_->shape = shape;
  impl_->data.assign(data.begin(), data.end());
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::from_raster(const Raster& r, bool requires_grad) {
  return Tensor(Shape{1, 1, r.height(), r.width()},
                std::vector<double>(r.values().begin(), r.values().end()), requires_grad);
}

Raster Tensor::to_raster(int n, int c) const {
  const Shape& s = shape();
  require(n < s.n && c < s.c, "to_raster index out of range");
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const auto first = impl_->data.begin() +
                     static_cast<std::ptrdiff_t>((static_cast<std::size_t>(n) * s.c + c) * plane);
  return Raster(s.w, s.h, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

double Tensor::item() const {
  require(numel() == 1, "item() on a tensor with " + std::to_string(numel()) + " elements");
  return impl_->data[0];
}

std::span<double> Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape() : generation_(g_tape_generation.fetch_add(1)) {}

void Tape::reset() {
  backward_.clear();
  generation_ = g_tape_generation.fetch_add(1);
  consumed_ = false;
  signature_ = 0xcbf29ce484222325ULL;
}

Tensor Tape::make_output(Shape shape, bool requires_grad) {
  Tensor t(shape, requires_grad);
  t.impl_->producer = this;
  t.impl_->generation = generation_;
  if (requires_grad) t.impl_->grad.assign(shape.numel(), 0.0);
  return t;
}

void Tape::backward(const Tensor& scalar) {
  if (!scalar.defined() || scalar.impl_->producer != this ||
      scalar.impl_->generation != generation_ || consumed_) {
    throw Error(Errc::BackwardBeforeForward,
                "backward() on a tensor that was not produced by this tape's current forward pass");
  }
  require(scalar.numel() == 1, "backward() needs a scalar, got " + scalar.shape().str());
  if (!scalar.requires_grad()) return;
  scalar.impl_->grad.assign(1, 1.0);
  for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) (*it)();
  consumed_ = true;
}

Tensor Tape::conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
                    int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.h == ws.w, "conv2d kernel must be square");
  require(ws.c == xs.c, "conv2d channel mismatch: input " + xs.str() + ", weight " + ws.str());
  require(bias.shape() == Shape{1, ws.n, 1, 1}, "conv2d bias must be (1,out,1,1)");
  require(stride >= 1 && pad >= 0, "conv2d stride/pad invalid");
  ConvGeom g{xs.c, xs.h, xs.w, ws.h, stride, pad, 0, 0};
  g.oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  g.ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  require(g.oh > 0 && g.ow > 0, "conv2d output would be empty");

  const bool rg = wants_grad(x) || wants_grad(weight) || wants_grad(bias);
  Tensor out = make_output(Shape{xs.n, ws.n, g.oh, g.ow}, rg);
  const bool direct = g.k == 1 && stride == 1 && pad == 0;
  const std::size_t in_plane = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
  const std::size_t out_plane = static_cast<std::size_t>(ws.n) * g.cols();
  const CMapRow W(weight.data().data(), ws.n, static_cast<Eigen::Index>(g.rows()));
  const Eigen::Map<const Eigen::VectorXd> B(bias.data().data(), ws.n);

  // The unfolded input is kept for the weight gradient.
  const std::size_t col_size = g.rows() * g.cols();
  const bool keep_col = !direct && wants_grad(weight);
  std::shared_ptr<Buffer> cols;
  if (!direct) {
    cols = std::make_shared<Buffer>(col_size * (keep_col ? xs.n : 1));
  }
  for (int n = 0; n < xs.n; ++n) {
    const double* xin = x.data().data() + n * in_plane;
    const double* cptr = xin;
    if (!direct) {
      double* col = cols->data() + (keep_col ? n * col_size : 0);
      im2col(xin, g, col);
      cptr = col;
    }
    const CMapRow C(cptr, static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    MapRow O(out.data().data() + n * out_plane, ws.n, static_cast<Eigen::Index>(g.cols()));
    O.noalias() = W * C;
    O.colwise() += B;
  }
  if (!rg) return out;
  if (!keep_col) cols.reset();

  record([x, weight, bias, out, g, direct, in_plane, out_plane, cols, col_size]() {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    const auto rows = static_cast<Eigen::Index>(g.rows());
    const auto ncols = static_cast<Eigen::Index>(g.cols());
    const CMapRow W(weight.data().data(), ws.n, rows);
    Buffer dcol;
    if (!direct && x.requires_grad()) dcol.resize(col_size);
    for (int n = 0; n < xs.n; ++n) {
      const CMapRow dO(out.grad().data() + n * out_plane, ws.n, ncols);
      if (bias.requires_grad()) {
        Eigen::Map<Eigen::VectorXd> dB(bias.grad().data(), ws.n);
        dB += dO.rowwise().sum();
      }
      if (weight.requires_grad()) {
        const double* cptr = direct ? x.data().data() + n * in_plane : cols->data() + n * col_size;
        const CMapRow C(cptr, rows, ncols);
        MapRow dW(weight.grad().data(), ws.n, rows);
        dW.noalias() += dO * C.transpose();
      }
      if (x.requires_grad()) {
        double* dx = x.grad().data() + n * in_plane;
        if (direct) {
          MapRow dX(dx, rows, ncols);
          dX.noalias() += W.transpose() * dO;
        } else {
          MapRow dC(dcol.data(), rows, ncols);
          dC.noalias() = W.transpose() * dO;
          col2im_add(dcol.data(), g, dx);
        }
      }
    }
  });
  return out;
}

Tensor Tape::upsample_bilinear2x(const Tensor& x) {
  const Shape s = x.shape();
  const Taps ty = upsample_taps(s.h);
  const Taps tx = upsample_taps(s.w);
  const int oh = 2 * s.h;
  const int ow = 2 * s.w;
  const bool rg = wants_grad(x);
  Tensor out = make_output(Shape{s.n, s.c, oh, ow}, rg);
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const std::size_t in_sz = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t out_sz = static_cast<std::size_t>(oh) * ow;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = x.data().data() + p * in_sz;
    double* o = out.data().data() + p * out_sz;
    for (int y = 0; y < oh; ++y) {
      const double* r0 = in + static_cast<std::size_t>(ty.i0[y]) * s.w;
      const double* r1 = in + static_cast<std::size_t>(ty.i1[y]) * s.w;
      const double wy = ty.w1[y];
      for (int xo = 0; xo < ow; ++xo) {
        const double wx = tx.w1[xo];
        const double top = (1.0 - wx) * r0[tx.i0[xo]] + wx * r0[tx.i1[xo]];
        const double bot = (1.0 - wx) * r1[tx.i0[xo]] + wx * r1[tx.i1[xo]];
        o[static_cast<std::size_t>(y) * ow + xo] = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  if (!rg) return out;
  record([x, out, ty, tx, planes, in_sz, out_sz, s, oh, ow]() mutable {
    for (std::size_t p = 0; p < planes; ++p) {
      double* gin = x.grad().data() + p * in_sz;
      const double* go = out.grad().data() + p * out_sz;
      for (int y = 0; y < oh; ++y) {
        double* r0 = gin + static_cast<std::size_t>(ty.i0[y]) * s.w;
        double* r1 = gin + static_cast<std::size_t>(ty.i1[y]) * s.w;
        const double wy = ty.w1[y];
        for (int xo = 0; xo < ow; ++xo) {
          const double g = go[static_cast<std::size_t>(y) * ow + xo];
          const double wx = tx.w1[xo];
          const double gt = (1.0 - wy) * g;
          const double gb = wy * g;
          r0[tx.i0[xo]] += (1.0 - wx) * gt;
          r0[tx.i1[xo]] += wx * gt;
          r1[tx.i0[xo]] += (1.0 - wx) * gb;
          r1[tx.i1[xo]] += wx * gb;
        }
      }
    }
  });
  return out;
}

Tensor Tape::avgpool2x(const Tensor& x) {
  const Shape s = x.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, "avgpool2x needs even spatial dims, got " + s.str());
  const int oh = s.h / 2;
  const int ow = s.w / 2;
  const bool rg = wants_grad(x);
  Tensor out = make_output(Shape{s.n, s.c, oh, ow}, rg);
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* in = x.data().data() + p * s.h * s.w;
    double* o = out.data().data() + p * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        const double* a = in + static_cast<std::size_t>(2 * y) * s.w + 2 * xo;
        o[static_cast<std::size_t>(y) * ow + xo] = 0.25 * (a[0] + a[1] + a[s.w] + a[s.w + 1]);
      }
    }
  }
  if (!rg) return out;
  record([x, out, planes, s, oh, ow]() mutable {
    for (std::size_t p = 0; p < planes; ++p) {
      double* gin = x.grad().data() + p * s.h * s.w;
      const double* go = out.grad().data() + p * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo) {
          const double g = 0.25 * go[static_cast<std::size_t>(y) * ow + xo];
          double* a = gin + static_cast<std::size_t>(2 * y) * s.w + 2 * xo;
          a[0] += g;
          a[1] += g;
          a[s.w] += g;
          a[s.w + 1] += g;
        }
      }
    }
  });
  return out;
}

Tensor Tape::add(const Tensor& x, const Tensor& y) {
  require(x.shape() == y.shape(), "add: shapes " + x.shape().str() + " vs " + y.shape().str());
  const bool rg = wants_grad(x) || wants_grad(y);
  Tensor out = make_output(x.shape(), rg);
  auto o = out.data();
  const auto a = x.data();
  const auto b = y.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + b[i];
  if (!rg) return out;
  record([x, y, out]() mutable {
    const auto go = out.grad();
    if (x.requires_grad()) {
      auto gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    }
    if (y.requires_grad()) {
      auto gy = y.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gy[i] += go[i];
    }
  });
  return out;
}

Tensor Tape::concat_channels(const Tensor& x, const Tensor& y) {
  const Shape a = x.shape();
  const Shape b = y.shape();
  require(a.n == b.n && a.h == b.h && a.w == b.w,
          "concat_channels: shapes " + a.str() + " vs " + b.str());
  const bool rg = wants_grad(x) || wants_grad(y);
  Tensor out = make_output(Shape{a.n, a.c + b.c, a.h, a.w}, rg);
  const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
  const std::size_t na = a.c * plane;
  const std::size_t nb = b.c * plane;
  for (int n = 0; n < a.n; ++n) {
    double* o = out.data().data() + n * (na + nb);
    std::copy_n(x.data().data() + n * na, na, o);
    std::copy_n(y.data().data() + n * nb, nb, o + na);
  }
  if (!rg) return out;
  record([x, y, out, na, nb, batch = a.n]() mutable {
    for (int n = 0; n < batch; ++n) {
      const double* go = out.grad().data() + n * (na + nb);
      if (x.requires_grad()) {
        double* gx = x.grad().data() + n * na;
        for (std::size_t i = 0; i < na; ++i) gx[i] += go[i];
      }
      if (y.requires_grad()) {
        double* gy = y.grad().data() + n * nb;
        for (std::size_t i = 0; i < nb; ++i) gy[i] += go[na + i];
      }
    }
  });
  return out;
}

Tensor Tape::leaky_relu(const Tensor& x, double slope) {
  const bool rg = wants_grad(x);
  Tensor out = make_output(x.shape(), rg);
  auto o = out.data();
  const auto a = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] > 0.0 ? a[i] : slope * a[i];
  if (track_branches_) {
    for (double v : a) mix_branch(v > 0.0);
  }
  if (!rg) return out;
  record([x, out, slope]() mutable {
    const auto go = out.grad();
    const auto a = x.data();
    auto gx = x.grad();
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += a[i] > 0.0 ? go[i] : slope * go[i];
  });
  return out;
}

Tensor Tape::scalar_mul(const Tensor& x, double s) {
  const bool rg = wants_grad(x);
  Tensor out = make_output(x.shape(), rg);
  auto o = out.data();
  const auto a = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = s * a[i];
  if (!rg) return out;
  record([x, out, s]() mutable {
    const auto go = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += s * go[i];
  });
  return out;
}

Tensor Tape::mean_all(const Tensor& x) {
  const bool rg = wants_grad(x);
  Tensor out = make_output(Shape{1, 1, 1, 1}, rg);
  double sum = 0.0;
  for (double v : x.data()) sum += v;
  const double n = static_cast<double>(x.numel());
  out.data()[0] = sum / n;
  if (!rg) return out;
  record([x, out, n]() mutable {
    const double g = out.grad()[0] / n;
    for (double& v : x.grad()) v += g;
  });
  return out;
}

Tensor Tape::ilnr_loss(const Tensor& pred, const Raster& target) {
  const Shape s = pred.shape();
  require(s.n == 1 && s.c == 1 && s.h == target.height() && s.w == target.width(),
          "ilnr_loss: prediction " + s.str() + " does not match target");
  const bool rg = wants_grad(pred);
  Tensor out = make_output(Shape{1, 1, 1, 1}, rg);
  out.data()[0] = depthfuse::ilnr(pred.to_raster(), target);
  if (track_branches_) {
    const auto p = pred.data();
    const TrimmedStats ps = trimmed_stats(p);
    const TrimmedStats ts = trimmed_stats(target.data());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double pn = (p[i] - ps.mean) / ps.stddev;
      const double tn = (target[i] - ts.mean) / ts.stddev;
      mix_branch((pn > tn) | (std::uint64_t{pn < tn} << 1) | (std::uint64_t{ps.kept[i] != 0} << 2));
    }
    mix_branch(ps.floored);
  }
  if (!rg) return out;
  record([pred, out, target]() mutable {
    // L = (1/N) sum_i g_i(pn_i), pn = (p - mu) / sd over the kept set K.
    const auto p = pred.data();
    const std::size_t n = p.size();
    const TrimmedStats ps = trimmed_stats(p);
    const TrimmedStats ts = trimmed_stats(target.data());
    const double scale = out.grad()[0] / static_cast<double>(n);
    std::vector<double> G(n);
    double sum_g = 0.0;
    double sum_g_centered = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pn = (p[i] - ps.mean) / ps.stddev;
      const double tn = (target[i] - ts.mean) / ts.stddev;
      const double th_p = std::tanh(pn / kIlnrTanhScale);
      const double th_t = std::tanh(tn / kIlnrTanhScale);
      auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
      const double dpn = sgn(pn - tn) + sgn(th_p - th_t) * (1.0 - th_p * th_p) / kIlnrTanhScale;
      G[i] = scale * dpn;
      sum_g += G[i];
      sum_g_centered += G[i] * (p[i] - ps.mean);
    }
    auto gp = pred.grad();
    const double sd = ps.stddev;
    const double k = static_cast<double>(ps.kept_count);
    for (std::size_t i = 0; i < n; ++i) {
      double g = G[i] / sd;
      if (ps.kept[i]) {
        g -= sum_g / (k * sd);
        if (!ps.floored) g -= (p[i] - ps.mean) * sum_g_centered / (k * sd * sd * sd);
      }
      gp[i] += g;
    }
  });
  return out;
}

Tensor Tape::ranking_loss(const Tensor& pred, const Raster& d_gf, const PairList& pairs,
                          double sigma) {
  const Shape s = pred.shape();
  require(s.n == 1 && s.c == 1 && s.h == d_gf.height() && s.w == d_gf.width(),
          "ranking_loss: prediction " + s.str() + " does not match supervision");
  const bool rg = wants_grad(pred);
  Tensor out = make_output(Shape{1, 1, 1, 1}, rg);
  out.data()[0] = depthfuse::ranking_loss(pred.to_raster(), d_gf, pairs, sigma);
  if (track_branches_) {
    const auto p = pred.data();
    const int w = d_gf.width();
    for (const auto& pp : pairs) {
      if (pp.z == 0) continue;
      const std::size_t i = static_cast<std::size_t>(pp.i.y) * w + pp.i.x;
      const std::size_t j = static_cast<std::size_t>(pp.j.y) * w + pp.j.x;
      mix_branch((p[i] - p[j]) - (d_gf[i] - d_gf[j]) + sigma > 0.0);
    }
  }
  if (!rg || pairs.empty()) return out;
  record([pred, out, d_gf, pairs, sigma]() mutable {
    const auto p = pred.data();
    auto gp = pred.grad();
    const int w = d_gf.width();
    double den = 0.0;
    for (const auto& pp : pairs) den += pp.weight;
    const double scale = out.grad()[0] / den;
    for (const auto& pp : pairs) {
      const std::size_t i = static_cast<std::size_t>(pp.i.y) * w + pp.i.x;
      const std::size_t j = static_cast<std::size_t>(pp.j.y) * w + pp.j.x;
      double dterm;
      if (pp.z == 0) {
        dterm = 2.0 * (p[i] - p[j]);
      } else {
        const double arg = (p[i] - p[j]) - (d_gf[i] - d_gf[j]) + sigma;
        if (arg == 0.0) continue;
        const double a = std::abs(arg);
        const double e = std::exp(-1.0 / a);
        // d/darg log(1 + exp(-1/|arg|)) = e / (1 + e) * sign(arg) / arg^2
        dterm = e / (1.0 + e) * (arg > 0.0 ? 1.0 : -1.0) / (a * a);
      }
      gp[i] += scale * pp.weight * dterm;
      gp[j] -= scale * pp.weight * dterm;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs,
                           const GradCheckOptions& opts) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    Tensor y = f(tape);
    tape.backward(y);
  }
  std::uint64_t base_signature;
  {
    Tape tape;
    tape.track_branches(true);
    f(tape);
    base_signature = tape.branch_signature();
  }
  bool crossed = false;
  auto eval = [&f, &crossed, base_signature]() {
    Tape tape;
    tape.track_branches(true);
    const double y = f(tape).item();
    crossed = crossed || tape.branch_signature() != base_signature;
    return y;
  };

  GradCheckResult res;
  Rng rng(opts.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> idx(t.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (opts.max_per_input > 0 && idx.size() > opts.max_per_input) {
      std::vector<std::size_t> pick;
      std::sample(idx.begin(), idx.end(), std::back_inserter(pick), opts.max_per_input, rng);
      idx = std::move(pick);
    }
    for (std::size_t i : idx) {
      double& v = t.data()[i];
      const double orig = v;
      crossed = false;
      v = orig + opts.eps;
      const double fp = eval();
      v = orig - opts.eps;
      const double fm = eval();
      v = orig;
      if (crossed) {
        ++res.skipped_kinks;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * opts.eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        std::ostringstream s;
        s << "input " << k << ", element " << i << ": analytic " << a << " vs numeric "
          << numeric;
        res.worst = s.str();
      }
    }
  }
  return res;
}

}  // namespace depthfuse::ad
