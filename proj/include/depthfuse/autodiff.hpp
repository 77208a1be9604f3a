#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "depthfuse/raster.hpp"
#include "depthfuse/sampling.hpp"

// Minimal define-by-run reverse-mode autodiff over NCHW f64 tensors.
namespace depthfuse::ad {

struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tape;

// 64-byte aligned storage. Eigen's vectorised reductions peel a head whose
// length depends on the pointer alignment, so a fixed alignment keeps the
// summation order, and therefore training runs, reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

// Shared handle: copies alias the same storage (parameters shared between
// network paths are literally one Tensor).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor from_raster(const Raster& r, bool requires_grad = false);
  Raster to_raster(int n = 0, int c = 0) const;

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }

  // Handle semantics: constness of the handle does not extend to the values.
  std::span<double> data() const { return impl_->data; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Allocates a zero gradient buffer on first use.
  std::span<double> grad() const;
  void zero_grad() const;

  bool shares_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  friend class Tape;

// 64-byte aligned storage. Eigen's vectorised reductions peel a head whose
// length depends on the pointer alignment, so a fixed alignment keeps the
// summation order, and therefore training runs, reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;
  struct Impl {
    Shape shape;
    Buffer data;
    Buffer grad;
    bool requires_grad = false;
    const Tape* producer = nullptr;
    std::uint64_t generation = 0;
  };
  std::shared_ptr<Impl> impl_;
};

// Records operations in execution order; backward() replays them in reverse.
// A tape is single-threaded and is consumed by backward().
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad);
  Tensor upsample_bilinear2x(const Tensor& x);
  Tensor avgpool2x(const Tensor& x);
  Tensor add(const Tensor& x, const Tensor& y);
  Tensor concat_channels(const Tensor& x, const Tensor& y);
  Tensor leaky_relu(const Tensor& x, double slope = 0.01);
  Tensor scalar_mul(const Tensor& x, double s);
  Tensor mean_all(const Tensor& x);

  // Loss nodes (single-sample prediction of shape (1,1,h,w)); values are the
  // evaluators of the losses module.
  Tensor ilnr_loss(const Tensor& pred, const Raster& target);
  Tensor ranking_loss(const Tensor& pred, const Raster& d_gf, const PairList& pairs,
                      double sigma);

  void backward(const Tensor& scalar);

  std::size_t size() const { return backward_.size(); }
  // Drops recorded ops so the tape can be reused.
  void reset();

  // When enabled, every piecewise op hashes the branch it took per element
  // (activation sign, |.| sign, trimmed membership). Two evaluations with equal
  // signatures lie on the same smooth piece.
  void track_branches(bool on) { track_branches_ = on; }
  std::uint64_t branch_signature() const { return signature_; }

 private:
  void mix_branch(std::uint64_t v) {
    signature_ = (signature_ ^ v) * 0x100000001b3ULL;
  }
  Tensor make_output(Shape shape, bool requires_grad);
  void record(std::function<void()> fn) { backward_.push_back(std::move(fn)); }
  static bool wants_grad(const Tensor& t) { return t.impl_->requires_grad; }

  std::vector<std::function<void()>> backward_;
  std::uint64_t generation_;
  bool consumed_ = false;
  bool track_branches_ = false;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Elements whose +-eps evaluations took a different branch of a piecewise
  // op than the base point; central differences are not valid there.
  std::size_t skipped_kinks = 0;
  std::string worst;  // "input k, element i: analytic a vs numeric n"
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor of the relative error; below it the error is absolute.
  double abs_floor = 1e-4;
  // Elements checked per input; 0 checks every element.
  std::size_t max_per_input = 0;
  std::uint64_t seed = 7;
};

// Compares the tape gradient of the scalar built by `f` against central
// finite differences on the elements of `inputs`.
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f, std::span<Tensor> inputs,
                           const GradCheckOptions& opts = {});

}  // namespace depthfuse::ad
