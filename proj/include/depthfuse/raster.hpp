#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace depthfuse {

// Single-channel image of 64-bit floats, row-major, top row first.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, double fill = 0.0);
  // Throws NonFiniteValue if any element is NaN/Inf.
  Raster(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_dims(const Raster& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator()(int x, int y) const { return data_[index(x, y)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Clamp-to-edge read.
  double at_clamped(int x, int y) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double min() const;
  double max() const;
  bool all_finite() const;

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Boolean raster (masks, edge maps, validity).
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false)
      : width_(width),
        height_(height),
        data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  bool operator()(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v) {
    data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  bool operator[](std::size_t i) const { return data_[i] != 0; }
  void set(std::size_t i, bool v) { data_[i] = v ? 1 : 0; }

  std::size_t count() const;
  bool any() const { return count() > 0; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

enum class Semantics { Depth, InverseDepth };

struct DepthMap {
  Raster raster;
  Semantics semantics = Semantics::Depth;
  std::optional<Mask> valid;
  // Extremum used by to_inverse_depth; needed to undo the transform.
  std::optional<double> stored_max;

  DepthMap() = default;
  explicit DepthMap(Raster r, Semantics s = Semantics::Depth)
      : raster(std::move(r)), semantics(s) {}

  int width() const { return raster.width(); }
  int height() const { return raster.height(); }
  bool is_valid(std::size_t i) const { return !valid || (*valid)[i]; }
};

// ---- file I/O -------------------------------------------------------------

// Grayscale PFM ("Pf"). Rows are stored bottom-up; the sign of the scale
// field selects byte order (negative = little-endian).
Raster read_pfm(const std::filesystem::path& path);
void write_pfm(const Raster& raster, const std::filesystem::path& path,
               bool little_endian = true);

// Binary PGM ("P5"). Values are mapped to [0,1] by maxval on read and must lie
// in [0,1] on write.
Raster read_pgm(const std::filesystem::path& path);
void write_pgm(const Raster& raster, const std::filesystem::path& path,
               int maxval = 65535);

// ---- resampling and value transforms --------------------------------------

// Half-pixel-centre bilinear resampling with clamp-to-edge sampling.
Raster resize_bilinear(const Raster& r, int new_width, int new_height);
DepthMap resize_bilinear(const DepthMap& d, int new_width, int new_height);

// Affine map of the valid range onto [-1, 1]. Constant input maps to zeros.
DepthMap minmax_scale(const DepthMap& d);
Raster minmax_scale(const Raster& r);

// D_inverse = D_max - D. The extremum is kept in stored_max.
DepthMap to_inverse_depth(const DepthMap& d);
// Undo to_inverse_depth using the stored extremum.
DepthMap from_inverse_depth(const DepthMap& d);

// Horizontal / vertical mirror.
Raster flip_x(const Raster& r);
Raster flip_y(const Raster& r);

}  // namespace depthfuse
