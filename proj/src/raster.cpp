#include "depthfuse/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "depthfuse/error.hpp"
#include "depthfuse/io_util.hpp"

namespace depthfuse {

Raster::Raster(int width, int height, double fill) {
  if (width <= 0 || height <= 0) {
    throw Error(Errc::ZeroDimension, "raster dims must be positive, got " +
                                         std::to_string(width) + "x" +
                                         std::to_string(height));
  }
  width_ = width;
  height_ = height;
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Raster::Raster(int width, int height, std::vector<double> data) {
  if (width <= 0 || height <= 0) {
    throw Error(Errc::ZeroDimension, "raster dims must be positive");
  }
  if (data.size() != static_cast<std::size_t>(width) * height) {
    throw Error(Errc::DimMismatch, "data length does not match width*height");
  }
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw Error(Errc::NonFiniteValue, "raster data contains NaN/Inf");
    }
  }
  width_ = width;
  height_ = height;
  data_ = std::move(data);
}

double Raster::at_clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return data_[index(x, y)];
}

double Raster::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Raster::max() const { return *std::max_element(data_.begin(), data_.end()); }

bool Raster::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), 1));
}

// ---------------------------------------------------------------------------
// PFM / PGM

namespace {

// Reads one whitespace-delimited header token. Comments ('#') are skipped,
// which PGM allows and PFM writers occasionally emit.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      break;
    }
  }
  while ((c = in.peek()) != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(in.get()));
  }
  return tok;
}

int parse_dim(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v <= 0 || v > (1L << 20)) throw std::invalid_argument("");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw Error(Errc::MalformedHeader, std::string("bad ") + what + " '" + tok + "'");
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return in;
}

}  // namespace

Raster read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = next_token(in);
  if (magic != "Pf") {
    throw Error(Errc::MalformedHeader,
                "expected grayscale PFM magic 'Pf', got '" + magic + "'");
  }
  const int width = parse_dim(next_token(in), "width");
  const int height = parse_dim(next_token(in), "height");
  const std::string scale_tok = next_token(in);
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_tok, &used);
    if (used != scale_tok.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw Error(Errc::MalformedHeader, "bad scale field '" + scale_tok + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) {
    throw Error(Errc::MalformedHeader, "scale field must be nonzero");
  }
  // Exactly one whitespace byte separates the header from the payload.
  if (in.get() == EOF) throw Error(Errc::UnexpectedEof, "missing PFM payload");

  const bool little = scale < 0.0;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<unsigned char> bytes(n * 4);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw Error(Errc::UnexpectedEof, "PFM payload truncated in " + path.string());
  }

  std::vector<double> data(n);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;  // bottom-up on disk
    for (int x = 0; x < width; ++x) {
      const unsigned char* p = &bytes[(static_cast<std::size_t>(row) * width + x) * 4];
      std::uint32_t u = little ? io::load_le32(p) : io::load_be32(p);
      const float f = std::bit_cast<float>(u);
      if (!std::isfinite(f)) {
        throw Error(Errc::NonFiniteValue, "PFM contains NaN/Inf at (" +
                                              std::to_string(x) + "," +
                                              std::to_string(y) + ")");
      }
      data[static_cast<std::size_t>(y) * width + x] = static_cast<double>(f);
    }
  }
  return Raster(width, height, std::move(data));
}

void write_pfm(const Raster& raster, const std::filesystem::path& path,
               bool little_endian) {
  std::ostringstream out;
  out << "Pf\n" << raster.width() << ' ' << raster.height() << '\n'
      << (little_endian ? "-1.0" : "1.0") << '\n';
  std::string payload;
  payload.resize(raster.size() * 4);
  std::size_t k = 0;
  for (int y = raster.height() - 1; y >= 0; --y) {
    for (int x = 0; x < raster.width(); ++x) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(raster(x, y)));
      auto* p = reinterpret_cast<unsigned char*>(&payload[k]);
      if (little_endian) {
        io::store_le32(p, u);
      } else {
        io::store_be32(p, u);
      }
      k += 4;
    }
  }
  io::write_file_atomic(path, out.str() + payload);
}

Raster read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = next_token(in);
  if (magic != "P5") {
    throw Error(Errc::MalformedHeader, "expected binary PGM magic 'P5'");
  }
  const int width = parse_dim(next_token(in), "width");
  const int height = parse_dim(next_token(in), "height");
  const int maxval = parse_dim(next_token(in), "maxval");
  if (maxval > 65535) throw Error(Errc::MalformedHeader, "maxval > 65535");
  if (in.get() == EOF) throw Error(Errc::UnexpectedEof, "missing PGM payload");

  const std::size_t n = static_cast<std::size_t>(width) * height;
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> bytes(n * bpp);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw Error(Errc::UnexpectedEof, "PGM payload truncated");
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bpp == 1 ? bytes[i] : (unsigned(bytes[2 * i]) << 8) | bytes[2 * i + 1];
    data[i] = static_cast<double>(v) / maxval;
  }
  return Raster(width, height, std::move(data));
}

void write_pgm(const Raster& raster, const std::filesystem::path& path, int maxval) {
  if (maxval <= 0 || maxval > 65535) {
    throw Error(Errc::OutOfRange, "maxval must be in [1, 65535]");
  }
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  std::string payload(raster.size() * bpp, '\0');
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const double v = raster[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(Errc::OutOfRange, "PGM export requires values in [0,1]");
    }
    const auto q = static_cast<unsigned>(std::lround(v * maxval));
    if (bpp == 1) {
      payload[i] = static_cast<char>(q);
    } else {
      payload[2 * i] = static_cast<char>(q >> 8);
      payload[2 * i + 1] = static_cast<char>(q & 0xff);
    }
  }
  std::ostringstream header;
  header << "P5\n" << raster.width() << ' ' << raster.height() << '\n' << maxval << '\n';
  io::write_file_atomic(path, header.str() + payload);
}

// ---------------------------------------------------------------------------
// Resampling / transforms

Raster resize_bilinear(const Raster& r, int new_width, int new_height) {
  if (new_width <= 0 || new_height <= 0) {
    throw Error(Errc::ZeroDimension, "resize target dims must be positive");
  }
  Raster out(new_width, new_height);
  const double sx = static_cast<double>(r.width()) / new_width;
  const double sy = static_cast<double>(r.height()) / new_height;
  for (int y = 0; y < new_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, r.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, r.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, r.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, r.width() - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * r(x0, y0) + wx * r(x1, y0);
      const double bot = (1.0 - wx) * r(x0, y1) + wx * r(x1, y1);
      out(x, y) = (1.0 - wy) * top + wy * bot;
    }
  }
  return out;
}

DepthMap resize_bilinear(const DepthMap& d, int new_width, int new_height) {
  DepthMap out(resize_bilinear(d.raster, new_width, new_height), d.semantics);
  out.stored_max = d.stored_max;
  if (d.valid) {
    // A resampled pixel stays valid only if its nearest source pixel was.
    Mask m(new_width, new_height);
    for (int y = 0; y < new_height; ++y) {
      const int sy = std::clamp(static_cast<int>((y + 0.5) * d.height() / new_height), 0,
                                d.height() - 1);
      for (int x = 0; x < new_width; ++x) {
        const int sx = std::clamp(static_cast<int>((x + 0.5) * d.width() / new_width), 0,
                                  d.width() - 1);
        m.set(x, y, (*d.valid)(sx, sy));
      }
    }
    out.valid = std::move(m);
  }
  return out;
}

Raster minmax_scale(const Raster& r) {
  const double lo = r.min();
  const double hi = r.max();
  Raster out(r.width(), r.height(), 0.0);
  if (!(hi > lo)) return out;
  const double k = 2.0 / (hi - lo);
  for (std::size_t i = 0; i < r.size(); ++i) {
    out[i] = std::clamp((r[i] - lo) * k - 1.0, -1.0, 1.0);
  }
  return out;
}

DepthMap minmax_scale(const DepthMap& d) {
  if (!d.valid) {
    DepthMap out(minmax_scale(d.raster), d.semantics);
    out.stored_max = d.stored_max;
    return out;
  }
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < d.raster.size(); ++i) {
    if (!d.is_valid(i)) continue;
    lo = std::min(lo, d.raster[i]);
    hi = std::max(hi, d.raster[i]);
  }
  DepthMap out(Raster(d.width(), d.height(), 0.0), d.semantics);
  out.valid = d.valid;
  out.stored_max = d.stored_max;
  if (hi > lo) {
    const double k = 2.0 / (hi - lo);
    for (std::size_t i = 0; i < d.raster.size(); ++i) {
      if (d.is_valid(i)) out.raster[i] = std::clamp((d.raster[i] - lo) * k - 1.0, -1.0, 1.0);
    }
  }
  return out;
}

DepthMap to_inverse_depth(const DepthMap& d) {
  if (d.semantics == Semantics::InverseDepth) {
    throw Error(Errc::AlreadyInverse, "depth map is already inverse depth");
  }
  double dmax = -INFINITY;
  for (std::size_t i = 0; i < d.raster.size(); ++i) {
    if (d.is_valid(i)) dmax = std::max(dmax, d.raster[i]);
  }
  if (!std::isfinite(dmax)) throw Error(Errc::EmptyValidSet, "no valid pixels");
  DepthMap out(d.raster, Semantics::InverseDepth);
  for (std::size_t i = 0; i < out.raster.size(); ++i) out.raster[i] = dmax - d.raster[i];
  out.valid = d.valid;
  out.stored_max = dmax;
  return out;
}

DepthMap from_inverse_depth(const DepthMap& d) {
  if (d.semantics != Semantics::InverseDepth || !d.stored_max) {
    throw Error(Errc::InvalidConfig,
                "from_inverse_depth needs an inverse-depth map with a stored extremum");
  }
  DepthMap out(d.raster, Semantics::Depth);
  for (std::size_t i = 0; i < out.raster.size(); ++i) {
    out.raster[i] = *d.stored_max - d.raster[i];
  }
  out.valid = d.valid;
  return out;
}

Raster flip_x(const Raster& r) {
  Raster out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) out(x, y) = r(r.width() - 1 - x, y);
  }
  return out;
}

Raster flip_y(const Raster& r) {
  Raster out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) out(x, y) = r(x, r.height() - 1 - y);
  }
  return out;
}

}  // namespace depthfuse
