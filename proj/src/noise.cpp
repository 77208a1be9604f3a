#include "depthfuse/noise.hpp"

#include <cmath>
#include <sstream>

#include "depthfuse/error.hpp"
#include "depthfuse/io_util.hpp"
#include "depthfuse/logging.hpp"
#include "depthfuse/metrics.hpp"

namespace depthfuse {

const char* to_string(NoiseKind k) {
  return k == NoiseKind::Gaussian ? "gaussian" : "pepper";
}

NoiseSpec NoiseSpec::gaussian(double variance, std::uint64_t seed) {
  return {NoiseKind::Gaussian, variance, seed};
}

NoiseSpec NoiseSpec::pepper(double snr, std::uint64_t seed) {
  return {NoiseKind::Pepper, snr, seed};
}

void NoiseSpec::validate() const {
  if (kind == NoiseKind::Gaussian && !(param >= 0.0 && param <= 0.01)) {
    throw Error(Errc::InvalidConfig, "gaussian variance must lie in [0, 0.01]");
  }
  if (kind == NoiseKind::Pepper && !(param >= 0.9 && param <= 1.0)) {
    throw Error(Errc::InvalidConfig, "pepper snr must lie in [0.9, 1]");
  }
}

Raster add_gaussian(const Raster& img, double variance, Rng& rng, std::size_t* clamped) {
  if (!(variance >= 0.0)) throw Error(Errc::InvalidConfig, "negative variance");
  for (double v : img.data()) {
    if (v < 0.0 || v > 1.0) throw Error(Errc::OutOfRangeInput, "image values must lie in [0,1]");
  }
  Raster out = img;
  std::size_t n_clamped = 0;
  if (variance > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(variance));
    for (double& v : out.data()) {
      const double x = v + noise(rng);
      const double c = std::clamp(x, 0.0, 1.0);
      n_clamped += c != x;
      v = c;
    }
  }
  if (clamped) *clamped = n_clamped;
  if (n_clamped > 0) {
    log::debug("add_gaussian: {} of {} pixels clamped ({:.4f})", n_clamped, out.size(),
               static_cast<double>(n_clamped) / static_cast<double>(out.size()));
  }
  return out;
}

Raster add_pepper(const Raster& img, double snr, Rng& rng, std::size_t* corrupted) {
  if (!(snr > 0.0 && snr <= 1.0)) throw Error(Errc::InvalidConfig, "snr must lie in (0, 1]");
  Raster out = img;
  std::size_t n = 0;
  if (snr < 1.0) {
    std::bernoulli_distribution hit(1.0 - snr);
    std::bernoulli_distribution salt(0.5);
    for (double& v : out.data()) {
      if (hit(rng)) {
        v = salt(rng) ? 1.0 : 0.0;
        ++n;
      }
    }
  }
  if (corrupted) *corrupted = n;
  return out;
}

Raster apply_noise(const Raster& img, const NoiseSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  return spec.kind == NoiseKind::Gaussian ? add_gaussian(img, spec.param, rng)
                                          : add_pepper(img, spec.param, rng);
}

std::vector<NoiseSpec> variance_grid(std::uint64_t seed) {
  std::vector<NoiseSpec> specs;
  for (int k = 0; k <= 9; ++k) specs.push_back(NoiseSpec::gaussian(0.001 * k, seed));
  return specs;
}

std::vector<SweepRow> noise_sweep(const FusionPipeline& pipeline,
                                  std::span<const Fixture> fixtures,
                                  std::span<const NoiseSpec> specs) {
  for (const NoiseSpec& s : specs) s.validate();
  MetricsOptions mo;
  mo.align = true;
  mo.ordinal = false;
  std::vector<SweepRow> rows;
  for (const Fixture& f : fixtures) {
    for (const NoiseSpec& s : specs) {
      const FixtureInputs in = derive_inputs(apply_noise(f.image, s), f.params);
      const DepthMap fused = pipeline(in.low, in.high);
      const MetricsReport m = compute_metrics(fused, f.gt, mo);
      rows.push_back({s.kind, s.param, s.seed, f.name, m.delta1, m.absrel});
    }
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os.precision(17);
  os << "kind,param,seed,fixture,delta1,absrel\n";
  for (const SweepRow& r : rows) {
    os << to_string(r.kind) << ',' << r.param << ',' << r.seed << ',' << r.fixture << ','
       << r.delta1 << ',' << r.absrel << '\n';
  }
  return os.str();
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  io::write_file_atomic(path, sweep_csv(rows));
}

}  // namespace depthfuse
