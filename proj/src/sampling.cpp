#include "depthfuse/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "depthfuse/error.hpp"

namespace depthfuse {

const char* to_string(PairSource s) {
  switch (s) {
    case PairSource::FromGf: return "gf";
    case PairSource::FromHigh: return "high";
    case PairSource::FromGt: return "gt";
  }
  return "?";
}

void SampleConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::InvalidConfig, "alpha must be in (0,1)");
  if (!(beta > 0.0)) throw Error(Errc::InvalidConfig, "beta must be > 0");
  if (!(tau > 0.0)) throw Error(Errc::InvalidConfig, "tau must be > 0");
  if (!(sigma >= 0.0)) throw Error(Errc::InvalidConfig, "sigma must be >= 0");
  if (!(weight_gf > 0.0 && weight_high > 0.0)) {
    throw Error(Errc::InvalidConfig, "pair weights must be positive");
  }
}

SampleConfig SampleConfig::at_level(int level) const {
  SampleConfig c = *this;
  c.beta = beta / static_cast<double>(1 << level);
  return c;
}

namespace {
constexpr double kZeroMagnitude = 1e-12;
}

int ordinal_relation(double v_i, double v_j, double tau) {
  const bool zi = std::abs(v_i) < kZeroMagnitude;
  const bool zj = std::abs(v_j) < kZeroMagnitude;
  if (zi && zj) return 0;
  if (zi != zj) {
    // Exactly one side is (numerically) zero: an ordinal difference.
    return v_i > v_j ? 1 : -1;
  }
  if (v_i < 0.0 || v_j < 0.0) {
    // Scaled depth lives in [-1, 1]; shift so the ratio test sees positives.
    v_i += 2.0;
    v_j += 2.0;
  }
  // Compare max/min so the test is exactly symmetric under swapping.
  const double hi = std::max(v_i, v_j);
  const double lo = std::min(v_i, v_j);
  if (!(lo > 0.0)) return v_i > v_j ? 1 : (v_i < v_j ? -1 : 0);
  if (hi / lo >= 1.0 + tau) return v_i > v_j ? 1 : -1;
  return 0;
}

int classify_pair(double v_i, double v_j, double tau) {
  return ordinal_relation(v_i, v_j, tau) != 0 ? 1 : 0;
}

Offsets draw_offsets(double beta, Rng& rng) {
  // Open intervals: resample the measure-zero endpoints so the ordering is
  // strict.
  auto uniform = [&rng](double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    double v;
    do {
      v = dist(rng);
    } while (!(v > lo && v < hi));
    return v;
  };
  Offsets o{};
  o.b = uniform(-beta, 0.0);
  o.a = uniform(-beta, o.b);
  o.c = uniform(0.0, beta);
  o.d = uniform(o.c, beta);
  return o;
}

PairList sample_edge_pairs(const Raster& supervision, const GradientField& g,
                           const EdgeMap& edges, const SampleConfig& cfg,
                           PairSource source, Rng& rng) {
  if (!supervision.same_dims(g.mag) || edges.mask.width() != g.mag.width() ||
      edges.mask.height() != g.mag.height()) {
    throw Error(Errc::DimMismatch, "sampling inputs must share dims");
  }
  const int w = supervision.width();
  const int h = supervision.height();
  auto place = [&](int x, int y, double delta, double ux, double uy) {
    const int px = std::clamp(static_cast<int>(std::lround(x + delta * ux)), 0, w - 1);
    const int py = std::clamp(static_cast<int>(std::lround(y + delta * uy)), 0, h - 1);
    return Pixel{px, py};
  };

  PairList pairs;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!edges.mask(x, y)) continue;
      const double mag = g.mag(x, y);
      if (!(mag > 0.0)) continue;
      const double ux = g.gx(x, y) / mag;
      const double uy = g.gy(x, y) / mag;
      const Offsets o = draw_offsets(cfg.beta, rng);
      const Pixel pts[4] = {place(x, y, o.a, ux, uy), place(x, y, o.b, ux, uy),
                            place(x, y, o.c, ux, uy), place(x, y, o.d, ux, uy)};
      for (int k = 0; k < 3; ++k) {
        const Pixel& pi = pts[k];
        const Pixel& pj = pts[k + 1];
        if (pi == pj) continue;
        PointPair pp;
        pp.i = pi;
        pp.j = pj;
        pp.source = source;
        pp.weight = 1.0;
        pp.z = classify_pair(supervision(pi.x, pi.y), supervision(pj.x, pj.y), cfg.tau);
        pairs.push_back(pp);
      }
    }
  }

  if (cfg.max_pairs > 0 && pairs.size() > cfg.max_pairs) {
    // Uniform subsample, order preserved.
    std::vector<std::size_t> idx(pairs.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::vector<std::size_t> keep;
    keep.reserve(cfg.max_pairs);
    std::sample(idx.begin(), idx.end(), std::back_inserter(keep), cfg.max_pairs, rng);
    PairList sub;
    sub.reserve(keep.size());
    for (auto k : keep) sub.push_back(pairs[k]);
    pairs = std::move(sub);
  }
  return pairs;
}

PairList sample_pairs_on(const Raster& edges_from, const Raster& supervision,
                         const SampleConfig& cfg, PairSource source, Rng& rng) {
  const GradientField g = sobel(edges_from);
  const EdgeMap e = edge_map(g, cfg.alpha);
  return sample_edge_pairs(supervision, g, e, cfg, source, rng);
}

PairList merge_pair_sets(PairList gf_pairs, PairList high_pairs, double weight_gf,
                         double weight_high) {
  if (!(weight_gf > 0.0 && weight_high > 0.0)) {
    throw Error(Errc::InvalidConfig, "pair weights must be positive");
  }
  PairList out;
  out.reserve(gf_pairs.size() + high_pairs.size());
  for (auto& p : gf_pairs) {
    p.weight = weight_gf;
    out.push_back(p);
  }
  for (auto& p : high_pairs) {
    p.weight = weight_high;
    out.push_back(p);
  }
  return out;
}

}  // namespace depthfuse
