#include "depthfuse/metrics.hpp"

#include <cmath>
#include <vector>

#include "depthfuse/error.hpp"
#include "depthfuse/logging.hpp"

namespace depthfuse {

namespace {

DepthMap as_depth(const DepthMap& d) {
  if (d.semantics == Semantics::Depth) return d;
  if (!d.stored_max) {
    throw Error(Errc::InvalidConfig, "inverse-depth input carries no stored extremum");
  }
  return from_inverse_depth(d);
}

void check_dims(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.raster.same_dims(gt.raster)) {
    throw Error(Errc::DimMismatch, "prediction and ground truth differ in size");
  }
}

std::vector<std::size_t> valid_indices(const Mask& m) {
  std::vector<std::size_t> idx;
  idx.reserve(m.count());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) idx.push_back(i);
  }
  return idx;
}

}  // namespace

Mask valid_set(const DepthMap& pred, const DepthMap& gt) {
  check_dims(pred, gt);
  Mask m(gt.width(), gt.height());
  for (std::size_t i = 0; i < gt.raster.size(); ++i) {
    m.set(i, gt.raster[i] > 0.0 && gt.is_valid(i) && pred.is_valid(i));
  }
  return m;
}

AlignResult align_scale_shift(const DepthMap& pred, const DepthMap& gt) {
  const Mask m = valid_set(pred, gt);
  const std::size_t n = m.count();
  if (n == 0) throw Error(Errc::EmptyValidSet, "no valid pixels to align");

  // Centred normal equations: s = cov(p, g) / var(p), t = mean(g) - s mean(p).
  double mp = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    mp += pred.raster[i];
    mg += gt.raster[i];
  }
  mp /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double spp = 0.0, spg = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const double dp = pred.raster[i] - mp;
    spp += dp * dp;
    spg += dp * (gt.raster[i] - mg);
  }

  AlignResult out;
  if (spp <= 0.0) {
    log::warn("align_scale_shift: constant prediction, using s = 0, t = mean(gt)");
    out.alignment = {0.0, mg, true};
  } else {
    const double s = spg / spp;
    out.alignment = {s, mg - s * mp, false};
  }
  Raster aligned = pred.raster;
  for (double& v : aligned.data()) v = out.alignment.s * v + out.alignment.t;
  out.aligned = DepthMap(std::move(aligned), pred.semantics);
  out.aligned.valid = pred.valid;
  out.aligned.stored_max = pred.stored_max;
  return out;
}

double ordinal_disagreement(const Raster& pred, const Raster& gt, const PairList& pairs,
                            double tau) {
  if (pairs.empty()) throw Error(Errc::EmptyPairSet, "no pairs to evaluate");
  double wrong = 0.0, total = 0.0;
  for (const PointPair& p : pairs) {
    const int rp = ordinal_relation(pred(p.i.x, p.i.y), pred(p.j.x, p.j.y), tau);
    const int rg = ordinal_relation(gt(p.i.x, p.i.y), gt(p.j.x, p.j.y), tau);
    total += p.weight;
    if (rp != rg) wrong += p.weight;
  }
  return wrong / total;
}

double d3r(const DepthMap& pred, const DepthMap& gt, const SampleConfig& cfg, Rng& rng) {
  check_dims(pred, gt);
  const Mask m = valid_set(pred, gt);
  PairList pairs = sample_pairs_on(gt.raster, gt.raster, cfg, PairSource::FromGt, rng);
  std::erase_if(pairs, [&](const PointPair& p) {
    const auto w = static_cast<std::size_t>(gt.width());
    return !m[p.i.y * w + p.i.x] || !m[p.j.y * w + p.j.x];
  });
  for (PointPair& p : pairs) p.weight = 1.0;
  if (pairs.empty()) throw Error(Errc::EmptyPairSet, "ground truth has no sampled edge pairs");
  return ordinal_disagreement(pred.raster, gt.raster, pairs, cfg.tau);
}

double ord(const DepthMap& pred, const DepthMap& gt, std::size_t n_pairs, double tau, Rng& rng) {
  const std::vector<std::size_t> idx = valid_indices(valid_set(pred, gt));
  if (idx.size() < 2 || n_pairs == 0) {
    throw Error(Errc::EmptyPairSet, "need at least two valid pixels and one pair");
  }
  const int w = gt.width();
  std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
  PairList pairs;
  pairs.reserve(n_pairs);
  while (pairs.size() < n_pairs) {
    const std::size_t a = idx[pick(rng)];
    const std::size_t b = idx[pick(rng)];
    if (a == b) continue;
    PointPair p;
    p.i = {static_cast<int>(a % w), static_cast<int>(a / w)};
    p.j = {static_cast<int>(b % w), static_cast<int>(b / w)};
    p.source = PairSource::FromGt;
    pairs.push_back(p);
  }
  return ordinal_disagreement(pred.raster, gt.raster, pairs, tau);
}

MetricsReport compute_metrics(const DepthMap& pred_in, const DepthMap& gt_in,
                              const MetricsOptions& opts) {
  const DepthMap gt = as_depth(gt_in);
  DepthMap pred = as_depth(pred_in);
  check_dims(pred, gt);
  const Mask m = valid_set(pred, gt);
  const std::size_t n = m.count();
  if (n == 0) throw Error(Errc::EmptyValidSet, "no pixel is valid in both maps with gt > 0");

  MetricsReport r;
  r.n_valid = n;
  if (opts.align) {
    AlignResult a = align_scale_shift(pred, gt);
    r.alignment = a.alignment;
    pred = std::move(a.aligned);
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] && pred.raster[i] <= 0.0) {
        throw Error(Errc::NonPositiveForLog,
                    "unaligned prediction has non-positive values on the valid set");
      }
    }
  }

  double absrel = 0.0, sqrel = 0.0, sq = 0.0, lg = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0;
  const double t1 = 1.25, t2 = t1 * t1, t3 = t2 * t1;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const double g = gt.raster[i];
    const double p = pred.raster[i];
    const double diff = g - p;
    absrel += std::abs(diff) / g;
    sqrel += (diff / g) * (diff / g);
    sq += diff * diff;
    double pp = p;
    if (pp <= 0.0) {
      pp = kPositiveClamp;
      ++r.clamped;
    }
    lg += std::abs(std::log10(g) - std::log10(pp));
    const double ratio = std::max(g / pp, pp / g);
    d1 += ratio < t1;
    d2 += ratio < t2;
    d3 += ratio < t3;
  }
  const double dn = static_cast<double>(n);
  r.absrel = absrel / dn;
  r.sqrel = sqrel / dn;
  r.rms = std::sqrt(sq / dn);
  r.log10 = lg / dn;
  r.delta1 = static_cast<double>(d1) / dn;
  r.delta2 = static_cast<double>(d2) / dn;
  r.delta3 = static_cast<double>(d3) / dn;
  if (r.clamped > 0) {
    log::warn("compute_metrics: {} aligned predictions clamped to {} for log10/delta", r.clamped,
              kPositiveClamp);
  }

  if (!opts.ordinal) return r;
  Rng rng(opts.seed);
  SampleConfig sc = opts.sampling;
  sc.rng_seed = opts.seed;
  try {
    r.d3r = d3r(pred, gt, sc, rng);
  } catch (const Error& e) {
    if (e.code() != Errc::EmptyPairSet && e.code() != Errc::TooSmall) throw;
    log::debug("compute_metrics: d3r skipped ({})", e.what());
  }
  if (n >= 2 && opts.ord_pairs > 0) r.ord = ord(pred, gt, opts.ord_pairs, sc.tau, rng);
  return r;
}

MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt, bool align) {
  MetricsOptions o;
  o.align = align;
  return compute_metrics(pred, gt, o);
}

}  // namespace depthfuse
