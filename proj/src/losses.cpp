#include "depthfuse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "depthfuse/error.hpp"
#include "depthfuse/logging.hpp"

namespace depthfuse {

TrimmedStats trimmed_stats(std::span<const double> values, double trim, double floor) {
  const std::size_t n = values.size();
  TrimmedStats s;
  s.kept.assign(n, 0);
  if (n == 0) return s;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Ties broken by index, so the kept set is unique.
  const auto less = [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  };
  const auto cut = static_cast<std::size_t>(std::floor(trim * static_cast<double>(n)));
  if (cut > 0) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut), order.end(),
                     less);
    std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(cut),
                     order.end() - static_cast<std::ptrdiff_t>(cut), order.end(), less);
  }
  for (std::size_t k = cut; k < n - cut; ++k) s.kept[order[k]] = 1;
  s.kept_count = n - 2 * cut;

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.kept[i]) sum += values[i];
  }
  s.mean = sum / static_cast<double>(s.kept_count);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.kept[i]) sq += (values[i] - s.mean) * (values[i] - s.mean);
  }
  const double sd = std::sqrt(sq / static_cast<double>(s.kept_count));
  s.floored = sd < floor;
  s.stddev = s.floored ? floor : sd;
  return s;
}

double ilnr(const Raster& pred, const Raster& target) {
  if (!pred.same_dims(target)) throw Error(Errc::DimMismatch, "ilnr: dims differ");
  const TrimmedStats ps = trimmed_stats(pred.data());
  const TrimmedStats ts = trimmed_stats(target.data());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = (pred[i] - ps.mean) / ps.stddev;
    const double t = (target[i] - ts.mean) / ts.stddev;
    acc += std::abs(p - t) +
           std::abs(std::tanh(p / kIlnrTanhScale) - std::tanh(t / kIlnrTanhScale));
  }
  return acc / static_cast<double>(pred.size());
}

double milnr(std::span<const Raster> preds, const Raster& d_low, std::vector<double>* per_scale) {
  if (preds.empty()) throw Error(Errc::ScaleCountMismatch, "milnr needs at least one scale");
  double total = 0.0;
  if (per_scale) per_scale->clear();
  for (const Raster& p : preds) {
    const double v = ilnr(p, resize_bilinear(d_low, p.width(), p.height()));
    if (per_scale) per_scale->push_back(v);
    total += v;
  }
  return total;
}

double rank_pair_term(double pf_i, double pf_j, double pgf_i, double pgf_j, int z,
                      double sigma) {
  if (z == 0) {
    const double d = pf_i - pf_j;
    return d * d;
  }
  const double arg = (pf_i - pf_j) - (pgf_i - pgf_j) + sigma;
  if (arg == 0.0) return 0.0;
  return std::log1p(std::exp(-1.0 / std::abs(arg)));
}

double ranking_loss(const Raster& f, const Raster& d_gf, const PairList& pairs, double sigma) {
  if (!f.same_dims(d_gf)) throw Error(Errc::DimMismatch, "ranking_loss: dims differ");
  if (pairs.empty()) {
    log::warn("ranking_loss: empty pair set, loss is 0");
    return 0.0;
  }
  double num = 0.0;
  double den = 0.0;
  for (const PointPair& p : pairs) {
    const double e = rank_pair_term(f(p.i.x, p.i.y), f(p.j.x, p.j.y), d_gf(p.i.x, p.i.y),
                                    d_gf(p.j.x, p.j.y), p.z, sigma);
    num += p.weight * e;
    den += p.weight;
  }
  return num / den;
}

std::vector<ScaleTargets> build_scale_targets(const Raster& d_low, const Raster& d_gf,
                                              const Raster& d_high, int full_w, int full_h,
                                              int n_scales, const SampleConfig& cfg, Rng& rng) {
  if (n_scales < 1) throw Error(Errc::ScaleCountMismatch, "need at least one scale");
  std::vector<ScaleTargets> out;
  out.reserve(static_cast<std::size_t>(n_scales));
  for (int s = 0; s < n_scales; ++s) {
    const int w = full_w >> s;
    const int h = full_h >> s;
    ScaleTargets t;
    t.low = resize_bilinear(d_low, w, h);
    t.gf = (d_gf.width() == w && d_gf.height() == h) ? d_gf : resize_bilinear(d_gf, w, h);
    const Raster high =
        (d_high.width() == w && d_high.height() == h) ? d_high : resize_bilinear(d_high, w, h);
    const SampleConfig level_cfg = cfg.at_level(s);
    PairList gf_pairs = sample_pairs_on(t.gf, t.gf, level_cfg, PairSource::FromGf, rng);
    PairList high_pairs = sample_pairs_on(high, t.gf, level_cfg, PairSource::FromHigh, rng);
    t.pairs = merge_pair_sets(std::move(gf_pairs), std::move(high_pairs), cfg.weight_gf,
                              cfg.weight_high);
    out.push_back(std::move(t));
  }
  return out;
}

LossBreakdown fusion_loss(std::span<const Raster> preds, std::span<const ScaleTargets> targets,
                          double sigma) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw Error(Errc::ScaleCountMismatch, "prediction / target scale counts differ");
  }
  LossBreakdown out;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const double m = ilnr(preds[s], targets[s].low);
    const double r = ranking_loss(preds[s], targets[s].gf, targets[s].pairs, sigma);
    out.per_scale_milnr.push_back(m);
    out.per_scale_rank.push_back(r);
    out.milnr += m;
    out.rank += r;
  }
  out.total = out.milnr + out.rank;
  return out;
}

LossBreakdown fusion_loss(std::span<const Raster> preds, const Raster& d_low,
                          const Raster& d_gf, std::span<const PairList> pairs_per_scale,
                          double sigma) {
  if (preds.size() != pairs_per_scale.size()) {
    throw Error(Errc::ScaleCountMismatch, "one pair list per scale required");
  }
  std::vector<ScaleTargets> targets;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const int w = preds[s].width();
    const int h = preds[s].height();
    targets.push_back({resize_bilinear(d_low, w, h),
                       (d_gf.width() == w && d_gf.height() == h) ? d_gf
                                                                  : resize_bilinear(d_gf, w, h),
                       pairs_per_scale[s]});
  }
  return fusion_loss(preds, targets, sigma);
}

double gradient_loss(const Raster& pred, const Raster& target, int scales) {
  if (!pred.same_dims(target)) throw Error(Errc::DimMismatch, "gradient_loss: dims differ");
  if (scales < 1) throw Error(Errc::ScaleCountMismatch, "gradient_loss needs scales >= 1");
  double total = 0.0;
  for (int s = 0; s < scales; ++s) {
    const int step = 1 << s;
    const int w = (pred.width() + step - 1) / step;
    const int h = (pred.height() + step - 1) / step;
    if (w < 2 || h < 2) break;
    const auto r = [&](int x, int y) {
      return pred(x * step, y * step) - target(x * step, y * step);
    };
    double acc = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x + 1 < w) acc += std::abs(r(x + 1, y) - r(x, y));
        if (y + 1 < h) acc += std::abs(r(x, y + 1) - r(x, y));
      }
    }
    total += acc / (static_cast<double>(w) * h);
  }
  return total;
}

double ordinal_ranking_loss(const Raster& f, const Raster& d_gf, const PairList& pairs,
                            double tau) {
  if (!f.same_dims(d_gf)) throw Error(Errc::DimMismatch, "ordinal_ranking_loss: dims differ");
  double num = 0.0;
  double den = 0.0;
  for (const PointPair& p : pairs) {
    const int l = ordinal_relation(d_gf(p.i.x, p.i.y), d_gf(p.j.x, p.j.y), tau);
    const double d = f(p.i.x, p.i.y) - f(p.j.x, p.j.y);
    num += p.weight * (l == 0 ? d * d : std::log1p(std::exp(-l * d)));
    den += p.weight;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace depthfuse
