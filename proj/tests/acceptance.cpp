// Acceptance checks, one PASS/FAIL line per criterion. Tolerances and time
// limits are pinned here; nothing is tuned per run.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "depthfuse/autodiff.hpp"
#include "depthfuse/error.hpp"
#include "depthfuse/fusenet.hpp"
#include "depthfuse/gradops.hpp"
#include "depthfuse/logging.hpp"
#include "depthfuse/losses.hpp"
#include "depthfuse/metrics.hpp"
#include "depthfuse/noise.hpp"
#include "depthfuse/poisson.hpp"
#include "depthfuse/sampling.hpp"
#include "depthfuse/synthetic.hpp"
#include "oracles.hpp"

using namespace depthfuse;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 ----------------------------------------------------------------------

void criterion1() {
  const double t0 = cpu_seconds();
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Raster I = oracle::random_raster(64, 64, 100 + k), p = oracle::random_raster(64, 64, 200 + k);
    for (int r : {1, 2, 5}) {
      for (double eps : {1e-12, 1e-2}) {
        worst = std::max(worst, oracle::max_abs_diff(guided_filter(I, p, r, eps), oracle::guided(I, p, r, eps)));
      }
    }
  }
  const double t = cpu_seconds() - t0;
  report(1, worst <= 1e-9 && t < 10.0,
         fmt("guided filter vs per-window oracle, max abs diff %.3e (<= 1e-9), %.2f s CPU (< 10 s)", worst, t));
}

// ---- 2 ----------------------------------------------------------------------

Mask interior_mask(int w, int h, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  Mask m(w, h);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) m.set(x, y, coin(rng));
  }
  return m;
}

void criterion2() {
  const double t0 = cpu_seconds();
  const Raster low = oracle::random_raster(16, 16, 1, 1, 2), high = oracle::random_raster(16, 16, 2);
  const bool identity = poisson_fuse(low, high, FusionMask{Mask(16, 16)}).fused == low;

  Raster shifted(16, 16);
  for (std::size_t i = 0; i < low.size(); ++i) shifted[i] = low[i] + 3.0;
  double offset = 0.0;
  for (int k = 0; k < 5; ++k) {
    const FusionMask omega = make_fusion_mask(interior_mask(16, 16, 0.7, 10 + k));
    offset = std::max(offset, oracle::max_abs_diff(poisson_fuse(low, shifted, omega).fused, low));
  }

  double dense = 0.0;
  int instances = 0;
  for (int w = 8; w <= 16; w += 2) {
    for (int h : {8, 12, 16}) {
      const Raster l = oracle::random_raster(w, h, 30 + w * h, 1, 3), hi = oracle::random_raster(w, h, 40 + w * h, 0, 5);
      const FusionMask omega = make_fusion_mask(interior_mask(w, h, 0.6, 50 + w * h));
      dense = std::max(dense, oracle::max_abs_diff(poisson_fuse(l, hi, omega).fused, oracle::dense_poisson(l, hi, omega.mask)));
      ++instances;
    }
  }
  const double t = cpu_seconds() - t0;
  report(2, identity && offset <= 1e-7 && dense <= 1e-8 && t < 5.0,
         fmt("empty-omega identity %s; constant offset %.3e (<= 1e-7); dense solve on %d instances %.3e (<= 1e-8); %.2f s (< 5 s)",
             identity ? "bit-exact" : "NOT bit-exact", offset, instances, dense, t));
}

// ---- 3 ----------------------------------------------------------------------

void criterion3() {
  const double matched = rank_pair_term(0.7, 0.2, 1.1, 0.6, 1, 0.1);
  const double bound = rank_pair_term(1e9, 0.0, 0.0, 0.0, 1, 0.1);
  double max_bound = 0.0;
  for (double a = 1.0; a <= 1e9; a *= 3.7) max_bound = std::max(max_bound, rank_pair_term(a, 0.0, 0.0, 0.0, 1, 0.1));
  const double sq = rank_pair_term(0.9, 0.2, 0.0, 5.0, 0, 0.1);
  const bool ok = std::abs(matched - 4.5399e-5) <= 1e-8 && bound <= std::log(2.0) &&
                  max_bound <= std::log(2.0) && sq == (0.9 - 0.2) * (0.9 - 0.2);
  report(3, ok,
         fmt("matched term %.8e (4.5399e-5 +- 1e-8); max term up to 1e9 %.12f (<= log 2); z=0 term exact %s", matched,
             max_bound, sq == (0.9 - 0.2) * (0.9 - 0.2) ? "yes" : "no"));
}

// ---- 4 ----------------------------------------------------------------------

ad::Tensor rand_tensor(ad::Shape s, std::uint64_t seed, double margin = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(s.numel());
  for (double& x : v) {
    x = u(rng);
    x += x < 0 ? -margin : margin;
  }
  return ad::Tensor(s, std::move(v), true);
}

void criterion4() {
  const double t0 = cpu_seconds();
  double ops = 0.0;
  const std::vector<ad::Shape> shapes{{1, 1, 4, 4}, {1, 2, 6, 6}, {2, 1, 4, 8}, {1, 3, 8, 6}, {2, 2, 6, 4}};
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const ad::Shape s = shapes[k];
    std::vector<ad::Tensor> in{rand_tensor(s, k, 0.05), rand_tensor(s, k + 10, 0.05),
                               rand_tensor({2, s.c, 3, 3}, k + 20), rand_tensor({1, 2, 1, 1}, k + 30)};
    const ad::Tensor mix = rand_tensor({1, 2, 3, 3}, k + 40);
    const ad::Tensor zero({1, 1, 1, 1});
    // Reduces an arbitrary tensor through a random conv so adjoints differ per element.
    auto reduce = [&](ad::Tape& t, const ad::Tensor& y) {
      const int c = y.shape().c;
      ad::Tensor w({1, c, 1, 1});
      for (int i = 0; i < c; ++i) w.data()[i] = 1.0 + 0.3 * i;
      return t.mean_all(t.conv2d(y, w, zero, 1, 0));
    };
    const std::vector<std::function<ad::Tensor(ad::Tape&)>> graphs{
        [&](ad::Tape& t) { return t.mean_all(t.conv2d(t.conv2d(in[0], in[2], in[3], 1, 1), mix, zero, 1, 1)); },
        [&](ad::Tape& t) { return t.mean_all(t.conv2d(t.conv2d(in[0], in[2], in[3], 2, 1), mix, zero, 1, 1)); },
        [&](ad::Tape& t) { return reduce(t, t.leaky_relu(in[0])); },
        [&](ad::Tape& t) { return reduce(t, t.upsample_bilinear2x(in[0])); },
        [&](ad::Tape& t) { return reduce(t, t.avgpool2x(in[0])); },
        [&](ad::Tape& t) { return reduce(t, t.add(in[0], in[1])); },
        [&](ad::Tape& t) { return reduce(t, t.concat_channels(in[0], in[1])); },
        [&](ad::Tape& t) { return reduce(t, t.scalar_mul(in[0], 2.5)); },
    };
    for (const auto& g : graphs) ops = std::max(ops, ad::grad_check(g, in).max_rel_error);

    const int h = 4 + 2 * static_cast<int>(k), w = 6 + static_cast<int>(k);
    const Raster target = oracle::random_raster(w, h, 60 + k), gf = oracle::random_raster(w, h, 70 + k);
    PairList pairs;
    std::mt19937_64 rng(k);
    for (int n = 0; n < 30; ++n) {
      PointPair p;
      p.i = {static_cast<int>(rng() % w), static_cast<int>(rng() % h)};
      p.j = {static_cast<int>(rng() % w), static_cast<int>(rng() % h)};
      if (p.i == p.j) continue;
      p.z = n % 2;
      p.weight = n % 3 ? 12.0 : 8.0;
      pairs.push_back(p);
    }
    std::vector<ad::Tensor> pin{rand_tensor({1, 1, h, w}, 80 + k)};
    ops = std::max(ops, ad::grad_check([&](ad::Tape& t) { return t.ilnr_loss(pin[0], target); }, pin).max_rel_error);
    ops = std::max(ops, ad::grad_check([&](ad::Tape& t) { return t.ranking_loss(pin[0], gf, pairs, 0.1); }, pin).max_rel_error);
  }

  FusionNetConfig cfg;
  cfg.low_w = cfg.low_h = 16;
  cfg.high_w = cfg.high_h = 48;
  FixtureParams fp;
  fp.low_w = fp.low_h = 16;
  fp.high_w = fp.high_h = 48;
  fp.rectangles = 8;
  fp.min_size = 4;
  fp.max_size = 16;
  fp.blur_sigma = 2.0;
  const FusionNetParams params = build(cfg);
  const Fixture f = make_fixture(fp, 1, "toy");
  Rng rng(3);
  const PreparedSample ps = prepare_targets(prepare_sample(f.low.raster, f.high.raster, cfg), cfg, SampleConfig{}, rng);
  const ad::Tensor low = ad::Tensor::from_raster(resize_bilinear(ps.sample.low, 48, 48));
  const ad::Tensor high = ad::Tensor::from_raster(ps.sample.high);
  std::vector<ad::Tensor> inputs;
  for (const auto& t : params.tensors()) inputs.push_back(t.tensor);
  ad::GradCheckOptions opts;
  opts.max_per_input = 16;
  const ad::GradCheckResult e2e = ad::grad_check(
      [&](ad::Tape& t) { return fusion_loss_node(t, forward(t, params, low, high), ps.targets, 0.1); }, inputs, opts);
  const double t = cpu_seconds() - t0;
  report(4, ops <= 1e-6 && e2e.max_rel_error <= 1e-5 && e2e.skipped_kinks * 10 <= e2e.checked && t < 60.0,
         fmt("per-op max rel err %.3e (<= 1e-6); end-to-end 16/48 max rel err %.3e over %zu entries (<= 1e-5), "
             "%zu kink-straddling entries skipped; %.1f s (< 60 s)",
             ops, e2e.max_rel_error, e2e.checked, e2e.skipped_kinks, t));
}

// ---- 5 ----------------------------------------------------------------------

int run_cli(const std::string& args) {
  const int status = std::system((std::string(DEPTHFUSE_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<double> csv_totals(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<double> totals;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    totals.push_back(std::stod(line.substr(comma + 1)));
  }
  return totals;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void criterion5() {
  const fs::path dir = oracle::temp_dir("accept_overfit");
  const std::string d = "'" + dir.string() + "'";
  if (run_cli("make-fixtures --fixtures 1 " + d + "/data") != 0) {
    report(5, false, "make-fixtures failed");
    return;
  }
  // lr 1e-3: the default 1e-4 does not reach 90% within 500 steps (see README).
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_cli("train --steps 500 --lr 1e-3 --log " + d + "/train.csv " + d + "/data " + d + "/net.dfnp");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto totals = csv_totals(dir / "train.csv");
  if (code != 0 || totals.size() != 500) {
    report(5, false, fmt("train exited %d with %zu log rows", code, totals.size()));
    return;
  }
  const double drop = 1.0 - totals.back() / totals.front();

  bool same = true;
  for (const char* tag : {"a", "b"}) {
    run_cli(std::string("train --steps 20 --lr 1e-3 --log ") + d + "/" + tag + ".csv " + d + "/data " + d + "/" + tag + ".dfnp");
  }
  same = slurp(dir / "a.dfnp") == slurp(dir / "b.dfnp") && slurp(dir / "a.csv") == slurp(dir / "b.csv") &&
         !slurp(dir / "a.dfnp").empty();
  report(5, drop >= 0.9 && same && wall < 120.0,
         fmt("L=4 C=8 64/192, 500 steps on one pair: total %.4f -> %.4f (%.1f%% drop, >= 90%%); repeated runs byte-identical: %s; %.0f s (< 120 s)",
             totals.front(), totals.back(), 100 * drop, same ? "yes" : "no", wall));
}

// ---- 6 ----------------------------------------------------------------------

struct Scores {
  double absrel;
  double d3r;
};

Scores score(const DepthMap& pred, const DepthMap& gt) {
  const MetricsReport m = compute_metrics(pred, gt);
  return {m.absrel, m.d3r.value_or(1.0)};
}

FusionNetParams criterion6() {
  const FixtureParams fp;
  const FusionNetConfig cfg;
  const FusionNetParams params = build(cfg);
  std::vector<TrainingSample> data;
  for (const Fixture& f : make_fixture_set(fp, 8, 7)) data.push_back(prepare_sample(f.low.raster, f.high.raster, cfg));
  TrainConfig tc;
  tc.steps = 500;
  tc.batch = 2;
  tc.optimizer.lr = 1e-3;
  train(params, data, tc);

  // A net within 5% of the guided-filter score counts as matching it.
  const double match = 1.05;
  int net_both = 0, gf_both = 0, net_vs_gf = 0;
  std::string rows;
  const auto held_out = make_fixture_set(fp, 5, 42);
  for (const Fixture& f : held_out) {
    const Scores hi = score(f.high, f.gt);
    const Scores up = score(DepthMap(resize_bilinear(f.low.raster, fp.high_w, fp.high_h)), f.gt);
    const Scores gf = score(guided_fuse(f.low, f.high), f.gt);
    const Scores net = score(fuse(params, f.low, f.high), f.gt);
    net_both += net.absrel < hi.absrel && net.d3r < up.d3r;
    gf_both += gf.absrel < hi.absrel && gf.d3r < up.d3r;
    net_vs_gf += net.absrel <= match * gf.absrel && net.d3r <= match * gf.d3r;
    rows += fmt("\n    %s absrel high %.4f net %.4f gf %.4f | d3r low_up %.4f net %.4f gf %.4f", f.name.c_str(),
                hi.absrel, net.absrel, gf.absrel, up.d3r, net.d3r, gf.d3r);
  }
  const int n = static_cast<int>(held_out.size());
  report(6, net_both == n && gf_both == n && net_vs_gf >= 3,
         fmt("net beats d_high AbsRel and upsampled d_low D3R on %d/%d; guided filter on %d/%d; net matches or beats GF on %d/%d (>= 3)",
             net_both, n, gf_both, n, net_vs_gf, n) + rows);
  return params;
}

// ---- 7 ----------------------------------------------------------------------

void criterion7() {
  MetricsOptions dense;
  dense.ordinal = false;
  const DepthMap gt(oracle::random_raster(32, 32, 5, 1, 5));
  const MetricsReport id = compute_metrics(gt, gt, dense);
  const bool identity = id.absrel == 0.0 && id.sqrel == 0.0 && id.rms == 0.0 && id.log10 == 0.0 &&
                        id.delta1 == 1.0 && id.delta2 == 1.0 && id.delta3 == 1.0;

  dense.align = false;
  const MetricsReport h = compute_metrics(DepthMap(Raster(3, 1, std::vector<double>{1, 1, 5})),
                                          DepthMap(Raster(3, 1, std::vector<double>{1, 2, 4})), dense);
  // The criterion states delta1 = 2/3. The ratios are 1, 2 and 1.25, and the
  // threshold is strict, so only one pixel qualifies; the stated value is
  // checked as given and the mismatch is reported rather than rewritten.
  const bool hand = h.absrel == 0.25 && h.delta1 == 2.0 / 3;

  double affine = 0.0;
  for (auto [s, t] : {std::pair{2.0, 3.0}, {0.5, -1.0}, {-1.5, 10.0}, {7.0, 0.0}}) {
    Raster pred(32, 32);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = (gt.raster[i] - t) / s;
    const Alignment a = align_scale_shift(DepthMap(pred), gt).alignment;
    affine = std::max({affine, std::abs(a.s - s), std::abs(a.t - t)});
  }
  report(7, identity && hand && affine <= 1e-12,
         fmt("identity zero errors and delta 1: %s; hand fixture AbsRel %.17g (want 0.25), delta1 %.17g (want 2/3; ratio 1.25 is not < 1.25): %s; affine recovery err %.2e (<= 1e-12)",
             identity ? "yes" : "no", h.absrel, h.delta1, hand ? "exact" : "MISMATCH", affine));
}

// ---- 8 ----------------------------------------------------------------------

double mean_delta1(const std::vector<SweepRow>& rows, double param) {
  double s = 0.0;
  int n = 0;
  for (const SweepRow& r : rows) {
    if (std::abs(r.param - param) < 1e-12) {
      s += r.delta1;
      ++n;
    }
  }
  return s / n;
}

void criterion8(const FusionNetParams& net) {
  const Raster mid(1000, 1000, 0.5);
  Rng rng(2024);
  const Raster g = add_gaussian(mid, 0.009, rng);
  double mean = 0.0, sq = 0.0;
  for (double v : g.data()) mean += v;
  mean /= g.size();
  for (double v : g.data()) sq += (v - mean) * (v - mean);
  const double var = sq / (g.size() - 1);
  std::size_t corrupted = 0;
  add_pepper(mid, 0.95, rng, &corrupted);
  const double n = static_cast<double>(mid.size());
  const double pepper_dev = std::abs(static_cast<double>(corrupted) - 0.05 * n) / std::sqrt(n * 0.05 * 0.95);

  const auto fixtures = make_fixture_set(FixtureParams{}, 5, 42);
  const auto specs = variance_grid(7);
  const auto net_rows = noise_sweep([&](const DepthMap& l, const DepthMap& h) { return fuse(net, l, h); }, fixtures, specs);
  const auto poisson_rows = noise_sweep(
      [](const DepthMap& l, const DepthMap& h) { return poisson_fuse_edges(l, h, 0.15, 2).fused; }, fixtures, specs);
  const bool complete = net_rows.size() == 50 && poisson_rows.size() == 50;
  auto drop = [](const std::vector<SweepRow>& rows) {
    const double clean = mean_delta1(rows, 0.0);
    return (clean - mean_delta1(rows, 0.009)) / clean;
  };
  const double dn = drop(net_rows), dp = drop(poisson_rows);
  const bool ok = std::abs(var - 0.009) <= 0.05 * 0.009 && pepper_dev <= 3.0 && complete && dn < dp;
  report(8, ok,
         fmt("gaussian variance %.6f (0.009 +- 5%%); pepper count %.2f sigma from 1-snr (<= 3); sweep rows %zu+%zu; "
             "fractional delta1 drop at 0.009: net %.4f vs edge-mask Poisson %.4f (net must be smaller)",
             var, pepper_dev, net_rows.size(), poisson_rows.size(), dn, dp));
}

// ---- 9 ----------------------------------------------------------------------

void criterion9() {
  const Fixture f = make_fixture(FixtureParams{}, 9, "s");
  SampleConfig cfg;
  Rng r1(cfg.rng_seed), r2(cfg.rng_seed);
  const PairList a = sample_pairs_on(f.high.raster, f.gt.raster, cfg, PairSource::FromHigh, r1);
  const PairList b = sample_pairs_on(f.high.raster, f.gt.raster, cfg, PairSource::FromHigh, r2);
  const bool same = !a.empty() && a == b;

  Rng rng(99);
  std::size_t bad = 0;
  for (int k = 0; k < 100000; ++k) {
    const double beta = k % 2 ? 60.0 : 7.5;
    const Offsets o = draw_offsets(beta, rng);
    bad += !(o.a < o.b && o.b < 0.0 && 0.0 < o.c && o.c < o.d && o.a >= -beta && o.d <= beta);
  }
  std::size_t out_of_bounds = 0;
  for (const PointPair& p : a) {
    for (const Pixel& q : {p.i, p.j}) out_of_bounds += q.x < 0 || q.y < 0 || q.x >= 192 || q.y >= 192;
  }
  report(9, same && bad == 0 && out_of_bounds == 0,
         fmt("same-seed pair lists identical (%zu pairs): %s; ordering/bound violations in 1e5 quadruples: %zu; out-of-image pair points: %zu",
             a.size(), same ? "yes" : "no", bad, out_of_bounds));
}

}  // namespace

int main() {
  log::init_from_env();
  try {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    const FusionNetParams net = criterion6();
    criterion7();
    criterion8(net);
    criterion9();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
