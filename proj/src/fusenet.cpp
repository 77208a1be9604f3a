#include "depthfuse/fusenet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "depthfuse/error.hpp"
#include "depthfuse/io_util.hpp"
#include "depthfuse/logging.hpp"

namespace depthfuse {

// ---------------------------------------------------------------------------
// Config / construction

void FusionNetConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (levels < 2) fail("levels must be >= 2");
  if (levels > 16) fail("levels must be <= 16");
  if (base_channels < 1) fail("base_channels must be >= 1");
  if (head_scales < 1 || head_scales > levels) fail("head_scales must be in [1, levels]");
  if (low_w <= 0 || low_h <= 0 || high_w <= 0 || high_h <= 0) fail("dims must be positive");
  if (high_w % low_w != 0 || high_h % low_h != 0) {
    fail("high-resolution dims must be integer multiples of the low-resolution dims");
  }
  const int div = 1 << (levels - 1);
  if (high_w % div != 0 || high_h % div != 0) {
    fail("high-resolution dims must be divisible by 2^(levels-1) = " + std::to_string(div));
  }
}

int FusionNetConfig::channels(int level) const {
  return std::min(base_channels << std::min(level, 20), 8 * base_channels);
}

bool FusionNetConfig::same_architecture(const FusionNetConfig& o) const {
  return levels == o.levels && base_channels == o.base_channels && head_scales == o.head_scales &&
         low_w == o.low_w && low_h == o.low_h && high_w == o.high_w && high_h == o.high_h;
}

namespace {

ConvLayer make_conv(int in, int out, int k, int stride, Rng& rng) {
  ConvLayer layer;
  layer.weight = ad::Tensor(ad::Shape{out, in, k, k}, true);
  layer.bias = ad::Tensor(ad::Shape{1, out, 1, 1}, true);
  layer.stride = stride;
  layer.pad = k / 2;
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (in * k * k)));
  for (double& w : layer.weight.data()) w = normal(rng);
  return layer;
}

ad::Tensor apply(ad::Tape& tape, const ConvLayer& l, const ad::Tensor& x) {
  return tape.conv2d(x, l.weight, l.bias, l.stride, l.pad);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ epoch) ^ index);
}

}  // namespace

FusionNetParams build(const FusionNetConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  FusionNetParams p;
  p.cfg = cfg;
  p.gradient = make_conv(1, 1, 3, 1, rng);
  for (int i = 0; i < cfg.levels; ++i) {
    const int in = i == 0 ? 1 : cfg.channels(i - 1);
    p.encoder.push_back(make_conv(in, cfg.channels(i), 3, i == 0 ? 1 : 2, rng));
  }
  for (int i = 0; i + 1 < cfg.levels; ++i) {
    p.lateral.push_back(make_conv(cfg.channels(i + 1), cfg.channels(i), 1, 1, rng));
    p.decoder.push_back(make_conv(cfg.channels(i), cfg.channels(i), 3, 1, rng));
  }
  for (int s = 0; s < cfg.head_scales; ++s) {
    p.heads.push_back(make_conv(cfg.channels(s), 1, 1, 1, rng));
  }
  return p;
}

std::vector<FusionNetParams::Named> FusionNetParams::tensors() const {
  std::vector<Named> out;
  auto push = [&out](const std::string& name, const ConvLayer& l) {
    out.push_back({name + ".weight", l.weight});
    out.push_back({name + ".bias", l.bias});
  };
  push("gradient", gradient);
  for (std::size_t i = 0; i < encoder.size(); ++i) push("encoder." + std::to_string(i), encoder[i]);
  for (std::size_t i = 0; i < lateral.size(); ++i) push("lateral." + std::to_string(i), lateral[i]);
  for (std::size_t i = 0; i < decoder.size(); ++i) push("decoder." + std::to_string(i), decoder[i]);
  for (std::size_t i = 0; i < heads.size(); ++i) push("head." + std::to_string(i), heads[i]);
  return out;
}

std::size_t FusionNetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor.numel();
  return n;
}

void FusionNetParams::zero_grad() const {
  for (auto t : tensors()) t.tensor.zero_grad();
}

// ---------------------------------------------------------------------------
// Forward

std::vector<ad::Tensor> forward(ad::Tape& tape, const FusionNetParams& params,
                                const ad::Tensor& d_low_up, const ad::Tensor& d_high) {
  const FusionNetConfig& cfg = params.cfg;
  const ad::Shape s = d_high.shape();
  if (!(d_low_up.shape() == s) || s.c != 1) {
    throw Error(Errc::ShapeMismatch, "forward: inputs must be single-channel and share a grid, got " +
                                         d_low_up.shape().str() + " and " + s.str());
  }
  const int div = 1 << (cfg.levels - 1);
  if (s.h % div != 0 || s.w % div != 0) {
    throw Error(Errc::ShapeMismatch, "forward: input grid " + s.str() +
                                         " is not divisible by 2^(levels-1)");
  }

  auto encode = [&](const ad::Tensor& input) {
    std::vector<ad::Tensor> feats;
    ad::Tensor x = input;
    for (const ConvLayer& layer : params.encoder) {
      x = tape.leaky_relu(apply(tape, layer, x));
      feats.push_back(x);
    }
    return feats;
  };
  const std::vector<ad::Tensor> low_feats = encode(d_low_up);
  const std::vector<ad::Tensor> high_feats = encode(apply(tape, params.gradient, d_high));

  const int L = cfg.levels;
  std::vector<ad::Tensor> skip(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) skip[i] = tape.add(low_feats[i], high_feats[i]);

  std::vector<ad::Tensor> dec(static_cast<std::size_t>(L));
  dec[L - 1] = skip[L - 1];
  for (int i = L - 2; i >= 0; --i) {
    const ad::Tensor up = tape.upsample_bilinear2x(apply(tape, params.lateral[i], dec[i + 1]));
    dec[i] = tape.leaky_relu(apply(tape, params.decoder[i], tape.add(up, skip[i])));
  }

  std::vector<ad::Tensor> heads;
  for (int k = 0; k < cfg.head_scales; ++k) heads.push_back(apply(tape, params.heads[k], dec[k]));
  return heads;
}

std::vector<ad::Tensor> forward(ad::Tape& tape, const FusionNetParams& params, const Raster& d_low,
                                const Raster& d_high) {
  const ad::Tensor low_up =
      ad::Tensor::from_raster(resize_bilinear(d_low, d_high.width(), d_high.height()));
  return forward(tape, params, low_up, ad::Tensor::from_raster(d_high));
}

ad::Tensor fusion_loss_node(ad::Tape& tape, std::span<const ad::Tensor> heads,
                            std::span<const ScaleTargets> targets, double sigma,
                            LossBreakdown* breakdown) {
  if (heads.size() != targets.size() || heads.empty()) {
    throw Error(Errc::ScaleCountMismatch, "one target set per head required");
  }
  ad::Tensor total;
  if (breakdown) *breakdown = LossBreakdown{};
  for (std::size_t s = 0; s < heads.size(); ++s) {
    const ad::Tensor m = tape.ilnr_loss(heads[s], targets[s].low);
    const ad::Tensor r = tape.ranking_loss(heads[s], targets[s].gf, targets[s].pairs, sigma);
    if (breakdown) {
      breakdown->per_scale_milnr.push_back(m.item());
      breakdown->per_scale_rank.push_back(r.item());
      breakdown->milnr += m.item();
      breakdown->rank += r.item();
      breakdown->total = breakdown->milnr + breakdown->rank;
    }
    const ad::Tensor term = tape.add(m, r);
    total = total.defined() ? tape.add(total, term) : term;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Data

TrainingSample prepare_sample(const Raster& low_raw, const Raster& high_raw,
                              const FusionNetConfig& cfg, const GuidedFuseParams& gf) {
  const Raster low = (low_raw.width() == cfg.low_w && low_raw.height() == cfg.low_h)
                         ? low_raw
                         : resize_bilinear(low_raw, cfg.low_w, cfg.low_h);
  const Raster high = (high_raw.width() == cfg.high_w && high_raw.height() == cfg.high_h)
                          ? high_raw
                          : resize_bilinear(high_raw, cfg.high_w, cfg.high_h);
  TrainingSample s;
  s.low = minmax_scale(low);
  s.high = minmax_scale(high);
  s.gf = guided_fuse(s.low, s.high, gf);
  return s;
}

TrainingSample augment(const TrainingSample& sample, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  TrainingSample s = sample;
  if (coin(rng)) {
    s.low = flip_x(s.low);
    s.high = flip_x(s.high);
    s.gf = flip_x(s.gf);
  }
  if (coin(rng)) {
    s.low = flip_y(s.low);
    s.high = flip_y(s.high);
    s.gf = flip_y(s.gf);
  }
  if (coin(rng)) {
    for (Raster* r : {&s.low, &s.high, &s.gf}) {
      for (double& v : r->data()) v = -v;
    }
  }
  return s;
}

PreparedSample prepare_targets(TrainingSample sample, const FusionNetConfig& cfg,
                               const SampleConfig& sampling, Rng& rng) {
  PreparedSample p;
  p.targets = build_scale_targets(sample.low, sample.gf, sample.high, cfg.high_w, cfg.high_h,
                                  cfg.head_scales, sampling, rng);
  p.sample = std::move(sample);
  return p;
}

// ---------------------------------------------------------------------------
// Optimisation

OptimizerState make_optimizer(const FusionNetParams& params, const AdamWConfig& cfg) {
  OptimizerState s;
  s.cfg = cfg;
  for (const auto& t : params.tensors()) {
    s.m.emplace_back(t.tensor.numel(), 0.0);
    s.v.emplace_back(t.tensor.numel(), 0.0);
  }
  return s;
}

double learning_rate(const AdamWConfig& cfg, std::int64_t step) {
  double lr = cfg.lr;
  if (cfg.total_steps > 0) {
    const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.total_steps));
    lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  }
  if (cfg.decay_every > 0) {
    lr *= std::pow(cfg.decay_rate, static_cast<double>(step / cfg.decay_every));
  }
  return lr;
}

void adamw_update(const FusionNetParams& params, OptimizerState& opt) {
  const AdamWConfig& c = opt.cfg;
  const double lr = learning_rate(c, opt.step);
  ++opt.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  auto tensors = params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    ad::Tensor& t = tensors[k].tensor;
    auto w = t.data();
    const auto g = t.grad();
    auto& m = opt.m[k];
    auto& v = opt.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * w[i]);
    }
  }
}

LossBreakdown train_step(const FusionNetParams& params, OptimizerState& opt,
                         std::span<const PreparedSample> batch, double sigma) {
  if (batch.empty()) throw Error(Errc::InvalidConfig, "empty batch");
  params.zero_grad();
  ad::Tape tape;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean;
  ad::Tensor objective;
  for (const PreparedSample& ps : batch) {
    const std::vector<ad::Tensor> heads = forward(tape, params, ps.sample.low, ps.sample.high);
    LossBreakdown lb;
    const ad::Tensor loss = fusion_loss_node(tape, heads, ps.targets, sigma, &lb);
    mean.milnr += inv_b * lb.milnr;
    mean.rank += inv_b * lb.rank;
    if (mean.per_scale_milnr.empty()) {
      mean.per_scale_milnr.assign(lb.per_scale_milnr.size(), 0.0);
      mean.per_scale_rank.assign(lb.per_scale_rank.size(), 0.0);
    }
    for (std::size_t s = 0; s < lb.per_scale_milnr.size(); ++s) {
      mean.per_scale_milnr[s] += inv_b * lb.per_scale_milnr[s];
      mean.per_scale_rank[s] += inv_b * lb.per_scale_rank[s];
    }
    const ad::Tensor term = tape.scalar_mul(loss, inv_b);
    objective = objective.defined() ? tape.add(objective, term) : term;
  }
  mean.total = mean.milnr + mean.rank;
  if (!std::isfinite(objective.item()) || !std::isfinite(mean.total)) {
    std::ostringstream msg;
    msg << "loss is not finite at step " << opt.step << " (milnr " << mean.milnr << ", rank "
        << mean.rank << ")";
    throw Error(Errc::NonFiniteLoss, msg.str());
  }
  tape.backward(objective);
  for (const auto& t : params.tensors()) {
    for (double g : t.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw Error(Errc::NonFiniteLoss, "non-finite gradient in " + t.name + " at step " +
                                             std::to_string(opt.step));
      }
    }
  }
  adamw_update(params, opt);
  return mean;
}

std::vector<TrainLogRow> train(const FusionNetParams& params, std::span<const TrainingSample> data,
                               const TrainConfig& cfg,
                               const std::function<void(const TrainLogRow&)>& on_step) {
  if (data.empty()) throw Error(Errc::InvalidConfig, "training set is empty");
  if (cfg.batch < 1 || cfg.steps < 0) throw Error(Errc::InvalidConfig, "batch/steps invalid");
  cfg.sampling.validate();
  AdamWConfig oc = cfg.optimizer;
  if (oc.total_steps == 0) oc.total_steps = cfg.steps;
  OptimizerState opt = make_optimizer(params, oc);

  Rng order_rng(cfg.seed);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), data.size());
  std::vector<TrainLogRow> log;
  std::uint64_t epoch = 0;
  while (static_cast<int>(log.size()) < cfg.steps) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);

    // Pairs are drawn once per sample per epoch.
    std::vector<PreparedSample> prepared;
    prepared.reserve(order.size());
    for (std::size_t k : order) {
      Rng rng(stream_seed(cfg.seed, epoch, k));
      TrainingSample s = cfg.augment ? augment(data[k], rng) : data[k];
      prepared.push_back(prepare_targets(std::move(s), params.cfg, cfg.sampling, rng));
    }

    for (std::size_t first = 0; first + batch <= prepared.size(); first += batch) {
      if (static_cast<int>(log.size()) >= cfg.steps) break;
      TrainLogRow row;
      row.step = opt.step;
      row.lr = learning_rate(opt.cfg, opt.step);
      const LossBreakdown lb = train_step(
          params, opt, std::span<const PreparedSample>(prepared).subspan(first, batch),
          cfg.sampling.sigma);
      row.milnr = lb.milnr;
      row.rank = lb.rank;
      row.total = lb.total;
      log.push_back(row);
      if (on_step) on_step(row);
    }
    ++epoch;
  }
  return log;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  unsigned char b[4];
  io::store_le32(b, v);
  out.append(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffULL));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    const auto v = io::load_le32(reinterpret_cast<const unsigned char*>(bytes_.data() + pos_));
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(Errc::CorruptFile, "parameter file truncated");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_params(const FusionNetParams& params, const std::filesystem::path& path) {
  std::string out = "DFNP";
  put_u32(out, kParamFileVersion);
  const FusionNetConfig& c = params.cfg;
  for (int v : {c.levels, c.base_channels, c.head_scales, c.low_w, c.low_h, c.high_w, c.high_h}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_u64(out, c.seed);
  const auto tensors = params.tensors();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    const ad::Shape s = t.tensor.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.tensor.data()) put_f64(out, v);
  }
  io::write_file_atomic(path, out);
}

FusionNetParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str());
  if (r.bytes(4) != "DFNP") throw Error(Errc::CorruptFile, "bad magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kParamFileVersion) {
    throw Error(Errc::VersionMismatch, "parameter file version " + std::to_string(version) +
                                           ", expected " + std::to_string(kParamFileVersion));
  }
  FusionNetConfig cfg;
  cfg.levels = static_cast<int>(r.u32());
  cfg.base_channels = static_cast<int>(r.u32());
  cfg.head_scales = static_cast<int>(r.u32());
  cfg.low_w = static_cast<int>(r.u32());
  cfg.low_h = static_cast<int>(r.u32());
  cfg.high_w = static_cast<int>(r.u32());
  cfg.high_h = static_cast<int>(r.u32());
  cfg.seed = r.u64();
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(Errc::CorruptFile, std::string("invalid config echo: ") + e.what());
  }
  FusionNetParams params = build(cfg);
  auto tensors = params.tensors();
  if (r.u32() != tensors.size()) throw Error(Errc::CorruptFile, "tensor count mismatch");
  for (auto& t : tensors) {
    ad::Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    if (!(s == t.tensor.shape())) {
      throw Error(Errc::CorruptFile, "shape mismatch for " + t.name + ": " + s.str());
    }
    for (double& v : t.tensor.data()) {
      v = r.f64();
      if (!std::isfinite(v)) throw Error(Errc::CorruptFile, "non-finite value in " + t.name);
    }
  }
  if (!r.at_end()) throw Error(Errc::CorruptFile, "trailing bytes in parameter file");
  return params;
}

FusionNetParams load_params(const std::filesystem::path& path, const FusionNetConfig& expected) {
  FusionNetParams p = load_params(path);
  if (!p.cfg.same_architecture(expected)) {
    throw Error(Errc::VersionMismatch, "parameter file config echo does not match the requested "
                                       "architecture");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Inference

DepthMap fuse(const FusionNetParams& params, const DepthMap& d_low, const DepthMap& d_high) {
  const FusionNetConfig& cfg = params.cfg;
  const TrainingSample s = prepare_sample(d_low.raster, d_high.raster, cfg);
  ad::Tape tape;
  const std::vector<ad::Tensor> heads = forward(tape, params, s.low, s.high);
  Raster f = heads.front().to_raster();

  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < d_low.raster.size(); ++i) {
    if (!d_low.is_valid(i)) continue;
    lo = std::min(lo, d_low.raster[i]);
    hi = std::max(hi, d_low.raster[i]);
  }
  if (!std::isfinite(lo)) throw Error(Errc::EmptyValidSet, "d_low has no valid pixels");
  for (double& v : f.data()) v = (v + 1.0) * 0.5 * (hi - lo) + lo;
  if (f.width() != d_high.width() || f.height() != d_high.height()) {
    f = resize_bilinear(f, d_high.width(), d_high.height());
  }
  DepthMap out(std::move(f), d_low.semantics);
  out.stored_max = d_low.stored_max;
  out.valid = d_high.valid;
  return out;
}

}  // namespace depthfuse
