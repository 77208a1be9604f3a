#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "depthfuse/autodiff.hpp"
#include "depthfuse/gradops.hpp"
#include "depthfuse/losses.hpp"
#include "depthfuse/raster.hpp"
#include "depthfuse/sampling.hpp"

namespace depthfuse {

struct FusionNetConfig {
  int levels = 4;
  int base_channels = 8;
  int head_scales = 3;
  int low_w = 64;
  int low_h = 64;
  int high_w = 192;
  int high_h = 192;
  std::uint64_t seed = 42;

  void validate() const;
  // Width of encoder/decoder level i: doubles per level, capped at 8 * base.
  int channels(int level) const;
  // Same architecture (seed excluded).
  bool same_architecture(const FusionNetConfig& o) const;
};

struct ConvLayer {
  ad::Tensor weight;  // (out, in, k, k)
  ad::Tensor bias;    // (1, out, 1, 1)
  int stride = 1;
  int pad = 0;
};

// E_g (one 3x3 conv on d_high), E_l (one conv block per level, a single set
// of tensors used by both input paths), decoder blocks and 1x1 heads at full,
// 1/2 and 1/4 resolution. Decoder block i: a 1x1 lateral conv maps level i+1
// to C_i channels, is upsampled 2x, added to the summed skip features of
// level i and followed by a 3x3 conv.
struct FusionNetParams {
  FusionNetConfig cfg;
  ConvLayer gradient;
  std::vector<ConvLayer> encoder;  // level 0 .. L-1
  std::vector<ConvLayer> lateral;  // level 0 .. L-2, 1x1 C_{i+1} -> C_i
  std::vector<ConvLayer> decoder;  // level 0 .. L-2, 3x3 C_i -> C_i
  std::vector<ConvLayer> heads;    // scale 0 .. head_scales-1

  struct Named {
    std::string name;
    ad::Tensor tensor;
  };
  // Every distinct parameter tensor, in a fixed order.
  std::vector<Named> tensors() const;
  std::size_t parameter_count() const;
  void zero_grad() const;
};

// He (fan-in) normal init from cfg.seed; zero biases. Throws InvalidConfig.
FusionNetParams build(const FusionNetConfig& cfg);

// Heads at full, 1/2, 1/4 of d_high's grid. d_low_up must already be on the
// high-resolution grid.
std::vector<ad::Tensor> forward(ad::Tape& tape, const FusionNetParams& params,
                                const ad::Tensor& d_low_up, const ad::Tensor& d_high);
// Raster form: upsamples d_low (bilinear) before the encoder.
std::vector<ad::Tensor> forward(ad::Tape& tape, const FusionNetParams& params,
                                const Raster& d_low, const Raster& d_high);

// Scalar loss node: sum over heads of ILNR(head, low_s) + rank(head, gf_s).
// The per-term values are reported through `breakdown` when given.
ad::Tensor fusion_loss_node(ad::Tape& tape, std::span<const ad::Tensor> heads,
                            std::span<const ScaleTargets> targets, double sigma,
                            LossBreakdown* breakdown = nullptr);

// ---- data ------------------------------------------------------------------

// One training example, every raster scaled to [-1, 1]. low sits on the
// low-resolution grid; high and gf on the high-resolution grid.
struct TrainingSample {
  Raster low;
  Raster high;
  Raster gf;
};

// Resizes raw maps to the configured grids (if needed), min-max scales both and
// computes the guided-filter supervision.
TrainingSample prepare_sample(const Raster& low_raw, const Raster& high_raw,
                              const FusionNetConfig& cfg, const GuidedFuseParams& gf = {});

// Random x / y flips and sign inversion, each with probability 0.5, applied to
// all three rasters together.
TrainingSample augment(const TrainingSample& sample, Rng& rng);

struct PreparedSample {
  TrainingSample sample;
  std::vector<ScaleTargets> targets;
};

PreparedSample prepare_targets(TrainingSample sample, const FusionNetConfig& cfg,
                               const SampleConfig& sampling, Rng& rng);

// ---- optimisation ------------------------------------------------------------

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double decay_rate = 0.99;
  int decay_every = 100;
  // Horizon of the cosine annealing factor. train() replaces 0 with the run
  // length; a negative value disables annealing.
  std::int64_t total_steps = 0;
};

struct OptimizerState {
  AdamWConfig cfg;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

OptimizerState make_optimizer(const FusionNetParams& params, const AdamWConfig& cfg);

// base * 0.5 * (1 + cos(pi * step / total)) * decay_rate^floor(step / decay_every)
double learning_rate(const AdamWConfig& cfg, std::int64_t step);

// Applies one AdamW update from the gradients held by the parameter tensors.
void adamw_update(const FusionNetParams& params, OptimizerState& opt);

// Forward + loss + backward over the batch (mean of per-sample losses) and
// one optimiser update. Throws NonFiniteLoss without touching the weights.
LossBreakdown train_step(const FusionNetParams& params, OptimizerState& opt,
                         std::span<const PreparedSample> batch, double sigma);

struct TrainConfig {
  int steps = 500;
  int batch = 2;
  bool augment = true;
  SampleConfig sampling;
  AdamWConfig optimizer;
  std::uint64_t seed = 42;
};

struct TrainLogRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double milnr = 0.0;
  double rank = 0.0;
  double total = 0.0;
};

// Epoch loop: per-epoch shuffle, augmentation and pair sampling from
// per-sample RNG streams, so a run is reproducible for a fixed seed.
std::vector<TrainLogRow> train(const FusionNetParams& params,
                               std::span<const TrainingSample> data, const TrainConfig& cfg,
                               const std::function<void(const TrainLogRow&)>& on_step = {});

// ---- persistence / inference -----------------------------------------------

inline constexpr std::uint32_t kParamFileVersion = 1;

// "DFNP", u32 version, config echo, u32 tensor count, then per tensor its
// (n,c,h,w) as u32 and the values as little-endian f64.
void save_params(const FusionNetParams& params, const std::filesystem::path& path);
FusionNetParams load_params(const std::filesystem::path& path);
// Also checks the config echo against `expected` (VersionMismatch).
FusionNetParams load_params(const std::filesystem::path& path, const FusionNetConfig& expected);

// Scales the inputs, runs the network and maps the full-resolution head back
// to d_low's value range. Output is on d_high's grid.
DepthMap fuse(const FusionNetParams& params, const DepthMap& d_low, const DepthMap& d_high);

}  // namespace depthfuse
