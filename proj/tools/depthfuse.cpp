// depthfuse: command-line front end.
//
// Exit codes: 0 ok, 1 usage / configuration error, 2 data error,
// 3 numerical failure (solver did not converge, loss not finite).

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "depthfuse/error.hpp"
#include "depthfuse/fusenet.hpp"
#include "depthfuse/gradops.hpp"
#include "depthfuse/io_util.hpp"
#include "depthfuse/logging.hpp"
#include "depthfuse/metrics.hpp"
#include "depthfuse/noise.hpp"
#include "depthfuse/poisson.hpp"
#include "depthfuse/raster.hpp"
#include "depthfuse/run_config.hpp"
#include "depthfuse/sampling.hpp"
#include "depthfuse/synthetic.hpp"
#include "depthfuse/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace depthfuse;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Config keys exposed as --key-with-dashes on every subcommand, plus a few
// short aliases.
struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  bool json = false;
};

std::string flag_names(std::string_view key) {
  std::string name(key);
  std::replace(name.begin(), name.end(), '_', '-');
  std::string names = "--" + name;
  if (key == "poisson_tol") names += ",--tol";
  if (key == "gf_radius") names += ",--radius";
  if (key == "gf_eps") names += ",--eps";
  return names;
}

void add_common(CLI::App* sub, Overrides& ov) {
  sub->add_option("--config", ov.config_path, "key = value config file (flags override it)")
      ->check(CLI::ExistingFile);
  sub->add_flag("--json", ov.json, "print a JSON summary with the effective config");
  for (const RunConfig::Entry& e : RunConfig::schema()) {
    std::string& slot = ov.values[std::string(e.key)];
    CLI::Option* opt = sub->add_option(flag_names(e.key), slot,
                                       std::string(e.help) + " [" + std::string(e.fallback) + "]");
    opt->group("Config overrides");
    ov.options.emplace_back(std::string(e.key), opt);
  }
}

RunConfig effective_config(const Overrides& ov) {
  RunConfig cfg;
  if (!ov.config_path.empty()) cfg.load_file(ov.config_path);
  for (const auto& [key, opt] : ov.options) {
    if (opt->count() > 0) cfg.set(key, ov.values.at(key));
  }
  return cfg;
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  for (const RunConfig::Entry& e : RunConfig::schema()) {
    const std::string key(e.key);
    switch (e.type) {
      case RunConfig::Type::Int:
        j[key] = cfg.get_int(key);
        break;
      case RunConfig::Type::UInt:
        j[key] = cfg.get_u64(key);
        break;
      case RunConfig::Type::Double:
        j[key] = cfg.get_double(key);
        break;
      case RunConfig::Type::Bool:
        j[key] = cfg.get_bool(key);
        break;
    }
  }
  return j;
}

json envelope(const std::string& command, const RunConfig& cfg) {
  return json{{"tool", "depthfuse"},
              {"version", std::string(kVersion)},
              {"command", command},
              {"config", config_json(cfg)}};
}

void emit(const Overrides& ov, const json& j) {
  if (ov.json) std::cout << j.dump(2) << '\n';
}

DepthMap load_depth(const fs::path& p) { return DepthMap(read_pfm(p)); }

json metrics_json(const MetricsReport& m) {
  json j{{"absrel", m.absrel},       {"sqrel", m.sqrel},   {"rms", m.rms},
         {"log10", m.log10},         {"delta1", m.delta1}, {"delta2", m.delta2},
         {"delta3", m.delta3},       {"n_valid", m.n_valid},
         {"clamped", m.clamped},
         {"alignment", {{"s", m.alignment.s}, {"t", m.alignment.t},
                        {"degenerate", m.alignment.degenerate}}}};
  j["d3r"] = m.d3r ? json(*m.d3r) : json(nullptr);
  j["ord"] = m.ord ? json(*m.ord) : json(nullptr);
  return j;
}

MetricsOptions metrics_options(const RunConfig& cfg, bool align) {
  MetricsOptions o;
  o.align = align;
  o.sampling = cfg.sampling();
  o.sampling.max_pairs = 0;
  o.ord_pairs = cfg.get_u64("ord_pairs");
  o.seed = cfg.get_u64("seed");
  return o;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---- commands ----------------------------------------------------------------

int cmd_fuse_gf(const Overrides& ov, const fs::path& low, const fs::path& high,
                const fs::path& out) {
  const RunConfig cfg = effective_config(ov);
  const DepthMap d_high = load_depth(high);
  const DepthMap fused = guided_fuse(load_depth(low), d_high, cfg.guided());
  write_pfm(fused.raster, out);
  json j = envelope("fuse-gf", cfg);
  j["output"] = out.string();
  j["radius"] = cfg.guided().effective_radius(d_high.width());
  emit(ov, j);
  return 0;
}

int cmd_fuse_poisson(const Overrides& ov, const fs::path& low, const fs::path& high,
                     const fs::path& out) {
  const RunConfig cfg = effective_config(ov);
  const EdgePoissonResult r = poisson_fuse_edges(load_depth(low), load_depth(high),
                                                 cfg.get_double("alpha"), cfg.dilate(),
                                                 cfg.poisson());
  write_pfm(r.fused.raster, out);
  json j = envelope("fuse-poisson", cfg);
  j["output"] = out.string();
  j["omega_pixels"] = r.omega_size;
  j["iterations"] = r.solve.iterations;
  j["relative_residual"] = r.solve.relative_residual;
  emit(ov, j);
  return 0;
}

int cmd_fuse_net(const Overrides& ov, const fs::path& low, const fs::path& high,
                 const fs::path& params_path, const fs::path& out) {
  const RunConfig cfg = effective_config(ov);
  const FusionNetParams params = load_params(params_path);
  const DepthMap fused = fuse(params, load_depth(low), load_depth(high));
  write_pfm(fused.raster, out);
  json j = envelope("fuse-net", cfg);
  j["output"] = out.string();
  j["parameters"] = params.parameter_count();
  emit(ov, j);
  return 0;
}

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "step,lr,milnr,rank,total\n";
  for (const TrainLogRow& r : rows) {
    os << r.step << ',' << r.lr << ',' << r.milnr << ',' << r.rank << ',' << r.total << '\n';
  }
  return os.str();
}

int cmd_train(const Overrides& ov, const fs::path& data_dir, const fs::path& out,
              fs::path log_path) {
  const RunConfig cfg = effective_config(ov);
  const FusionNetConfig net_cfg = cfg.net();
  const TrainConfig train_cfg = cfg.training();
  if (log_path.empty()) log_path = out.parent_path() / "train.csv";

  if (!fs::is_directory(data_dir)) {
    throw Error(Errc::IoFailure, "not a directory: " + data_dir.string());
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    const std::string f = entry.path().filename().string();
    const std::string suffix = "_low.pfm";
    if (f.size() > suffix.size() && f.ends_with(suffix)) {
      names.push_back(f.substr(0, f.size() - suffix.size()));
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) {
    throw Error(Errc::IoFailure, "no {name}_low.pfm / {name}_high.pfm pairs in " +
                                     data_dir.string());
  }
  std::vector<TrainingSample> data;
  for (const std::string& n : names) {
    const fs::path hp = data_dir / (n + "_high.pfm");
    if (!fs::exists(hp)) throw Error(Errc::IoFailure, "missing " + hp.string());
    data.push_back(prepare_sample(read_pfm(data_dir / (n + "_low.pfm")), read_pfm(hp), net_cfg,
                                  cfg.guided()));
  }
  log::info("training on {} sample(s) for {} steps", data.size(), train_cfg.steps);

  const FusionNetParams params = build(net_cfg);
  std::vector<TrainLogRow> rows;
  try {
    train(params, data, train_cfg, [&rows](const TrainLogRow& r) {
      rows.push_back(r);
      if (r.step % 50 == 0) {
        log::info("step {} lr {:.3e} milnr {:.5f} rank {:.5f} total {:.5f}", r.step, r.lr,
                  r.milnr, r.rank, r.total);
      }
    });
  } catch (const Error&) {
    io::write_file_atomic(log_path, train_log_csv(rows));
    throw;
  }
  io::write_file_atomic(log_path, train_log_csv(rows));
  save_params(params, out);

  json j = envelope("train", cfg);
  j["samples"] = names;
  j["output"] = out.string();
  j["log"] = log_path.string();
  j["parameters"] = params.parameter_count();
  if (!rows.empty()) {
    j["initial_total"] = rows.front().total;
    j["final_total"] = rows.back().total;
  }
  emit(ov, j);
  return 0;
}

struct EvalJob {
  std::string pred;
  std::string gt;
};

std::vector<EvalJob> read_eval_list(const fs::path& list) {
  std::ifstream in(list);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + list.string());
  std::vector<EvalJob> jobs;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    EvalJob j;
    if (!(ls >> j.pred)) continue;
    if (!(ls >> j.gt)) throw Error(Errc::IoFailure, "eval list line without gt: " + line);
    jobs.push_back(j);
  }
  return jobs;
}

// Loss of `pred` under the training objective, with d_gf and the pairs built
// from (low, high) the way training does: every map min-max scaled to [-1, 1]
// on pred's grid, heads obtained by resizing pred.
json loss_json(const RunConfig& cfg, const Raster& pred_raw, const Raster& low_raw,
               const Raster& high_raw) {
  const int w = pred_raw.width();
  const int h = pred_raw.height();
  const Raster low = minmax_scale(low_raw);
  const Raster high = minmax_scale(resize_bilinear(high_raw, w, h));
  const Raster pred = minmax_scale(pred_raw);
  const Raster gf = guided_fuse(low, high, cfg.guided());
  const FusionNetConfig net = cfg.net();
  const SampleConfig sc = cfg.sampling();
  Rng rng(sc.rng_seed);
  const std::vector<ScaleTargets> targets =
      build_scale_targets(low, gf, high, w, h, net.head_scales, sc, rng);
  std::vector<Raster> preds;
  for (int s = 0; s < net.head_scales; ++s) preds.push_back(resize_bilinear(pred, w >> s, h >> s));
  const LossBreakdown lb = fusion_loss(preds, targets, sc.sigma);
  return json{{"milnr", lb.milnr},
              {"rank", lb.rank},
              {"total", lb.total},
              {"per_scale_milnr", lb.per_scale_milnr},
              {"per_scale_rank", lb.per_scale_rank},
              {"ablation",
               {{"gradient", gradient_loss(pred, resize_bilinear(low, w, h))},
                {"ordinal_rank", ordinal_ranking_loss(pred, gf, targets[0].pairs, sc.tau)}}}};
}

int cmd_eval(const Overrides& ov, const std::string& pred, const std::string& gt, bool align,
             const std::string& batch, const std::string& out, int jobs, bool loss,
             const std::string& loss_low, const std::string& loss_high) {
  const RunConfig cfg = effective_config(ov);
  const MetricsOptions mo = metrics_options(cfg, align);

  if (loss) {
    if (pred.empty() || loss_low.empty() || loss_high.empty()) {
      throw CLI::ValidationError("eval --loss needs PRED, --low and --high");
    }
    json j = envelope("eval", cfg);
    j["loss"] = loss_json(cfg, read_pfm(pred), read_pfm(loss_low), read_pfm(loss_high));
    if (!gt.empty()) j["metrics"] = metrics_json(compute_metrics(load_depth(pred), load_depth(gt), mo));
    std::cout << j.dump(2) << '\n';
    return 0;
  }

  if (batch.empty()) {
    if (pred.empty() || gt.empty()) throw CLI::ValidationError("eval needs PRED and GT");
    const MetricsReport m = compute_metrics(load_depth(pred), load_depth(gt), mo);
    if (ov.json) {
      json j = envelope("eval", cfg);
      j["align"] = align;
      j["metrics"] = metrics_json(m);
      std::cout << j.dump(2) << '\n';
    } else {
      std::printf("absrel %.6f\nsqrel %.6f\nrms %.6f\nlog10 %.6f\n", m.absrel, m.sqrel, m.rms,
                  m.log10);
      std::printf("delta1 %.6f\ndelta2 %.6f\ndelta3 %.6f\n", m.delta1, m.delta2, m.delta3);
      if (m.d3r) std::printf("d3r %.6f\n", *m.d3r);
      if (m.ord) std::printf("ord %.6f\n", *m.ord);
      std::printf("n_valid %zu\n", m.n_valid);
    }
    return 0;
  }

  if (out.empty()) throw CLI::ValidationError("batch eval needs --out");
  const std::vector<EvalJob> list = read_eval_list(batch);
  std::vector<std::string> rows(list.size());
  std::vector<std::string> errors(list.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < list.size(); i = next++) {
      try {
        const MetricsReport m = compute_metrics(load_depth(list[i].pred), load_depth(list[i].gt), mo);
        std::ostringstream os;
        os << list[i].pred << ',' << list[i].gt << ',' << m.n_valid;
        for (double v : {m.absrel, m.sqrel, m.rms, m.log10, m.delta1, m.delta2, m.delta3}) {
          os << ',' << fmt_double(v);
        }
        os << ',' << (m.d3r ? fmt_double(*m.d3r) : "") << ','
           << (m.ord ? fmt_double(*m.ord) : "") << ',' << fmt_double(m.alignment.s) << ','
           << fmt_double(m.alignment.t);
        rows[i] = os.str();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(list.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error(Errc::IoFailure, list[i].pred + " vs " + list[i].gt + ": " + errors[i]);
    }
  }
  std::string csv = "pred,gt,n_valid,absrel,sqrel,rms,log10,delta1,delta2,delta3,d3r,ord,s,t\n";
  for (const std::string& r : rows) csv += r + "\n";
  io::write_file_atomic(out, csv);
  json j = envelope("eval", cfg);
  j["align"] = align;
  j["rows"] = rows.size();
  j["output"] = out;
  emit(ov, j);
  return 0;
}

int cmd_sample_pairs(const Overrides& ov, const fs::path& depth, const fs::path& out,
                     const std::string& supervision, const std::string& source_name) {
  const RunConfig cfg = effective_config(ov);
  const SampleConfig sc = cfg.sampling();
  const Raster d = read_pfm(depth);
  const Raster sup = supervision.empty() ? d : read_pfm(supervision);
  const PairSource source = source_name == "gf" ? PairSource::FromGf : PairSource::FromHigh;
  Rng rng(sc.rng_seed);
  PairList pairs = sample_pairs_on(d, sup, sc, source, rng);
  const double w = source == PairSource::FromGf ? sc.weight_gf : sc.weight_high;
  std::ostringstream os;
  os << "x_i,y_i,x_j,y_j,source,weight,z\n";
  for (const PointPair& p : pairs) {
    os << p.i.x << ',' << p.i.y << ',' << p.j.x << ',' << p.j.y << ',' << to_string(p.source)
       << ',' << fmt_double(w) << ',' << p.z << '\n';
  }
  io::write_file_atomic(out, os.str());
  json j = envelope("sample-pairs", cfg);
  j["output"] = out.string();
  j["pairs"] = pairs.size();
  emit(ov, j);
  return 0;
}

int cmd_edges(const Overrides& ov, const fs::path& img, const fs::path& out) {
  const RunConfig cfg = effective_config(ov);
  const EdgeMap e = edge_map(sobel(read_pfm(img)), cfg.get_double("alpha"));
  Raster r(e.mask.width(), e.mask.height());
  for (std::size_t i = 0; i < e.mask.size(); ++i) r[i] = e.mask[i] ? 1.0 : 0.0;
  write_pgm(r, out, 255);
  json j = envelope("edges", cfg);
  j["output"] = out.string();
  j["edge_pixels"] = e.mask.count();
  emit(ov, j);
  return 0;
}

int cmd_noise_sweep(const Overrides& ov, const fs::path& out, const std::string& pipeline,
                    const std::string& params_path, const std::string& kind) {
  const RunConfig cfg = effective_config(ov);
  const std::uint64_t seed = cfg.get_u64("seed");
  const std::vector<Fixture> fixtures =
      make_fixture_set(cfg.fixtures(), static_cast<int>(cfg.get_int("fixtures")), seed);

  std::vector<NoiseSpec> specs;
  if (kind == "gaussian") {
    specs = variance_grid(seed);
  } else {
    for (int k = 0; k <= 5; ++k) specs.push_back(NoiseSpec::pepper(1.0 - 0.01 * k, seed));
  }

  FusionPipeline fn;
  if (pipeline == "gf") {
    const GuidedFuseParams gp = cfg.guided();
    fn = [gp](const DepthMap& low, const DepthMap& high) { return guided_fuse(low, high, gp); };
  } else if (pipeline == "poisson") {
    const double alpha = cfg.get_double("alpha");
    const int dilate = cfg.dilate();
    const PoissonOptions po = cfg.poisson();
    fn = [=](const DepthMap& low, const DepthMap& high) {
      return poisson_fuse_edges(low, high, alpha, dilate, po).fused;
    };
  } else {
    if (params_path.empty()) throw CLI::ValidationError("--pipeline net needs --params");
    auto params = std::make_shared<FusionNetParams>(load_params(params_path));
    fn = [params](const DepthMap& low, const DepthMap& high) { return fuse(*params, low, high); };
  }

  const std::vector<SweepRow> rows = noise_sweep(fn, fixtures, specs);
  write_sweep_csv(rows, out);
  json j = envelope("noise-sweep", cfg);
  j["output"] = out.string();
  j["pipeline"] = pipeline;
  j["kind"] = kind;
  j["rows"] = rows.size();
  emit(ov, j);
  return 0;
}

int cmd_make_fixtures(const Overrides& ov, const fs::path& dir) {
  const RunConfig cfg = effective_config(ov);
  fs::create_directories(dir);
  const std::vector<Fixture> fixtures = make_fixture_set(
      cfg.fixtures(), static_cast<int>(cfg.get_int("fixtures")), cfg.get_u64("seed"));
  json names = json::array();
  for (const Fixture& f : fixtures) {
    write_pfm(f.low.raster, dir / (f.name + "_low.pfm"));
    write_pfm(f.high.raster, dir / (f.name + "_high.pfm"));
    write_pfm(f.gt.raster, dir / (f.name + "_gt.pfm"));
    write_pfm(f.image, dir / (f.name + "_image.pfm"));
    names.push_back(f.name);
  }
  json j = envelope("make-fixtures", cfg);
  j["output"] = dir.string();
  j["fixtures"] = names;
  emit(ov, j);
  return 0;
}

int exit_code_for(const Error& e) {
  if (e.code() == Errc::InvalidConfig) return kExitUsage;
  if (is_numerical(e.code())) return kExitNumerical;
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();

  CLI::App app{"Depth map fusion toolkit: guided-filter, Poisson and learned fusion of a "
               "low- and a high-resolution depth estimate, plus evaluation tools."};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // Each subcommand gets its own override set; only the parsed one is used.
  std::map<std::string, Overrides> ov;
  std::function<int()> run;

  std::string low, high, out, params, pred, gt, batch, supervision, source = "high";
  std::string pipeline = "gf", kind = "gaussian", log_path;
  std::string loss_low, loss_high;
  bool align = false, loss = false;
  int jobs = 1;

  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, ov[name]);
    return s;
  };

  CLI::App* gf = sub("fuse-gf", "guided-filter fusion (d_high guides upsampled d_low)");
  gf->add_option("low", low, "low-resolution depth (PFM)")->required()->check(CLI::ExistingFile);
  gf->add_option("high", high, "high-resolution depth (PFM)")->required()->check(CLI::ExistingFile);
  gf->add_option("out", out, "output PFM")->required();
  gf->callback([&] { run = [&] { return cmd_fuse_gf(ov["fuse-gf"], low, high, out); }; });

  CLI::App* ps = sub("fuse-poisson", "edge-mask Poisson fusion");
  ps->add_option("low", low, "low-resolution depth (PFM)")->required()->check(CLI::ExistingFile);
  ps->add_option("high", high, "high-resolution depth (PFM)")->required()->check(CLI::ExistingFile);
  ps->add_option("out", out, "output PFM")->required();
  ps->callback([&] { run = [&] { return cmd_fuse_poisson(ov["fuse-poisson"], low, high, out); }; });

  CLI::App* fn = sub("fuse-net", "fusion with a trained network");
  fn->add_option("low", low, "low-resolution depth (PFM)")->required()->check(CLI::ExistingFile);
  fn->add_option("high", high, "high-resolution depth (PFM)")->required()->check(CLI::ExistingFile);
  fn->add_option("params", params, "parameter file (DFNP)")->required()->check(CLI::ExistingFile);
  fn->add_option("out", out, "output PFM")->required();
  fn->callback([&] {
    run = [&] { return cmd_fuse_net(ov["fuse-net"], low, high, params, out); };
  });

  CLI::App* tr = sub("train", "self-supervised training on {name}_low.pfm/{name}_high.pfm pairs");
  tr->add_option("data_dir", low, "dataset directory")->required();
  tr->add_option("out", out, "output parameter file (DFNP)")->required();
  tr->add_option("--log", log_path, "training log CSV [<out dir>/train.csv]");
  tr->callback([&] { run = [&] { return cmd_train(ov["train"], low, out, log_path); }; });

  CLI::App* ev = sub("eval", "depth metrics of a prediction against ground truth");
  ev->add_option("pred", pred, "prediction (PFM)");
  ev->add_option("gt", gt, "ground truth (PFM)");
  ev->add_flag("--align", align, "least-squares scale/shift alignment first");
  ev->add_option("--list", batch, "list of 'pred,gt' lines; writes one CSV row per pair")
      ->check(CLI::ExistingFile);
  ev->add_option("--out", out, "batch output CSV");
  ev->add_option("--jobs", jobs, "worker threads in batch mode")->check(CLI::PositiveNumber);
  ev->add_flag("--loss", loss, "print the training loss of PRED as JSON (needs --low, --high)");
  ev->add_option("--low", loss_low, "low-resolution input for --loss")->check(CLI::ExistingFile);
  ev->add_option("--high", loss_high, "high-resolution input for --loss")->check(CLI::ExistingFile);
  ev->callback([&] {
    run = [&] {
      return cmd_eval(ov["eval"], pred, gt, align, batch, out, jobs, loss, loss_low, loss_high);
    };
  });

  CLI::App* sp = sub("sample-pairs", "dump edge-guided point pairs as CSV");
  sp->add_option("depth", low, "map whose edges drive sampling (PFM)")
      ->required()
      ->check(CLI::ExistingFile);
  sp->add_option("out", out, "output CSV")->required();
  sp->add_option("--supervision", supervision, "map that labels z (default: the input)")
      ->check(CLI::ExistingFile);
  sp->add_option("--source", source, "source tag")->check(CLI::IsMember({"gf", "high"}));
  sp->callback([&] {
    run = [&] { return cmd_sample_pairs(ov["sample-pairs"], low, out, supervision, source); };
  });

  CLI::App* ed = sub("edges", "Sobel edge map thresholded at (1 - alpha) max, as PGM");
  ed->add_option("img", low, "input (PFM)")->required()->check(CLI::ExistingFile);
  ed->add_option("out", out, "output PGM")->required();
  ed->callback([&] { run = [&] { return cmd_edges(ov["edges"], low, out); }; });

  CLI::App* ns = sub("noise-sweep", "noise robustness sweep over synthetic fixtures");
  ns->add_option("out", out, "output CSV")->required();
  ns->add_option("--pipeline", pipeline, "fusion pipeline")
      ->check(CLI::IsMember({"gf", "poisson", "net"}));
  ns->add_option("--params", params, "parameter file for --pipeline net")
      ->check(CLI::ExistingFile);
  ns->add_option("--kind", kind, "noise kind")->check(CLI::IsMember({"gaussian", "pepper"}));
  ns->callback([&] {
    run = [&] { return cmd_noise_sweep(ov["noise-sweep"], out, pipeline, params, kind); };
  });

  CLI::App* mf = sub("make-fixtures", "write synthetic fixtures ({name}_low/_high/_gt/_image.pfm)");
  mf->add_option("dir", out, "output directory")->required();
  mf->callback([&] { run = [&] { return cmd_make_fixtures(ov["make-fixtures"], out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    return run();
  } catch (const CLI::Error& e) {
    std::cerr << "depthfuse: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "depthfuse: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "depthfuse: " << e.what() << '\n';
    return kExitData;
  }
}
