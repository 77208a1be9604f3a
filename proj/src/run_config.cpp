#include "depthfuse/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "depthfuse/error.hpp"

namespace depthfuse {

namespace {

using T = RunConfig::Type;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename V>
bool parse_number(std::string_view s, V& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

const std::vector<RunConfig::Entry>& RunConfig::schema() {
  static const std::vector<Entry> entries = {
      {"alpha", T::Double, "0.15", "edge threshold fraction"},
      {"beta", T::Double, "60", "max sampling offset along the gradient (pixels)"},
      {"tau", T::Double, "0.001", "ordinal tolerance"},
      {"sigma", T::Double, "0.1", "ranking-loss regulariser"},
      {"weight_gf", T::Double, "12", "pair weight for guided-filter pairs"},
      {"weight_high", T::Double, "8", "pair weight for high-resolution pairs"},
      {"max_pairs", T::UInt, "10000", "pair cap per sampling call (0 = none)"},
      {"gf_radius", T::Int, "0", "guided filter radius (0 = width / 12)"},
      {"gf_eps", T::Double, "1e-12", "guided filter regulariser"},
      {"dilate", T::Int, "2", "edge-mask dilation radius for Poisson fusion"},
      {"poisson_tol", T::Double, "1e-12", "relative residual tolerance"},
      {"poisson_max_iter", T::Int, "0", "CG iteration cap (0 = 10 sqrt(N))"},
      {"levels", T::Int, "4", "network pyramid levels"},
      {"base_channels", T::Int, "8", "channels at level 0"},
      {"low_w", T::Int, "64", "network low-resolution width"},
      {"low_h", T::Int, "64", "network low-resolution height"},
      {"high_w", T::Int, "192", "network high-resolution width"},
      {"high_h", T::Int, "192", "network high-resolution height"},
      {"lr", T::Double, "1e-4", "base learning rate"},
      {"batch", T::Int, "2", "batch size"},
      {"steps", T::Int, "500", "training steps"},
      {"weight_decay", T::Double, "1e-4", "decoupled weight decay"},
      {"cosine", T::Bool, "true", "cosine annealing over the run"},
      {"augment", T::Bool, "true", "random flips and sign inversion"},
      {"seed", T::UInt, "42", "seed of every random stream"},
      {"ord_pairs", T::UInt, "50000", "random pairs for the ORD metric"},
      {"fixtures", T::Int, "5", "synthetic fixtures in a noise sweep"},
      {"blur_sigma", T::Double, "8", "fixture low-resolution blur (high-grid pixels)"},
      {"bias_x", T::Double, "2", "fixture planar bias along x"},
      {"bias_y", T::Double, "-1.5", "fixture planar bias along y"},
  };
  return entries;
}

RunConfig::RunConfig() {
  for (const Entry& e : schema()) values_.emplace(std::string(e.key), std::string(e.fallback));
}

const RunConfig::Entry& RunConfig::entry(std::string_view key) const {
  for (const Entry& e : schema()) {
    if (e.key == key) return e;
  }
  throw Error(Errc::InvalidConfig, "unknown config key '" + std::string(key) + "'");
}

bool RunConfig::is_known(std::string_view key) const { return values_.contains(key); }

void RunConfig::set(std::string_view key, std::string_view value) {
  const Entry& e = entry(key);
  value = trim(value);
  bool ok = false;
  std::string canonical(value);
  switch (e.type) {
    case T::Int: {
      std::int64_t v;
      ok = parse_number(value, v);
      break;
    }
    case T::UInt: {
      std::uint64_t v;
      ok = parse_number(value, v);
      break;
    }
    case T::Double: {
      double v;
      ok = parse_number(value, v) && std::isfinite(v);
      break;
    }
    case T::Bool: {
      bool v;
      ok = parse_bool(value, v);
      if (ok) canonical = v ? "true" : "false";
      break;
    }
  }
  if (!ok) {
    throw Error(Errc::InvalidConfig,
                "bad value '" + std::string(value) + "' for key '" + std::string(key) + "'");
  }
  values_.find(key)->second = canonical;
}

void RunConfig::load_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidConfig, where + ": expected key = value");
    }
    try {
      set(trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(Errc::InvalidConfig, where + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

const std::string& RunConfig::raw(std::string_view key) const {
  entry(key);
  return values_.find(key)->second;
}

double RunConfig::get_double(std::string_view key) const {
  double v = 0.0;
  parse_number(std::string_view(raw(key)), v);
  return v;
}

std::int64_t RunConfig::get_int(std::string_view key) const {
  std::int64_t v = 0;
  parse_number(std::string_view(raw(key)), v);
  return v;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  std::uint64_t v = 0;
  parse_number(std::string_view(raw(key)), v);
  return v;
}

bool RunConfig::get_bool(std::string_view key) const {
  bool v = false;
  parse_bool(raw(key), v);
  return v;
}

SampleConfig RunConfig::sampling() const {
  SampleConfig c;
  c.alpha = get_double("alpha");
  c.beta = get_double("beta");
  c.tau = get_double("tau");
  c.sigma = get_double("sigma");
  c.weight_gf = get_double("weight_gf");
  c.weight_high = get_double("weight_high");
  c.max_pairs = get_u64("max_pairs");
  c.rng_seed = get_u64("seed");
  c.validate();
  return c;
}

GuidedFuseParams RunConfig::guided() const {
  GuidedFuseParams p;
  p.radius = static_cast<int>(get_int("gf_radius"));
  p.eps = get_double("gf_eps");
  if (p.radius < 0 || p.eps < 0.0) throw Error(Errc::InvalidConfig, "gf_radius/gf_eps negative");
  return p;
}

PoissonOptions RunConfig::poisson() const {
  PoissonOptions o;
  o.tol = get_double("poisson_tol");
  o.max_iter = static_cast<int>(get_int("poisson_max_iter"));
  if (o.tol <= 0.0 || o.max_iter < 0) throw Error(Errc::InvalidConfig, "bad Poisson options");
  return o;
}

int RunConfig::dilate() const {
  const auto d = get_int("dilate");
  if (d < 0) throw Error(Errc::InvalidConfig, "dilate must be >= 0");
  return static_cast<int>(d);
}

FusionNetConfig RunConfig::net() const {
  FusionNetConfig c;
  c.levels = static_cast<int>(get_int("levels"));
  c.base_channels = static_cast<int>(get_int("base_channels"));
  c.low_w = static_cast<int>(get_int("low_w"));
  c.low_h = static_cast<int>(get_int("low_h"));
  c.high_w = static_cast<int>(get_int("high_w"));
  c.high_h = static_cast<int>(get_int("high_h"));
  c.head_scales = std::min(3, c.levels);
  c.seed = get_u64("seed");
  c.validate();
  return c;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.steps = static_cast<int>(get_int("steps"));
  t.batch = static_cast<int>(get_int("batch"));
  t.augment = get_bool("augment");
  t.sampling = sampling();
  t.seed = get_u64("seed");
  t.optimizer.lr = get_double("lr");
  t.optimizer.weight_decay = get_double("weight_decay");
  // total_steps 0 lets train() anneal over the whole run; -1 disables.
  t.optimizer.total_steps = get_bool("cosine") ? 0 : -1;
  if (t.steps < 0 || t.batch < 1 || t.optimizer.lr <= 0.0) {
    throw Error(Errc::InvalidConfig, "steps >= 0, batch >= 1 and lr > 0 required");
  }
  return t;
}

FixtureParams RunConfig::fixtures() const {
  FixtureParams p;
  p.low_w = static_cast<int>(get_int("low_w"));
  p.low_h = static_cast<int>(get_int("low_h"));
  p.high_w = static_cast<int>(get_int("high_w"));
  p.high_h = static_cast<int>(get_int("high_h"));
  p.blur_sigma = get_double("blur_sigma");
  p.bias_x = get_double("bias_x");
  p.bias_y = get_double("bias_y");
  return p;
}

}  // namespace depthfuse
