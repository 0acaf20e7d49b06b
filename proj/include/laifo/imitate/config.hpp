#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace laifo::imitate {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Precision { f32, f64 };

/// Training hyperparameters. Defaults follow the reference LAIfO settings;
/// network widths, buffer size, warmup and the noise schedule are local
/// choices documented in the README.
struct Config {
  std::int64_t frames = 200000;
  double sigma_start = 1.0;
  double sigma_end = 0.1;
  std::int64_t sigma_decay = 0;  ///< 0 means half of `frames`
  int depth = 3;
  int pad = 4;
  bool augment = true;  ///< random-shift crop on pixel observations
  double clip = 0.3;
  double tau = 0.01;
  int batch = 256;
  double lr = 1e-4;
  double lr_disc = 4e-4;
  double lambda = 10.0;
  double gamma = 0.99;
  int z_dim = 50;
  int hidden = 256;
  std::int64_t eval_interval = 10000;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
  std::int64_t warmup = 2000;
  std::int64_t capacity = 100000;
  int image_size = 84;
  Precision precision = Precision::f64;  ///< f32 is the opt-in fast path
  std::int64_t bc_steps = 10000;
  /// Scale on r_χ for rl_plus_videos; 0 gives the reward-only baseline
  /// while keeping every random stream identical.
  double imitation_weight = 1.0;
  /// Stop once the evaluation return reaches this value (never when unset).
  double stop_return = std::numeric_limits<double>::infinity();

  std::int64_t decay_frames() const { return sigma_decay > 0 ? sigma_decay : frames / 2; }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must satisfy 0 <= gamma < 1");
    if (batch < 1) fail("batch must be >= 1");
    if (!(lambda >= 0.0)) fail("lambda must be >= 0");
    if (!(clip > 0.0)) fail("clip must be > 0");
    if (depth < 1) fail("depth must be >= 1");
    if (pad < 0) fail("pad must be >= 0");
    if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0, 1]");
    if (!(lr >= 0.0) || !(lr_disc >= 0.0)) fail("learning rates must be >= 0");
    if (!(sigma_start >= 0.0) || !(sigma_end >= 0.0)) fail("sigma values must be >= 0");
    if (frames < 0) fail("frames must be >= 0");
    if (sigma_decay < 0) fail("sigma_decay must be >= 0");
    if (z_dim < 1 || hidden < 1) fail("z_dim and hidden must be >= 1");
    if (eval_interval < 1) fail("eval_interval must be >= 1");
    if (eval_episodes < 1) fail("eval_episodes must be >= 1");
    if (warmup < 0) fail("warmup must be >= 0");
    if (capacity < 1) fail("capacity must be >= 1");
    if (image_size != 32 && image_size != 84) fail("image_size must be 32 or 84");
    if (bc_steps < 0) fail("bc_steps must be >= 0");
    if (!(imitation_weight >= 0.0)) fail("imitation_weight must be >= 0");
  }
};

/// σ_t: linear from sigma_start to sigma_end over the decay horizon, then flat.
inline double sigma_schedule(const Config& cfg, std::int64_t t) {
  if (t < 0) throw std::invalid_argument("sigma_schedule: t must be >= 0");
  const std::int64_t horizon = cfg.decay_frames();
  if (horizon <= 0 || t >= horizon) return cfg.sigma_end;
  const double mix = static_cast<double>(t) / static_cast<double>(horizon);
  return cfg.sigma_start + mix * (cfg.sigma_end - cfg.sigma_start);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<N>) {
    r = std::from_chars(first, last, out);
  } else {
    // Accept integral values written in scientific notation, e.g. 2e5.
    double d = 0;
    r = std::from_chars(first, last, d);
    if (r.ec == std::errc() && r.ptr == last) {
      if (d != static_cast<double>(static_cast<N>(d))) throw ConfigError("config: '" + key + "' must be an integer");
      return static_cast<N>(d);
    }
  }
  if (r.ec != std::errc() || r.ptr != last) throw ConfigError("config: cannot parse '" + v + "' for key '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "crop") return true;
  if (v == "0" || v == "false" || v == "no" || v == "none") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace detail

/// Assigns one key; throws ConfigError on unknown keys or unparsable values.
inline void set_config_value(Config& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  const std::string v = detail::trim(value);
  if (key == "frames") cfg.frames = parse_number<std::int64_t>(key, v);
  else if (key == "sigma_start") cfg.sigma_start = parse_number<double>(key, v);
  else if (key == "sigma_end") cfg.sigma_end = parse_number<double>(key, v);
  else if (key == "sigma_decay") cfg.sigma_decay = parse_number<std::int64_t>(key, v);
  else if (key == "depth" || key == "d") cfg.depth = parse_number<int>(key, v);
  else if (key == "pad") cfg.pad = parse_number<int>(key, v);
  else if (key == "augmentation" || key == "augment") cfg.augment = detail::parse_bool(key, v);
  else if (key == "clip") cfg.clip = parse_number<double>(key, v);
  else if (key == "tau") cfg.tau = parse_number<double>(key, v);
  else if (key == "batch") cfg.batch = parse_number<int>(key, v);
  else if (key == "lr") cfg.lr = parse_number<double>(key, v);
  else if (key == "lr_disc") cfg.lr_disc = parse_number<double>(key, v);
  else if (key == "lambda") cfg.lambda = parse_number<double>(key, v);
  else if (key == "gamma") cfg.gamma = parse_number<double>(key, v);
  else if (key == "z_dim") cfg.z_dim = parse_number<int>(key, v);
  else if (key == "hidden") cfg.hidden = parse_number<int>(key, v);
  else if (key == "eval_interval") cfg.eval_interval = parse_number<std::int64_t>(key, v);
  else if (key == "eval_episodes") cfg.eval_episodes = parse_number<int>(key, v);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "warmup") cfg.warmup = parse_number<std::int64_t>(key, v);
  else if (key == "capacity") cfg.capacity = parse_number<std::int64_t>(key, v);
  else if (key == "image_size") cfg.image_size = parse_number<int>(key, v);
  else if (key == "bc_steps") cfg.bc_steps = parse_number<std::int64_t>(key, v);
  else if (key == "imitation_weight") cfg.imitation_weight = parse_number<double>(key, v);
  else if (key == "stop_return") cfg.stop_return = parse_number<double>(key, v);
  else if (key == "precision") {
    if (v == "f32" || v == "32") cfg.precision = Precision::f32;
    else if (v == "f64" || v == "64") cfg.precision = Precision::f64;
    else throw ConfigError("config: precision must be f32 or f64");
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

/// key=value text with '#' comments; `overrides` are applied after the file.
inline Config parse_config(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set_config_value(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

inline Config load_config(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  std::string text;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  return parse_config(text, overrides);
}

/// Canonical key=value rendering; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const Config& c) {
  std::ostringstream o;
  o.precision(17);
  o << "frames=" << c.frames << "\n"
    << "sigma_start=" << c.sigma_start << "\n"
    << "sigma_end=" << c.sigma_end << "\n"
    << "sigma_decay=" << c.sigma_decay << "\n"
    << "depth=" << c.depth << "\n"
    << "pad=" << c.pad << "\n"
    << "augmentation=" << (c.augment ? "crop" : "none") << "\n"
    << "clip=" << c.clip << "\n"
    << "tau=" << c.tau << "\n"
    << "batch=" << c.batch << "\n"
    << "lr=" << c.lr << "\n"
    << "lr_disc=" << c.lr_disc << "\n"
    << "lambda=" << c.lambda << "\n"
    << "gamma=" << c.gamma << "\n"
    << "z_dim=" << c.z_dim << "\n"
    << "hidden=" << c.hidden << "\n"
    << "eval_interval=" << c.eval_interval << "\n"
    << "eval_episodes=" << c.eval_episodes << "\n"
    << "seed=" << c.seed << "\n"
    << "warmup=" << c.warmup << "\n"
    << "capacity=" << c.capacity << "\n"
    << "image_size=" << c.image_size << "\n"
    << "precision=" << (c.precision == Precision::f32 ? "f32" : "f64") << "\n"
    << "bc_steps=" << c.bc_steps << "\n"
    << "imitation_weight=" << c.imitation_weight << "\n";
  if (std::isfinite(c.stop_return)) o << "stop_return=" << c.stop_return << "\n";
  return o.str();
}

/// Every key set_config_value accepts, in to_text order (aliases omitted).
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "frames",  "sigma_start",   "sigma_end",     "sigma_decay", "depth",    "pad",        "augmentation",
      "clip",    "tau",           "batch",         "lr",          "lr_disc",  "lambda",     "gamma",
      "z_dim",   "hidden",        "eval_interval", "eval_episodes", "seed",   "warmup",     "capacity",
      "image_size", "precision",  "bc_steps",      "imitation_weight", "stop_return"};
  return keys;
}

}  // namespace laifo::imitate
