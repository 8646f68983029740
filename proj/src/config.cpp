#include "mid/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mid/io.hpp"

namespace mid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
      section = trim(t.substr(1, t.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end() || !s->second.count(key))
    throw ConfigError("config: missing required key [" + section + "] " + key);
  return s->second.at(key);
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " = '" + v +
                      "' is not a number");
  }
}

std::size_t Config::get_size(const std::string& section, const std::string& key,
                             std::size_t fallback) const {
  const double d = get_double(section, key, static_cast<double>(fallback));
  if (d < 0.0 || d != static_cast<double>(static_cast<std::size_t>(d)))
    throw ConfigError("config: [" + section + "] " + key +
                      " must be a non-negative integer");
  return static_cast<std::size_t>(d);
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  try {
    std::size_t used = 0;
    const auto u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " = '" + v +
                      "' is not an unsigned integer");
  }
}

void Config::validate_schema(
    const std::map<std::string, std::vector<std::string>>& schema) const {
  for (const auto& [section, keys] : sections_) {
    const auto s = schema.find(section);
    if (s == schema.end()) {
      std::string accepted;
      for (const auto& [name, _] : schema) accepted += (accepted.empty() ? "" : ", ") + name;
      throw ConfigError("config: unknown section [" + section + "] (accepted: " + accepted +
                        ")");
    }
    for (const auto& [key, _] : keys) {
      if (std::find(s->second.begin(), s->second.end(), key) == s->second.end()) {
        std::string accepted;
        for (const auto& k : s->second) accepted += (accepted.empty() ? "" : ", ") + k;
        throw ConfigError("config: unknown key [" + section + "] " + key +
                          " (accepted: " + accepted + ")");
      }
    }
  }
}

std::string Config::canonical_string() const {
  std::ostringstream os;
  for (const auto& [section, keys] : sections_) {
    os << "[" << section << "]\n";
    for (const auto& [key, value] : keys) os << key << "=" << value << "\n";
  }
  return os.str();
}

std::uint64_t Config::hash() const { return fnv1a64(canonical_string()); }

NoiseProcessSpec process_from_config(const Config& cfg) {
  const std::string kind = cfg.get_or("process", "kind", "gaussian-additive");
  const std::size_t steps = cfg.get_size("process", "steps", 10);
  NoiseProcessSpec spec;
  switch (noise_kind_from_name(kind)) {
    case NoiseKind::GaussianAdditive:
      spec = NoiseProcessSpec::gaussian(steps, cfg.get_double("process", "sigma_total", 0.2));
      break;
    case NoiseKind::MultiplicativeLog:
      spec = NoiseProcessSpec::multiplicative_log(
          steps, cfg.get_double("process", "sigma_step", 0.02));
      break;
    case NoiseKind::PoissonLike:
      spec = NoiseProcessSpec::poisson_like(
          steps, cfg.get_double("process", "photon_scale", 200.0));
      break;
    case NoiseKind::OutlierPoints:
      spec = NoiseProcessSpec::outlier_points(
          steps, cfg.get_size("process", "points_per_step", 20));
      break;
    case NoiseKind::SignalInterference: {
      spec.kind = NoiseKind::SignalInterference;
      spec.total_steps = steps;
      spec.per_step_magnitude.assign(steps,
                                     cfg.get_double("process", "snr_decrement_db", 5.0));
      spec.interference_start_snr_db =
          cfg.get_double("process", "start_snr_db", 40.0);
      if (cfg.has("process", "template_file"))
        spec.interference_template = read_tensor(cfg.get("process", "template_file"));
      break;
    }
  }
  return spec;
}

ModelSpec model_from_config(const Config& cfg) {
  ModelSpec m;
  m.kind = model_kind_from_name(cfg.get_or("model", "kind", "image"));
  m.mode = noise_mode_from_name(cfg.get_or(
      "model", "mode", m.kind == ModelKind::Image ? "regression" : "classification"));
  m.image_h = cfg.get_size("model", "image_h", 16);
  m.image_w = cfg.get_size("model", "image_w", 16);
  m.psi_channels = cfg.get_size("model", "psi_channels", 12);
  m.psi_hidden = cfg.get_size("model", "psi_hidden", 16);
  m.phi_channels = cfg.get_size("model", "phi_channels", 16);
  m.point_hidden = cfg.get_size("model", "point_hidden", 48);
  m.validate();
  return m;
}

TrainConfig train_config_from_config(const Config& cfg, std::uint64_t seed_override,
                                     bool has_seed_override) {
  TrainConfig tc;
  tc.epochs = cfg.get_size("train", "epochs", 150);
  tc.batch_size = cfg.get_size("train", "batch_size", 8);
  tc.optim.lr = cfg.get_double("train", "lr", 1e-4);
  tc.optim.beta1 = cfg.get_double("train", "beta1", 0.9);
  tc.optim.beta2 = cfg.get_double("train", "beta2", 0.999);
  tc.optim.eps = cfg.get_double("train", "adam_eps", 1e-8);
  tc.optim.weight_decay = cfg.get_double("train", "weight_decay", 0.01);
  tc.eval_every = cfg.get_size("train", "eval_every", 1);
  tc.seed = has_seed_override ? seed_override : cfg.get_u64("train", "seed", 0);
  tc.process = process_from_config(cfg);
  tc.model = model_from_config(cfg);
  return tc;
}

SceneSpec scene_spec_from_config(const Config& cfg) {
  SceneSpec s;
  s.n_lines = cfg.get_size("scene", "n_lines", 2);
  s.min_points = cfg.get_size("scene", "min_points", 40);
  s.max_points = cfg.get_size("scene", "max_points", 100);
  s.noise_std_lo = cfg.get_double("scene", "noise_std_lo", 0.007);
  s.noise_std_hi = cfg.get_double("scene", "noise_std_hi", 0.008);
  s.outlier_fraction_lo = cfg.get_double("scene", "outlier_fraction_lo", 0.40);
  s.outlier_fraction_hi = cfg.get_double("scene", "outlier_fraction_hi", 0.60);
  s.validate();
  return s;
}

SignalSpec signal_spec_from_config(const Config& cfg) {
  SignalSpec s;
  s.sample_rate = cfg.get_double("signal", "sample_rate", 1000.0);
  s.duration_s = cfg.get_double("signal", "duration_s", 2.0);
  s.semg_band_lo_hz = cfg.get_double("signal", "band_lo_hz", 20.0);
  s.semg_band_hi_hz = cfg.get_double("signal", "band_hi_hz", 150.0);
  s.ecg_rate_hz = cfg.get_double("signal", "ecg_rate_hz", 1.2);
  s.ecg_rate_jitter = cfg.get_double("signal", "ecg_rate_jitter", 0.02);
  s.ecg_amp_jitter = cfg.get_double("signal", "ecg_amp_jitter", 0.1);
  s.validate();
  return s;
}

}  // namespace mid
