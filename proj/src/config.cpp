#include "ursa/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ursa/error.hpp"

namespace ursa {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "' (expected " +
                    std::string(expected) + ")");
}

double parse_real(std::string_view key, std::string_view value) {
  double v = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) bad_value(key, value, "a finite real number");
  return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "a non-negative integer");
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true|false");
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_counts(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

}  // namespace

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }
std::string_view to_string(Precision precision) { return precision == Precision::f32 ? "f32" : "f64"; }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"measure", "distance measure: gaussian | exponential | minimum (default gaussian)"},
      {"stars", "constellation size m (default 256)"},
      {"sigma", "Gaussian width (default 0.1)"},
      {"lambda", "exponential decay rate (default 10)"},
      {"hidden1", "first dense width (default 512)"},
      {"hidden2", "second dense width (default 256)"},
      {"lr", "learning rate (default 0.001)"},
      {"batch", "minibatch size (default 32)"},
      {"epochs", "training epochs (default 250)"},
      {"optimizer", "adam | sgd (default adam)"},
      {"beta1", "Adam first-moment decay (default 0.9)"},
      {"beta2", "Adam second-moment decay (default 0.999)"},
      {"adam-eps", "Adam epsilon (default 1e-8)"},
      {"seed", "random seed (default 1)"},
      {"augment", "training augmentation on/off (default true; --no-augment disables)"},
      {"scale-lo", "augmentation scale lower bound (default 0.8)"},
      {"scale-hi", "augmentation scale upper bound (default 1.25)"},
      {"rotation-std", "rotation angle std in radians (default 0.06)"},
      {"rotation-clip", "rotation angle clip in radians (default 0.18)"},
      {"shift", "per-dimension shift range (default 0.1)"},
      {"jitter-std", "per-coordinate jitter std (default 0.01)"},
      {"jitter-clip", "per-coordinate jitter clip (default 0.05)"},
      {"dropout", "dropout rate before the last dense layer (default 0.3)"},
      {"bn-momentum", "batch-norm running-stat momentum (default 0.9)"},
      {"bn-eps", "batch-norm epsilon (default 1e-5)"},
      {"snapshot-epochs", "epochs at which to write constellation snapshots (default 0,10,100,200,300,500)"},
      {"precision", "f32 | f64 (default f32)"},
  };
  return keys;
}

void apply_config_value(TrainConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  auto count = [&] { return static_cast<std::size_t>(parse_u64(key, value)); };
  auto real = [&] { return parse_real(key, value); };
  if (key == "measure") c.measure = parse_measure(value);
  else if (key == "stars") c.stars = count();
  else if (key == "sigma") c.sigma = real();
  else if (key == "lambda") c.lambda = real();
  else if (key == "hidden1") c.hidden1 = count();
  else if (key == "hidden2") c.hidden2 = count();
  else if (key == "lr") c.learning_rate = real();
  else if (key == "batch") c.batch_size = count();
  else if (key == "epochs") c.epochs = count();
  else if (key == "optimizer") {
    if (value == "adam") c.optimizer = OptimizerKind::adam;
    else if (value == "sgd") c.optimizer = OptimizerKind::sgd;
    else bad_value(key, value, "adam|sgd");
  } else if (key == "beta1") c.beta1 = real();
  else if (key == "beta2") c.beta2 = real();
  else if (key == "adam-eps") c.adam_epsilon = real();
  else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "augment") c.augmentation.enabled = parse_bool(key, value);
  else if (key == "scale-lo") c.augmentation.scale_lo = real();
  else if (key == "scale-hi") c.augmentation.scale_hi = real();
  else if (key == "rotation-std") c.augmentation.rotation_std = real();
  else if (key == "rotation-clip") c.augmentation.rotation_clip = real();
  else if (key == "shift") c.augmentation.shift_range = real();
  else if (key == "jitter-std") c.augmentation.jitter_std = real();
  else if (key == "jitter-clip") c.augmentation.jitter_clip = real();
  else if (key == "dropout") c.dropout_rate = real();
  else if (key == "bn-momentum") c.bn_momentum = real();
  else if (key == "bn-eps") c.bn_epsilon = real();
  else if (key == "snapshot-epochs") c.snapshot_epochs = value.empty() ? std::vector<std::size_t>{} : parse_count_list(value, key);
  else if (key == "precision") {
    if (value == "f32") c.precision = Precision::f32;
    else if (value == "f64") c.precision = Precision::f64;
    else bad_value(key, value, "f32|f64");
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

std::string config_value(const TrainConfig& c, std::string_view key) {
  if (key == "measure") return std::string(to_string(c.measure));
  if (key == "stars") return std::to_string(c.stars);
  if (key == "sigma") return format_real(c.sigma);
  if (key == "lambda") return format_real(c.lambda);
  if (key == "hidden1") return std::to_string(c.hidden1);
  if (key == "hidden2") return std::to_string(c.hidden2);
  if (key == "lr") return format_real(c.learning_rate);
  if (key == "batch") return std::to_string(c.batch_size);
  if (key == "epochs") return std::to_string(c.epochs);
  if (key == "optimizer") return std::string(to_string(c.optimizer));
  if (key == "beta1") return format_real(c.beta1);
  if (key == "beta2") return format_real(c.beta2);
  if (key == "adam-eps") return format_real(c.adam_epsilon);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "augment") return c.augmentation.enabled ? "true" : "false";
  if (key == "scale-lo") return format_real(c.augmentation.scale_lo);
  if (key == "scale-hi") return format_real(c.augmentation.scale_hi);
  if (key == "rotation-std") return format_real(c.augmentation.rotation_std);
  if (key == "rotation-clip") return format_real(c.augmentation.rotation_clip);
  if (key == "shift") return format_real(c.augmentation.shift_range);
  if (key == "jitter-std") return format_real(c.augmentation.jitter_std);
  if (key == "jitter-clip") return format_real(c.augmentation.jitter_clip);
  if (key == "dropout") return format_real(c.dropout_rate);
  if (key == "bn-momentum") return format_real(c.bn_momentum);
  if (key == "bn-eps") return format_real(c.bn_epsilon);
  if (key == "snapshot-epochs") return join_counts(c.snapshot_epochs);
  if (key == "precision") return std::string(to_string(c.precision));
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

TrainConfig parse_config_text(std::string_view text, TrainConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    try {
      apply_config_value(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_config_text(const TrainConfig& config) {
  std::string out;
  for (const auto& key : config_keys()) {
    out += key.name;
    out += '=';
    out += config_value(config, key.name);
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> parse_count_list(std::string_view text, std::string_view what) {
  std::vector<std::size_t> out;
  std::string_view rest = trim(text);
  if (rest.empty()) throw ConfigError(std::string(what) + ": empty list");
  while (true) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    const auto v = static_cast<std::size_t>(parse_u64(what, item));
    if (std::find(out.begin(), out.end(), v) != out.end())
      throw ConfigError(std::string(what) + ": duplicate value " + std::to_string(v));
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

}  // namespace ursa
