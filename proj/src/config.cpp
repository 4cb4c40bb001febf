#include "dsdh/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "dsdh/error.hpp"

namespace dsdh {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("config key '" + key + "': invalid value \"" + value + "\" (expected " +
                    expected + ")");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const std::size_t w = to_count(key, trim(part));
    if (w == 0) bad_value(key, v, "positive layer widths");
    out.push_back(w);
  }
  if (out.empty()) bad_value(key, v, "a comma-separated list of widths");
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"features", [&](auto&, auto& v) { cfg.features = resolve(base_dir, v); }},
      {"labels", [&](auto&, auto& v) { cfg.labels = resolve(base_dir, v); }},
      {"format",
       [&](auto& k, auto& v) {
         try {
           cfg.format = parse_data_format(v);
         } catch (const ConfigError&) {
           bad_value(k, v, "csv or binary");
         }
       }},
      {"model", [&](auto&, auto& v) { cfg.model = resolve(base_dir, v); }},
      {"log", [&](auto&, auto& v) { cfg.log = resolve(base_dir, v); }},
      {"mu", [&](auto& k, auto& v) { cfg.hp.mu = to_double(k, v); }},
      {"nu", [&](auto& k, auto& v) { cfg.hp.nu = to_double(k, v); }},
      {"eta", [&](auto& k, auto& v) { cfg.hp.eta = to_double(k, v); }},
      {"bits", [&](auto& k, auto& v) { cfg.hp.bits = to_count(k, v); }},
      {"hidden", [&](auto& k, auto& v) { cfg.encoder.hidden = to_widths(k, v); }},
      {"activation",
       [&](auto& k, auto& v) {
         try {
           cfg.encoder.activation = parse_activation(v);
         } catch (const ConfigError&) {
           bad_value(k, v, "relu or tanh");
         }
       }},
      {"standardize", [&](auto& k, auto& v) { cfg.encoder.standardize = to_bool(k, v); }},
      {"epochs", [&](auto& k, auto& v) { cfg.schedule.epochs = to_count(k, v); }},
      {"steps_per_epoch", [&](auto& k, auto& v) { cfg.schedule.steps_per_epoch = to_count(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { cfg.schedule.batch_size = to_count(k, v); }},
      {"learning_rate", [&](auto& k, auto& v) { cfg.schedule.learning_rate = to_double(k, v); }},
      {"lr_decay", [&](auto& k, auto& v) { cfg.schedule.lr_decay = to_double(k, v); }},
      {"dcc_max_sweeps", [&](auto& k, auto& v) { cfg.schedule.dcc_max_sweeps = to_count(k, v); }},
      {"variant",
       [&](auto& k, auto& v) {
         try {
           cfg.variant = parse_variant(v);
         } catch (const ConfigError&) {
           bad_value(k, v, "full, A, B or C");
         }
       }},
      {"seed", [&](auto& k, auto& v) { cfg.seed = to_u64(k, v); }},
  };

  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string t = trim(std::string_view(line).substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(line_no) + ")");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("duplicate config key '" + key + "' (line " + std::to_string(line_no) +
                        ")");
    }
    it->second(key, value);
  }

  if (cfg.features.empty()) throw ConfigError("missing required config key 'features'");
  if (cfg.format == DataFormat::kCsv && cfg.labels.empty()) {
    throw ConfigError("missing required config key 'labels'");
  }
  if (cfg.model.empty()) throw ConfigError("missing required config key 'model'");
  if (cfg.log.empty()) cfg.log = std::filesystem::path(cfg.model.string() + ".log");
  if (cfg.format == DataFormat::kBinary) cfg.labels.clear();
  cfg.hp.validate();
  cfg.schedule.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace dsdh
