// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "aftunet/errors.hpp"

namespace aft::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* what) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  if (!value.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || value.empty()) {
    throw ConfigError(key + ": expected " + what + ", got '" + value + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) { return parse_number<int>(key, v, "an integer"); }
double parse_double(const std::string& key, const std::string& v) {
  return parse_number<double>(key, v, "a number");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define AFT_INT(expr)                                                                         \
  Field {                                                                                     \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = parse_int(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.expr); }                             \
  }
#define AFT_DOUBLE(expr)                                                                         \
  Field {                                                                                        \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = parse_double(k, v); }, \
        [](const RunConfig& c) { return fmt(static_cast<double>(c.expr)); }                      \
  }
#define AFT_BOOL(expr)                                                                         \
  Field {                                                                                      \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.expr = parse_bool(k, v); }, \
        [](const RunConfig& c) { return fmt(c.expr); }                                         \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data", {[](RunConfig& c, const std::string&, const std::string& v) { c.data = v; },
                [](const RunConfig& c) { return c.data; }}},
      {"out", {[](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
               [](const RunConfig& c) { return c.out; }}},
      {"epochs", AFT_INT(train.epochs)},
      {"phase1_epochs", AFT_INT(train.phase1_epochs)},
      {"lr_phase1", AFT_DOUBLE(train.lr_phase1)},
      {"lr_phase2", AFT_DOUBLE(train.lr_phase2)},
      {"beta1", AFT_DOUBLE(train.beta1)},
      {"beta2", AFT_DOUBLE(train.beta2)},
      {"eps", AFT_DOUBLE(train.eps)},
      {"weight_decay", AFT_DOUBLE(train.weight_decay)},
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.seed = parse_number<std::uint64_t>(k, v, "a non-negative integer");
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"elastic", AFT_BOOL(train.elastic)},
      {"elastic_amplitude", AFT_DOUBLE(train.elastic_amplitude)},
      {"elastic_sigma", AFT_DOUBLE(train.elastic_sigma)},
      {"blocks", AFT_INT(blocks)},
      {"channels",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.model.codec.channels.clear();
          for (const auto& item : split_list(v)) c.model.codec.channels.push_back(parse_int(k, item));
        },
        [](const RunConfig& c) { return join(c.model.codec.channels); }}},
      {"classes", AFT_INT(model.codec.classes)},
      {"kernel", AFT_INT(model.codec.kernel)},
      {"in_channels", AFT_INT(model.codec.in_channels)},
      {"layers", AFT_INT(model.layers)},
      {"heads", AFT_INT(model.heads)},
      {"n_a", AFT_INT(model.neighbors)},
      {"n_f", AFT_INT(model.frequency)},
      {"height", AFT_INT(model.height)},
      {"width", AFT_INT(model.width)},
      {"shared_merge_fc", AFT_BOOL(model.shared_merge_fc)},
      {"window_lo", AFT_DOUBLE(window_lo)},
      {"window_hi", AFT_DOUBLE(window_hi)},
      {"checkpoint_every", AFT_INT(checkpoint_every)},
      {"probe_slices", AFT_INT(probe_slices)},
      {"class_names",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.class_names = v.empty() ? std::vector<std::string>{} : split_list(v);
        },
        [](const RunConfig& c) { return join(c.class_names); }}},
  };
  return table;
}

#undef AFT_INT
#undef AFT_DOUBLE
#undef AFT_BOOL

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig::RunConfig() {
  model.height = 0;
  model.width = 0;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m = model;
  m.codec.blocks = blocks > 0 ? blocks : static_cast<int>(m.codec.channels.size());
  return m;
}

void RunConfig::validate() const {
  train.validate();
  if (blocks < 0) throw ConfigError("blocks must be >= 0 (0 derives it from channels)");
  if (model.height < 0 || model.width < 0) {
    throw ConfigError("height/width must be >= 0 (0 derives them from the data)");
  }
  ModelConfig m = model_config();
  const int f = m.codec.blocks > 0 ? 1 << (m.codec.blocks - 1) : 1;
  if (m.height == 0) m.height = f;
  if (m.width == 0) m.width = f;
  m.validate();
  if (!(window_hi > window_lo)) throw ConfigError("window_hi must be > window_lo");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (probe_slices < 0) throw ConfigError("probe_slices must be >= 0");
  if (!class_names.empty() && static_cast<int>(class_names.size()) != m.codec.classes - 1) {
    throw ConfigError("class_names must name the " + std::to_string(m.codec.classes - 1) +
                      " foreground classes, got " + std::to_string(class_names.size()));
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_field(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, key, value);
}

std::string get_field(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  set_field(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key=value");
    }
    try {
      set_field(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << is.rdbuf();
  apply_config_text(cfg, text.str(), path.string());
}

std::string format_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, f] : fields()) os << key << "=" << f.get(cfg) << "\n";
  return os.str();
}

}  // namespace aft::cli
