/*
 * Copyright 2026 The FundusNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fnet/errors.hpp"

namespace fnet {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "config key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "config key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  if (out.empty()) throw ConfigError(key, "config key '" + key + "' expects a comma-separated list");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct KeySpec {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define FNET_PATH_KEY(name, field)                                           \
  KeySpec {                                                                  \
    name, [](RunConfig& c, const std::string& v) { c.field = v; },           \
        [](const RunConfig& c) { return c.field.string(); }                  \
  }
#define FNET_UINT_KEY(name, field)                                                             \
  KeySpec {                                                                                    \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_uint(name, v); },           \
        [](const RunConfig& c) { return std::to_string(c.field); }                             \
  }
#define FNET_DOUBLE_KEY(name, field)                                                           \
  KeySpec {                                                                                    \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_double(name, v); },         \
        [](const RunConfig& c) { return format_double(c.field); }                              \
  }
#define FNET_BOOL_KEY(name, field)                                                             \
  KeySpec {                                                                                    \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_bool(name, v); },           \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }             \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs{
      FNET_PATH_KEY("csv", csv),
      FNET_PATH_KEY("image_dir", image_dir),
      FNET_PATH_KEY("manifest", manifest),
      FNET_PATH_KEY("checkpoint", checkpoint),
      FNET_PATH_KEY("out_dir", out_dir),
      FNET_UINT_KEY("seed", seed),
      FNET_DOUBLE_KEY("ratio", ratio),
      FNET_UINT_KEY("input_height", descriptor.input_height),
      FNET_UINT_KEY("input_width", descriptor.input_width),
      FNET_UINT_KEY("input_channels", descriptor.input_channels),
      KeySpec{"conv_filters",
              [](RunConfig& c, const std::string& v) { c.descriptor.conv_filters = parse_size_list("conv_filters", v); },
              [](const RunConfig& c) { return format_sizes(c.descriptor.conv_filters); }},
      FNET_UINT_KEY("dense_units", descriptor.dense_units),
      FNET_UINT_KEY("lstm_units", descriptor.lstm_units),
      FNET_UINT_KEY("lstm_layers", descriptor.lstm_layers),
      FNET_UINT_KEY("sequence_length", descriptor.sequence_length),
      FNET_DOUBLE_KEY("dropout_rate", descriptor.dropout_rate),
      FNET_DOUBLE_KEY("bn_epsilon", descriptor.bn_epsilon),
      FNET_DOUBLE_KEY("bn_momentum", descriptor.bn_momentum),
      FNET_UINT_KEY("epochs", train.epochs),
      FNET_UINT_KEY("batch_size", train.batch_size),
      FNET_DOUBLE_KEY("learning_rate", train.learning_rate),
      FNET_DOUBLE_KEY("beta1", train.beta1),
      FNET_DOUBLE_KEY("beta2", train.beta2),
      FNET_DOUBLE_KEY("epsilon", train.epsilon),
      FNET_UINT_KEY("checkpoint_every", train.checkpoint_every),
      FNET_BOOL_KEY("record_wall_time", train.record_wall_time),
      FNET_DOUBLE_KEY("threshold", threshold),
      FNET_BOOL_KEY("resume", resume),
  };
  return specs;
}

#undef FNET_PATH_KEY
#undef FNET_UINT_KEY
#undef FNET_DOUBLE_KEY
#undef FNET_BOOL_KEY

const KeySpec* find_key(const std::string& key) {
  for (const auto& spec : key_specs()) {
    if (key == spec.key) return &spec;
  }
  return nullptr;
}

void add_entry(ConfigEntries& out, std::set<std::string>& seen, std::string key, std::string value) {
  if (key.empty()) throw ConfigError("", "empty config key");
  if (!seen.insert(key).second) throw ConfigError(key, "duplicate config key '" + key + "'");
  out.emplace_back(std::move(key), std::move(value));
}

ConfigEntries parse_json_config(std::string_view text) {
  nlohmann::json doc;
  // The parser keeps the last of repeated keys; reject them first.
  std::set<std::string> top_keys;
  const auto reject_duplicates = [&](int depth, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
    if (event == nlohmann::json::parse_event_t::key && depth == 1) {
      const auto key = parsed.get<std::string>();
      if (!top_keys.insert(key).second) throw ConfigError(key, "duplicate config key '" + key + "'");
    }
    return true;
  };
  try {
    doc = nlohmann::json::parse(text, reject_duplicates);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "JSON config must be an object");
  ConfigEntries out;
  std::set<std::string> seen;
  for (const auto& [key, value] : doc.items()) {
    std::string text_value;
    if (value.is_string()) {
      text_value = value.get<std::string>();
    } else if (value.is_boolean() || value.is_number()) {
      text_value = value.dump();
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number_unsigned()) throw ConfigError(key, "config key '" + key + "' expects integers");
        text_value += (i ? "," : "") + value[i].dump();
      }
    } else {
      throw ConfigError(key, "config key '" + key + "' must be a scalar or an integer list");
    }
    add_entry(out, seen, key, text_value);
  }
  return out;
}

}  // namespace

ImageGeometry RunConfig::geometry() const {
  return {descriptor.input_height, descriptor.input_width, descriptor.input_channels};
}

std::filesystem::path RunConfig::manifest_path() const {
  return manifest.empty() ? out_dir / "manifest.tsv" : manifest;
}

std::filesystem::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? out_dir / "checkpoint.fnet" : checkpoint;
}

std::filesystem::path RunConfig::log_path() const { return out_dir / "epochs.csv"; }

void RunConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("out_dir", "config key 'out_dir' must not be empty");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("ratio", "config key 'ratio' must lie in (0, 1)");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("threshold", "config key 'threshold' must lie in [0, 1]");
  }
  try {
    descriptor.validate();
  } catch (const Error& e) {
    throw ConfigError("descriptor", std::string("invalid architecture: ") + e.what());
  }
  try {
    train.validate();
  } catch (const Error& e) {
    throw ConfigError("train", std::string("invalid training settings: ") + e.what());
  }
}

ConfigEntries parse_config_text(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') return parse_json_config(text);

  ConfigEntries out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "config line " + std::to_string(line_no) + ": expected key = value");
    }
    add_entry(out, seen, trim(std::string_view(trimmed).substr(0, eq)), trim(std::string_view(trimmed).substr(eq + 1)));
  }
  return out;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) throw ConfigError(key, "unknown config key '" + key + "'");
  spec->set(config, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& spec : key_specs()) keys.emplace_back(spec.key);
  return keys;
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& file, const ConfigEntries& overrides) {
  RunConfig config;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') config.out_dir = env;
  if (file) {
    for (const auto& [key, value] : read_config_file(*file)) apply_setting(config, key, value);
  }
  for (const auto& [key, value] : overrides) apply_setting(config, key, value);
  config.train.seed = config.seed;
  config.validate();
  return config;
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& spec : key_specs()) out += std::string(spec.key) + " = " + spec.get(config) + "\n";
  return out;
}

}  // namespace fnet
