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

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fnet/image.hpp"
#include "fnet/model.hpp"
#include "fnet/train.hpp"

namespace fnet {

// Environment variable naming the default run directory.
inline constexpr const char* kOutDirEnv = "FNET_OUT_DIR";
inline constexpr const char* kDefaultOutDir = "fnet-run";

// Everything a command needs, resolved from defaults, a config file and
// command-line overrides (in that order of precedence, lowest first).
struct RunConfig {
  std::filesystem::path csv;
  std::filesystem::path image_dir;
  std::filesystem::path manifest;    // default: <out_dir>/manifest.tsv
  std::filesystem::path checkpoint;  // default: <out_dir>/checkpoint.fnet
  std::filesystem::path out_dir = kDefaultOutDir;
  std::uint64_t seed = 0;
  double ratio = 0.7;
  ArchitectureDescriptor descriptor;
  TrainConfig train;
  double threshold = 0.5;
  bool resume = false;

  ImageGeometry geometry() const;
  std::filesystem::path manifest_path() const;
  std::filesystem::path checkpoint_path() const;
  std::filesystem::path log_path() const;

  // Descriptor and training invariants; throws ConfigError naming the key.
  void validate() const;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

// Flat `key = value` lines (# comments) or a flat JSON object. Throws
// ConfigError on malformed input or duplicate keys.
ConfigEntries parse_config_text(std::string_view text);
ConfigEntries read_config_file(const std::filesystem::path& path);

// Throws ConfigError for an unknown key or a value that does not parse.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

// Defaults (out_dir from FNET_OUT_DIR when set), then the file, then the
// overrides; validated.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file, const ConfigEntries& overrides);

// Canonical key=value text that parse_config_text reads back to the same config.
std::string to_config_text(const RunConfig& config);

}  // namespace fnet
