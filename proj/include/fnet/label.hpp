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

#include <optional>
#include <string_view>

namespace fnet {

// Cataract is the positive class throughout.
enum class Label { normal = 0, cataract = 1 };

constexpr std::string_view to_string(Label label) noexcept {
  return label == Label::cataract ? "cataract" : "normal";
}

constexpr std::optional<Label> parse_label(std::string_view token) noexcept {
  if (token == "cataract" || token == "1") return Label::cataract;
  if (token == "normal" || token == "0") return Label::normal;
  return std::nullopt;
}

constexpr double label_value(Label label) noexcept { return label == Label::cataract ? 1.0 : 0.0; }

}  // namespace fnet
