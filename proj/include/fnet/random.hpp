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

#include <cstdint>
#include <random>
#include <string_view>

namespace fnet {

using Rng = std::mt19937_64;

// Sub-seed for a named consumer. Streams for different names are unrelated,
// so adding a consumer never shifts another consumer's draws.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) noexcept;

inline Rng make_rng(std::uint64_t seed, std::string_view name) {
  return Rng(derive_seed(seed, name));
}

}  // namespace fnet
