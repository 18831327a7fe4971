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
#include <filesystem>
#include <vector>

#include "fnet/data.hpp"

namespace fnet {

// Linearly separable toy images: cataract samples carry a bright central
// disc, normal samples are dark. Half of each set per class, interleaved.
std::vector<LabeledSample> make_separable_set(std::size_t per_class, const ImageGeometry& geometry,
                                              std::uint64_t seed);

struct SyntheticOdirOptions {
  std::size_t cataract_eyes = 10;
  std::size_t normal_eyes = 20;
  std::size_t other_eyes = 4;  // eyes with a diagnosis outside the binary task
  std::size_t image_size = 32;
  std::uint64_t seed = 0;
};

struct SyntheticOdir {
  std::filesystem::path csv;
  std::filesystem::path image_dir;
};

// Writes an ODIR-format label CSV and matching PNG fundus stand-ins under dir.
SyntheticOdir write_synthetic_odir(const std::filesystem::path& dir, const SyntheticOdirOptions& options);

}  // namespace fnet
