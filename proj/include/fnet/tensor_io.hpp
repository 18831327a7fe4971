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

// Binary container shared by model checkpoints and preprocessed-tensor caches:
//
//   magic[4] | u32 version | u32 header_len | header (canonical JSON text)
//   | u32 tensor_count | tensor* | u32 crc32 of all preceding bytes
//
// Each tensor is u32 name_len | name | u32 rank | u32 dims[rank] |
// f32 values (little-endian). All integers are little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fnet/tensor.hpp"

namespace fnet {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct TensorArchive {
  std::string magic;  // exactly four bytes
  std::uint32_t version = 1;
  std::string header;
  std::vector<NamedTensor> tensors;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;
std::uint32_t crc32(std::string_view text) noexcept;

std::vector<std::uint8_t> encode_archive(const TensorArchive& archive);

// Checks magic, then version (<= max_version), then the trailing CRC.
// Throws FormatError or IntegrityError.
TensorArchive decode_archive(std::span<const std::uint8_t> bytes, std::string_view magic,
                             std::uint32_t max_version);

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path, std::string_view magic,
                           std::uint32_t max_version);

// Rounds every element to the nearest float32, the on-disk precision.
void round_to_float(Tensor& t) noexcept;

}  // namespace fnet
