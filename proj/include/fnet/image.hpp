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

#include <cstddef>
#include <filesystem>
#include <string>

#include "fnet/tensor.hpp"

namespace fnet {

// Target image geometry, e.g. 224x224x3.
struct ImageGeometry {
  std::size_t height = 224;
  std::size_t width = 224;
  std::size_t channels = 3;

  std::string to_string() const;
  // Parses "HxWxC"; throws ParseError.
  static ImageGeometry parse(const std::string& text);

  friend bool operator==(const ImageGeometry&, const ImageGeometry&) = default;
};

// Decodes PNG or JPEG into an RGB [H, W, 3] tensor scaled to [0, 1].
// Throws IoError if the file is missing or undecodable.
Tensor decode_image(const std::filesystem::path& path);

// Writes a [H, W, 1] or [H, W, 3] tensor in [0, 1] as an 8-bit image; the
// format follows the extension.
void write_image(const std::filesystem::path& path, const Tensor& image);

// Bilinear resampling with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

// Rotation about the image center by `degrees` (positive is counter-clockwise
// as displayed). Each output pixel is inverse-mapped into the source and
// sampled bilinearly; pixels outside the frame count as black.
Tensor rotate_bilinear(const Tensor& image, double degrees);

// 3 -> 1 averages the channels; 1 -> 3 replicates.
Tensor convert_channels(const Tensor& image, std::size_t channels);

// Resize + channel conversion to the target geometry.
Tensor prepare_image(const Tensor& decoded, const ImageGeometry& geometry);

}  // namespace fnet
