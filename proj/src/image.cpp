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

#include "fnet/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fnet/errors.hpp"

namespace fnet {

namespace {

struct Hwc {
  std::size_t h, w, c;
};

Hwc image_dims(const Tensor& image, const char* op) {
  if (image.shape().rank() != 3) {
    throw ShapeError(std::string(op) + ": expected [H,W,C] image, got " + image.shape().to_string());
  }
  return {image.shape()[0], image.shape()[1], image.shape()[2]};
}

}  // namespace

std::string ImageGeometry::to_string() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

ImageGeometry ImageGeometry::parse(const std::string& text) {
  ImageGeometry g;
  char x1 = 0, x2 = 0;
  std::istringstream in(text);
  if (!(in >> g.height >> x1 >> g.width >> x2 >> g.channels) || x1 != 'x' || x2 != 'x' ||
      !(in >> std::ws).eof() || g.height == 0 || g.width == 0 || (g.channels != 1 && g.channels != 3)) {
    throw ParseError("invalid image geometry '" + text + "', expected HxWxC with C in {1,3}");
  }
  return g;
}

Tensor decode_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("image not found: " + path.string());
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty() || bgr.depth() != CV_8U) throw IoError("cannot decode image: " + path.string());
  const std::size_t h = static_cast<std::size_t>(bgr.rows), w = static_cast<std::size_t>(bgr.cols);
  Tensor out(Shape{h, w, 3});
  for (std::size_t i = 0; i < h; ++i) {
    const auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(i));
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        out[(i * w + j) * 3 + ch] = row[j][2 - ch] / 255.0;
      }
    }
  }
  return out;
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  const auto [h, w, c] = image_dims(image, "write_image");
  if (c != 1 && c != 3) throw ShapeError("write_image: expected 1 or 3 channels");
  cv::Mat mat(static_cast<int>(h), static_cast<int>(w), c == 1 ? CV_8UC1 : CV_8UC3);
  for (std::size_t i = 0; i < h; ++i) {
    auto* row = mat.ptr<std::uint8_t>(static_cast<int>(i));
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(image[(i * w + j) * c + ch], 0.0, 1.0);
        // OpenCV stores colour images as BGR.
        row[j * c + (c == 3 ? 2 - ch : 0)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  if (!cv::imwrite(path.string(), mat)) throw IoError("cannot write image: " + path.string());
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  const auto [h, w, c] = image_dims(image, "resize_bilinear");
  if (height == 0 || width == 0) throw ShapeError("resize_bilinear: target extents must be >= 1");
  if (h == height && w == width) return image;
  Tensor out(Shape{height, width, c});
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  for (std::size_t i = 0; i < height; ++i) {
    const double fy = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t j = 0; j < width; ++j) {
      const double fx = std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = image[(y0 * w + x0) * c + ch] * (1 - tx) + image[(y0 * w + x1) * c + ch] * tx;
        const double bottom = image[(y1 * w + x0) * c + ch] * (1 - tx) + image[(y1 * w + x1) * c + ch] * tx;
        out[(i * width + j) * c + ch] = top * (1 - ty) + bottom * ty;
      }
    }
  }
  return out;
}

Tensor rotate_bilinear(const Tensor& image, double degrees) {
  const auto [h, w, c] = image_dims(image, "rotate_bilinear");
  if (degrees == 0.0) return image;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  auto pixel = [&](long y, long x, std::size_t ch) {
    return (y < 0 || y >= H || x < 0 || x >= W) ? 0.0 : image[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * c + ch];
  };
  Tensor out(image.shape());
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double dx = static_cast<double>(j) - cx;
      const double dy = static_cast<double>(i) - cy;
      // Inverse map: rows grow downwards, so a counter-clockwise turn on
      // screen pulls from (cx + cos*dx - sin*dy, cy + sin*dx + cos*dy).
      const double xs = cx + cos_t * dx - sin_t * dy;
      const double ys = cy + sin_t * dx + cos_t * dy;
      const double fx0 = std::floor(xs), fy0 = std::floor(ys);
      const double tx = xs - fx0, ty = ys - fy0;
      const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = (pixel(y0, x0, ch) * (1 - tx) + pixel(y0, x0 + 1, ch) * tx) * (1 - ty) +
                         (pixel(y0 + 1, x0, ch) * (1 - tx) + pixel(y0 + 1, x0 + 1, ch) * tx) * ty;
        out[(i * w + j) * c + ch] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

Tensor convert_channels(const Tensor& image, std::size_t channels) {
  const auto [h, w, c] = image_dims(image, "convert_channels");
  if (c == channels) return image;
  Tensor out(Shape{h, w, channels});
  if (c == 3 && channels == 1) {
    for (std::size_t p = 0; p < h * w; ++p) {
      out[p] = (image[p * 3] + image[p * 3 + 1] + image[p * 3 + 2]) / 3.0;
    }
  } else if (c == 1 && channels == 3) {
    for (std::size_t p = 0; p < h * w; ++p) {
      for (std::size_t ch = 0; ch < 3; ++ch) out[p * 3 + ch] = image[p];
    }
  } else {
    throw ShapeError("convert_channels: unsupported conversion " + std::to_string(c) + " -> " +
                     std::to_string(channels));
  }
  return out;
}

Tensor prepare_image(const Tensor& decoded, const ImageGeometry& geometry) {
  return convert_channels(resize_bilinear(decoded, geometry.height, geometry.width), geometry.channels);
}

}  // namespace fnet
