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

#include "fnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "fnet/errors.hpp"
#include "fnet/random.hpp"

namespace fnet {

namespace {

enum class EyeKind { cataract, normal, other };

// A fundus-like disc on black. Cataract eyes are washed out and bright.
Tensor fundus_image(std::size_t size, std::size_t channels, EyeKind kind, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.03);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  const double c = (static_cast<double>(size) - 1.0) / 2.0 + jitter(rng) * static_cast<double>(size);
  const double radius = 0.42 * static_cast<double>(size);
  double rgb[3];
  switch (kind) {
    case EyeKind::cataract:
      rgb[0] = 0.90, rgb[1] = 0.80, rgb[2] = 0.70;
      break;
    case EyeKind::normal:
      rgb[0] = 0.45, rgb[1] = 0.15, rgb[2] = 0.05;
      break;
    default:
      rgb[0] = 0.55, rgb[1] = 0.25, rgb[2] = 0.10;
  }
  Tensor img(Shape{size, size, channels});
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double r = std::hypot(static_cast<double>(i) - c, static_cast<double>(j) - c);
      const bool inside = r <= radius;
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double base = channels == 1 ? (rgb[0] + rgb[1] + rgb[2]) / 3.0 : rgb[ch];
        const double v = inside ? base + noise(rng) : 0.02 + 0.5 * std::abs(noise(rng));
        img[(i * size + j) * channels + ch] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

const char* keywords(EyeKind kind) {
  switch (kind) {
    case EyeKind::cataract:
      return "cataract";
    case EyeKind::normal:
      return "normal fundus";
    default:
      return "moderate non proliferative retinopathy";
  }
}

}  // namespace

std::vector<LabeledSample> make_separable_set(std::size_t per_class, const ImageGeometry& geometry,
                                              std::uint64_t seed) {
  Rng rng = make_rng(seed, "synthetic.separable");
  std::normal_distribution<double> noise(0.0, 0.05);
  const double h = static_cast<double>(geometry.height), w = static_cast<double>(geometry.width);
  const double radius = 0.3 * std::min(h, w);
  std::vector<LabeledSample> out;
  for (std::size_t k = 0; k < 2 * per_class; ++k) {
    const bool bright = k % 2 == 0;
    Tensor img(Shape{geometry.height, geometry.width, geometry.channels});
    for (std::size_t i = 0; i < geometry.height; ++i) {
      for (std::size_t j = 0; j < geometry.width; ++j) {
        const bool disc = std::hypot(static_cast<double>(i) - (h - 1) / 2, static_cast<double>(j) - (w - 1) / 2) <= radius;
        for (std::size_t ch = 0; ch < geometry.channels; ++ch) {
          const double base = bright && disc ? 0.85 : 0.15;
          img[(i * geometry.width + j) * geometry.channels + ch] = std::clamp(base + noise(rng), 0.0, 1.0);
        }
      }
    }
    out.push_back({std::move(img), bright ? Label::cataract : Label::normal,
                   "separable_" + std::to_string(k) + ".png", Augmentation::original});
  }
  return out;
}

SyntheticOdir write_synthetic_odir(const std::filesystem::path& dir, const SyntheticOdirOptions& o) {
  std::filesystem::create_directories(dir / "images");
  SyntheticOdir out{dir / "labels.csv", dir / "images"};
  std::vector<EyeKind> eyes;
  eyes.insert(eyes.end(), o.cataract_eyes, EyeKind::cataract);
  eyes.insert(eyes.end(), o.normal_eyes, EyeKind::normal);
  eyes.insert(eyes.end(), o.other_eyes, EyeKind::other);
  if (eyes.size() % 2 == 1) eyes.push_back(EyeKind::other);
  Rng rng = make_rng(o.seed, "synthetic.odir");
  std::shuffle(eyes.begin(), eyes.end(), rng);

  std::ofstream csv(out.csv, std::ios::trunc);
  if (!csv) throw IoError("cannot write " + out.csv.string());
  csv << "ID,Patient Age,Patient Sex,Left-Fundus,Right-Fundus,Left-Diagnostic Keywords,"
         "Right-Diagnostic Keywords,N,D,G,C,A,H,M,O\n";
  for (std::size_t p = 0; p < eyes.size() / 2; ++p) {
    const EyeKind left = eyes[2 * p], right = eyes[2 * p + 1];
    const std::string id = std::to_string(p);
    const std::string lf = id + "_left.png", rf = id + "_right.png";
    write_image(out.image_dir / lf, fundus_image(o.image_size, 3, left, rng));
    write_image(out.image_dir / rf, fundus_image(o.image_size, 3, right, rng));
    const bool n = left == EyeKind::normal && right == EyeKind::normal;
    const bool d = left == EyeKind::other || right == EyeKind::other;
    const bool c = left == EyeKind::cataract || right == EyeKind::cataract;
    csv << id << ',' << 50 + p % 30 << ',' << (p % 2 ? "Male" : "Female") << ',' << lf << ',' << rf << ",\""
        << keywords(left) << "\",\"" << keywords(right) << "\"," << n << ',' << d << ",0," << c
        << ",0,0,0," << (!n && !d && !c) << '\n';
  }
  return out;
}

}  // namespace fnet
