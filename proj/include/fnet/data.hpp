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

// ODIR ingestion for the binary cataract/normal task: label parsing,
// per-eye class selection, balancing, rotation augmentation, group-aware
// splitting and the manifest file that records the result.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fnet/image.hpp"
#include "fnet/label.hpp"
#include "fnet/tensor.hpp"

namespace fnet {

// Column order of the one-hot diagnosis flags.
inline constexpr std::array<std::string_view, 8> kDiseaseFlags{"N", "D", "G", "C", "A", "H", "M", "O"};

struct LabelRecord {
  std::string patient_id;
  std::string left_fundus;
  std::string right_fundus;
  std::string left_keywords;
  std::string right_keywords;
  std::array<bool, 8> flags{};
};

struct RowIssue {
  std::size_t line;
  std::string message;
};

struct LabelTable {
  std::vector<LabelRecord> records;
  std::vector<RowIssue> skipped;
};

// Throws SchemaError naming the first missing column; malformed rows are
// skipped and reported with their line number.
LabelTable parse_labels(const std::filesystem::path& csv_path);
LabelTable parse_label_text(std::string_view csv_text);

// Per-eye class from a diagnostic keyword string: "cataract" anywhere
// (case-insensitive) wins, then "normal fundus"; anything else is excluded.
std::optional<Label> classify_eye(std::string_view keywords);

enum class Augmentation { original, rotate_pos30, rotate_neg30 };

std::string_view to_string(Augmentation a) noexcept;
std::optional<Augmentation> parse_augmentation(std::string_view tag) noexcept;
double rotation_degrees(Augmentation a) noexcept;

// Identifies one (possibly augmented) sample without holding its pixels.
struct SampleKey {
  std::string source;  // image filename relative to the image directory
  Augmentation augmentation = Augmentation::original;
  Label label = Label::normal;

  friend bool operator==(const SampleKey&, const SampleKey&) = default;
  friend auto operator<=>(const SampleKey& a, const SampleKey& b) {
    if (auto c = a.source <=> b.source; c != 0) return c;
    return a.augmentation <=> b.augmentation;
  }
};

struct LabeledSample {
  Tensor image;  // [H, W, C] in [0, 1]
  Label label = Label::normal;
  std::string source;
  Augmentation augmentation = Augmentation::original;

  SampleKey key() const { return {source, augmentation, label}; }
};

struct CorpusSelection {
  std::vector<SampleKey> samples;     // balanced, unaugmented, sorted by source
  std::vector<std::string> skipped;   // eyes whose image file is missing
  std::size_t cataract_available = 0;
  std::size_t normal_available = 0;
};

// Keeps every eye of the smaller class and a seeded uniform subset of equal
// size from the larger. Throws CorpusError if a class is empty.
CorpusSelection select_binary_corpus(std::span<const LabelRecord> records,
                                     const std::filesystem::path& image_dir, std::uint64_t seed);

struct Corpus {
  std::vector<LabeledSample> samples;
  std::vector<std::string> skipped;
};

// select_binary_corpus followed by decode + resize to the geometry.
Corpus build_binary_corpus(std::span<const LabelRecord> records, const std::filesystem::path& image_dir,
                           const ImageGeometry& geometry, std::uint64_t seed);

// Decode, resize, and apply the key's rotation.
Tensor load_sample_image(const std::filesystem::path& image_dir, const SampleKey& key,
                         const ImageGeometry& geometry);

// original, +30 and -30 degree copies of every input, sorted by source then tag.
std::vector<LabeledSample> augment(std::span<const LabeledSample> samples);
std::vector<SampleKey> augment(std::span<const SampleKey> keys);

enum class Partition { train, test };

std::string_view to_string(Partition p) noexcept;

struct ManifestEntry {
  SampleKey key;
  Partition partition = Partition::train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetSplit {
  std::vector<ManifestEntry> entries;  // sorted by source then augmentation
  std::uint64_t seed = 0;
  double ratio = 0.7;

  std::vector<SampleKey> partition(Partition p) const;
  // CRC-32 over the sorted entry lines.
  std::uint32_t checksum() const;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Stratified, group-aware split: per label, floor(ratio * source images) go
// to train and every augmented copy follows its source image.
DatasetSplit split(std::span<const SampleKey> samples, double ratio, std::uint64_t seed);
DatasetSplit split(std::span<const LabeledSample> samples, double ratio, std::uint64_t seed);

struct Manifest {
  DatasetSplit split;
  std::filesystem::path image_dir;
  ImageGeometry geometry;
};

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
// Throws ParseError (with line number) or IntegrityError on checksum mismatch.
Manifest read_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sample sources feed the training loop one image at a time.

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual Label label(std::size_t i) const = 0;
  virtual Tensor image(std::size_t i) const = 0;
};

class InMemorySource final : public SampleSource {
 public:
  explicit InMemorySource(std::vector<LabeledSample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  Label label(std::size_t i) const override { return samples_.at(i).label; }
  Tensor image(std::size_t i) const override { return samples_.at(i).image; }
  const std::vector<LabeledSample>& samples() const noexcept { return samples_; }

 private:
  std::vector<LabeledSample> samples_;
};

// Decodes from disk on demand.
class ManifestSource final : public SampleSource {
 public:
  ManifestSource(std::vector<SampleKey> keys, std::filesystem::path image_dir, ImageGeometry geometry)
      : keys_(std::move(keys)), image_dir_(std::move(image_dir)), geometry_(geometry) {}
  std::size_t size() const override { return keys_.size(); }
  Label label(std::size_t i) const override { return keys_.at(i).label; }
  Tensor image(std::size_t i) const override { return load_sample_image(image_dir_, keys_.at(i), geometry_); }

 private:
  std::vector<SampleKey> keys_;
  std::filesystem::path image_dir_;
  ImageGeometry geometry_;
};

// Preprocessed-tensor cache using the checkpoint tensor encoding (magic "FNTC").
void write_sample_cache(const std::filesystem::path& path, const SampleSource& source,
                        std::span<const SampleKey> keys);
// Returns samples in file order; keys not present in the cache are absent.
std::vector<LabeledSample> read_sample_cache(const std::filesystem::path& path);

}  // namespace fnet
