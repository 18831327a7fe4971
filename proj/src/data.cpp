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

#include "fnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fnet/errors.hpp"
#include "fnet/random.hpp"
#include "fnet/tensor_io.hpp"
#include "json.hpp"

namespace fnet {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// One CSV record; fields may be double-quoted with "" as an escaped quote.
// Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(std::move(field));
  return fields;
}

constexpr std::array<std::string_view, 5> kTextColumns{"ID", "Left-Fundus", "Right-Fundus",
                                                       "Left-Diagnostic Keywords",
                                                       "Right-Diagnostic Keywords"};

std::string entry_line(const ManifestEntry& e) {
  return e.key.source + '\t' + std::string(to_string(e.key.augmentation)) + '\t' +
         std::string(to_string(e.key.label)) + '\t' + std::string(to_string(e.partition));
}

// Shortest text that parses back to the same double.
std::string format_ratio(double ratio) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, ratio);
  return std::string(buf, end);
}

}  // namespace

// ---------------------------------------------------------------------------
// Labels

LabelTable parse_labels(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw IoError("cannot read label file: " + csv_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_label_text(buf.str());
}

LabelTable parse_label_text(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("label file is empty: header row missing");
  const auto header = split_csv_line(line);
  if (!header) throw SchemaError("header row has an unterminated quote");

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header->size(); ++i) column.emplace(lower(trim((*header)[i])), i);
  auto index_of = [&](std::string_view name) {
    const auto it = column.find(lower(name));
    if (it == column.end()) throw SchemaError("label file is missing column '" + std::string(name) + "'");
    return it->second;
  };
  std::array<std::size_t, 5> text_idx{};
  for (std::size_t k = 0; k < kTextColumns.size(); ++k) text_idx[k] = index_of(kTextColumns[k]);
  std::array<std::size_t, 8> flag_idx{};
  for (std::size_t k = 0; k < kDiseaseFlags.size(); ++k) flag_idx[k] = index_of(kDiseaseFlags[k]);
  const std::size_t needed = std::max(*std::max_element(text_idx.begin(), text_idx.end()),
                                      *std::max_element(flag_idx.begin(), flag_idx.end())) + 1;

  LabelTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (!fields) {
      table.skipped.push_back({line_no, "unterminated quoted field"});
      continue;
    }
    if (fields->size() < needed) {
      table.skipped.push_back({line_no, "expected at least " + std::to_string(needed) + " fields, got " +
                                            std::to_string(fields->size())});
      continue;
    }
    LabelRecord r;
    r.patient_id = trim((*fields)[text_idx[0]]);
    r.left_fundus = trim((*fields)[text_idx[1]]);
    r.right_fundus = trim((*fields)[text_idx[2]]);
    r.left_keywords = trim((*fields)[text_idx[3]]);
    r.right_keywords = trim((*fields)[text_idx[4]]);
    bool ok = true;
    for (std::size_t k = 0; k < flag_idx.size() && ok; ++k) {
      const std::string v = trim((*fields)[flag_idx[k]]);
      if (v == "1") {
        r.flags[k] = true;
      } else if (v != "0") {
        table.skipped.push_back({line_no, "flag " + std::string(kDiseaseFlags[k]) + " must be 0 or 1, got '" + v + "'"});
        ok = false;
      }
    }
    if (!ok) continue;
    if (std::none_of(r.flags.begin(), r.flags.end(), [](bool f) { return f; })) {
      table.skipped.push_back({line_no, "no diagnosis flag set"});
      continue;
    }
    if (r.left_fundus.empty() || r.right_fundus.empty()) {
      table.skipped.push_back({line_no, "empty fundus filename"});
      continue;
    }
    table.records.push_back(std::move(r));
  }
  return table;
}

std::optional<Label> classify_eye(std::string_view keywords) {
  const std::string k = lower(keywords);
  if (k.find("cataract") != std::string::npos) return Label::cataract;
  if (k.find("normal fundus") != std::string::npos) return Label::normal;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Corpus

std::string_view to_string(Augmentation a) noexcept {
  switch (a) {
    case Augmentation::rotate_pos30:
      return "rot+30";
    case Augmentation::rotate_neg30:
      return "rot-30";
    default:
      return "orig";
  }
}

std::optional<Augmentation> parse_augmentation(std::string_view tag) noexcept {
  if (tag == "orig") return Augmentation::original;
  if (tag == "rot+30") return Augmentation::rotate_pos30;
  if (tag == "rot-30") return Augmentation::rotate_neg30;
  return std::nullopt;
}

double rotation_degrees(Augmentation a) noexcept {
  switch (a) {
    case Augmentation::rotate_pos30:
      return 30.0;
    case Augmentation::rotate_neg30:
      return -30.0;
    default:
      return 0.0;
  }
}

CorpusSelection select_binary_corpus(std::span<const LabelRecord> records,
                                     const std::filesystem::path& image_dir, std::uint64_t seed) {
  CorpusSelection sel;
  std::vector<SampleKey> cataract, normal;
  std::set<std::string> seen;
  for (const auto& r : records) {
    for (const auto& [file, keywords] : {std::pair{&r.left_fundus, &r.left_keywords},
                                         std::pair{&r.right_fundus, &r.right_keywords}}) {
      const auto label = classify_eye(*keywords);
      if (!label || !seen.insert(*file).second) continue;
      if (!std::filesystem::is_regular_file(image_dir / *file)) {
        sel.skipped.push_back(*file);
        continue;
      }
      (*label == Label::cataract ? cataract : normal).push_back({*file, Augmentation::original, *label});
    }
  }
  sel.cataract_available = cataract.size();
  sel.normal_available = normal.size();
  if (cataract.empty() || normal.empty()) {
    throw CorpusError("cannot balance corpus: " + std::to_string(cataract.size()) + " cataract and " +
                      std::to_string(normal.size()) + " normal images available");
  }
  const std::size_t per_class = std::min(cataract.size(), normal.size());
  Rng rng = make_rng(seed, "data.balance");
  for (auto* group : {&cataract, &normal}) {
    std::sort(group->begin(), group->end());
    if (group->size() > per_class) {
      std::shuffle(group->begin(), group->end(), rng);
      group->resize(per_class);
    }
    sel.samples.insert(sel.samples.end(), group->begin(), group->end());
  }
  std::sort(sel.samples.begin(), sel.samples.end());
  return sel;
}

Tensor load_sample_image(const std::filesystem::path& image_dir, const SampleKey& key,
                         const ImageGeometry& geometry) {
  Tensor image = prepare_image(decode_image(image_dir / key.source), geometry);
  return rotate_bilinear(image, rotation_degrees(key.augmentation));
}

Corpus build_binary_corpus(std::span<const LabelRecord> records, const std::filesystem::path& image_dir,
                           const ImageGeometry& geometry, std::uint64_t seed) {
  CorpusSelection sel = select_binary_corpus(records, image_dir, seed);
  Corpus corpus;
  corpus.skipped = std::move(sel.skipped);
  corpus.samples.reserve(sel.samples.size());
  for (const auto& key : sel.samples) {
    corpus.samples.push_back({load_sample_image(image_dir, key, geometry), key.label, key.source, key.augmentation});
  }
  return corpus;
}

std::vector<SampleKey> augment(std::span<const SampleKey> keys) {
  std::vector<SampleKey> out;
  out.reserve(keys.size() * 3);
  for (const auto& k : keys) {
    if (k.augmentation != Augmentation::original) {
      throw ParameterError("augment: " + k.source + " is already augmented");
    }
    for (auto a : {Augmentation::original, Augmentation::rotate_pos30, Augmentation::rotate_neg30}) {
      out.push_back({k.source, a, k.label});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LabeledSample> augment(std::span<const LabeledSample> samples) {
  std::vector<LabeledSample> out;
  out.reserve(samples.size() * 3);
  for (const auto& s : samples) {
    if (s.augmentation != Augmentation::original) {
      throw ParameterError("augment: " + s.source + " is already augmented");
    }
    out.push_back(s);
    for (auto a : {Augmentation::rotate_pos30, Augmentation::rotate_neg30}) {
      out.push_back({rotate_bilinear(s.image, rotation_degrees(a)), s.label, s.source, a});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
  return out;
}

// ---------------------------------------------------------------------------
// Split

std::string_view to_string(Partition p) noexcept { return p == Partition::train ? "train" : "test"; }

std::vector<SampleKey> DatasetSplit::partition(Partition p) const {
  std::vector<SampleKey> keys;
  for (const auto& e : entries) {
    if (e.partition == p) keys.push_back(e.key);
  }
  return keys;
}

std::uint32_t DatasetSplit::checksum() const {
  std::vector<std::string> lines;
  lines.reserve(entries.size());
  for (const auto& e : entries) lines.push_back(entry_line(e));
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) joined += l + '\n';
  return crc32(joined);
}

DatasetSplit split(std::span<const SampleKey> samples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("split: ratio must lie in (0, 1)");
  std::map<std::string, Label> source_label;
  for (const auto& s : samples) {
    auto [it, inserted] = source_label.emplace(s.source, s.label);
    if (!inserted && it->second != s.label) {
      throw CorpusError("split: source " + s.source + " carries both labels");
    }
  }
  std::set<std::string> train_sources;
  for (Label label : {Label::normal, Label::cataract}) {
    std::vector<std::string> sources;
    for (const auto& [src, l] : source_label) {
      if (l == label) sources.push_back(src);
    }
    if (sources.size() < 2) {
      throw CorpusError("split: label " + std::string(to_string(label)) + " has " +
                        std::to_string(sources.size()) + " source images, need at least 2");
    }
    Rng rng = make_rng(seed, std::string("data.split.") + std::string(to_string(label)));
    std::shuffle(sources.begin(), sources.end(), rng);
    // The epsilon absorbs representation error such as 0.57 * 100 = 56.999...
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(sources.size()) + 1e-9));
    train_sources.insert(sources.begin(), sources.begin() + static_cast<std::ptrdiff_t>(n_train));
  }
  DatasetSplit out;
  out.seed = seed;
  out.ratio = ratio;
  for (const auto& s : samples) {
    out.entries.push_back({s, train_sources.count(s.source) ? Partition::train : Partition::test});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

DatasetSplit split(std::span<const LabeledSample> samples, double ratio, std::uint64_t seed) {
  std::vector<SampleKey> keys;
  keys.reserve(samples.size());
  for (const auto& s : samples) keys.push_back(s.key());
  return split(keys, ratio, seed);
}

// ---------------------------------------------------------------------------
// Manifest
//
//   # fnet-manifest 1
//   # seed 42
//   # ratio 0.7
//   # image_dir /data/odir
//   # image_shape 224x224x3
//   # checksum 1f2e3d4c
//   0_left.jpg<TAB>orig<TAB>cataract<TAB>train

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  char crc[9];
  std::snprintf(crc, sizeof crc, "%08x", m.split.checksum());
  out << "# fnet-manifest 1\n"
      << "# seed " << m.split.seed << '\n'
      << "# ratio " << format_ratio(m.split.ratio) << '\n'
      << "# image_dir " << m.image_dir.string() << '\n'
      << "# image_shape " << m.geometry.to_string() << '\n'
      << "# checksum " << crc << '\n';
  for (const auto& e : m.split.entries) out << entry_line(e) << '\n';
  if (!out) throw IoError("short write to manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + path.string());
  Manifest m;
  std::optional<std::uint32_t> stored;
  bool saw_magic = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.starts_with("#")) {
      std::istringstream h(line.substr(1));
      std::string key;
      h >> key;
      std::string value;
      std::getline(h >> std::ws, value);
      if (key == "fnet-manifest") {
        if (value != "1") throw FormatError("unsupported manifest version " + value);
        saw_magic = true;
      } else if (key == "seed") {
        try {
          m.split.seed = std::stoull(value);
        } catch (const std::exception&) {
          throw ParseError("bad seed '" + value + "'", line_no);
        }
      } else if (key == "ratio") {
        try {
          m.split.ratio = std::stod(value);
        } catch (const std::exception&) {
          throw ParseError("bad ratio '" + value + "'", line_no);
        }
      } else if (key == "image_dir") {
        m.image_dir = value;
      } else if (key == "image_shape") {
        try {
          m.geometry = ImageGeometry::parse(value);
        } catch (const ParseError& e) {
          throw ParseError(e.what(), line_no);
        }
      } else if (key == "checksum") {
        try {
          stored = static_cast<std::uint32_t>(std::stoul(value, nullptr, 16));
        } catch (const std::exception&) {
          throw ParseError("bad checksum '" + value + "'", line_no);
        }
      }
      continue;
    }
    std::vector<std::string> fields;
    std::istringstream row(line);
    for (std::string f; std::getline(row, f, '\t');) fields.push_back(f);
    if (fields.size() != 4) throw ParseError("expected 4 tab-separated fields, got " + std::to_string(fields.size()), line_no);
    const auto aug = parse_augmentation(fields[1]);
    if (!aug) throw ParseError("bad augmentation tag '" + fields[1] + "'", line_no);
    const auto label = parse_label(fields[2]);
    if (!label || (fields[2] != "cataract" && fields[2] != "normal")) {
      throw ParseError("bad label token '" + fields[2] + "'", line_no);
    }
    Partition part;
    if (fields[3] == "train") {
      part = Partition::train;
    } else if (fields[3] == "test") {
      part = Partition::test;
    } else {
      throw ParseError("bad partition '" + fields[3] + "'", line_no);
    }
    m.split.entries.push_back({{fields[0], *aug, *label}, part});
  }
  if (!saw_magic) throw FormatError(path.string() + " is not an fnet manifest");
  if (!stored) throw IntegrityError("manifest has no checksum line");
  if (*stored != m.split.checksum()) throw IntegrityError("manifest checksum mismatch: " + path.string());
  return m;
}

// ---------------------------------------------------------------------------
// Sample cache

void write_sample_cache(const std::filesystem::path& path, const SampleSource& source,
                        std::span<const SampleKey> keys) {
  if (keys.size() != source.size()) throw ParameterError("write_sample_cache: key count does not match source");
  TensorArchive archive;
  archive.magic = "FNTC";
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    index.push_back({keys[i].source, std::string(to_string(keys[i].augmentation)),
                     std::string(to_string(keys[i].label))});
    archive.tensors.push_back({std::to_string(i), source.image(i)});
  }
  archive.header = nlohmann::json{{"samples", index}}.dump();
  write_archive(path, archive);
}

std::vector<LabeledSample> read_sample_cache(const std::filesystem::path& path) {
  TensorArchive archive = read_archive(path, "FNTC", 1);
  const auto header = nlohmann::json::parse(archive.header, nullptr, false);
  if (header.is_discarded() || !header.contains("samples")) throw FormatError("sample cache header is malformed");
  const auto& index = header["samples"];
  if (index.size() != archive.tensors.size()) throw FormatError("sample cache index does not match its tensors");
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < archive.tensors.size(); ++i) {
    const auto aug = parse_augmentation(index[i].at(1).get<std::string>());
    const auto label = parse_label(index[i].at(2).get<std::string>());
    if (!aug || !label) throw FormatError("sample cache entry " + std::to_string(i) + " is malformed");
    out.push_back({std::move(archive.tensors[i].tensor), *label, index[i].at(0).get<std::string>(), *aug});
  }
  return out;
}

}  // namespace fnet
