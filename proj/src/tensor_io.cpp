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

#include "fnet/tensor_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fnet/errors.hpp"

namespace fnet {

namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian host");

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void bytes(std::string_view s) { raw(s.data(), s.size()); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  std::span<const std::uint8_t> view() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  float f32() {
    float v;
    raw(&v, sizeof v);
    return v;
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IntegrityError("archive truncated");
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32(std::string_view text) noexcept {
  return crc32(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_archive(const TensorArchive& archive) {
  if (archive.magic.size() != 4) throw FormatError("archive magic must be four bytes");
  Writer w;
  w.bytes(archive.magic);
  w.u32(archive.version);
  w.u32(static_cast<std::uint32_t>(archive.header.size()));
  w.bytes(archive.header);
  w.u32(static_cast<std::uint32_t>(archive.tensors.size()));
  for (const auto& [name, tensor] : archive.tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(tensor.shape().rank()));
    for (std::size_t d : tensor.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : tensor.values()) w.f32(static_cast<float>(v));
  }
  w.u32(crc32(w.view()));
  return w.take();
}

TensorArchive decode_archive(std::span<const std::uint8_t> bytes, std::string_view magic,
                             std::uint32_t max_version) {
  Reader head(bytes);
  TensorArchive archive;
  if (bytes.size() < 8) throw IntegrityError("archive truncated: " + std::to_string(bytes.size()) + " bytes");
  archive.magic = head.string(4);
  if (archive.magic != magic) {
    throw FormatError("bad magic '" + archive.magic + "', expected '" + std::string(magic) + "'");
  }
  archive.version = head.u32();
  if (archive.version == 0 || archive.version > max_version) {
    throw FormatError("unsupported format version " + std::to_string(archive.version) +
                      " (this build reads up to " + std::to_string(max_version) + ")");
  }
  if (bytes.size() < 12) throw IntegrityError("archive truncated before checksum");
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (crc32(body) != stored) throw IntegrityError("checksum mismatch: file is corrupt or truncated");

  Reader r(body);
  r.string(4);
  r.u32();
  archive.header = r.string(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = r.string(r.u32());
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    Shape shape(std::move(dims));
    std::vector<double> values(shape.element_count());
    for (double& v : values) v = r.f32();
    nt.tensor = Tensor::from_values(std::move(shape), std::move(values));
    archive.tensors.push_back(std::move(nt));
  }
  if (!r.at_end()) throw IntegrityError("trailing bytes after last tensor");
  return archive;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  const auto bytes = encode_archive(archive);
  // Write-then-rename so an interrupted save never clobbers the previous file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive read_archive(const std::filesystem::path& path, std::string_view magic,
                           std::uint32_t max_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes, magic, max_version);
}

void round_to_float(Tensor& t) noexcept {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace fnet
