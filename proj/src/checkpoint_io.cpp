// Copyright 2026 The chronomerge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "chronomerge/checkpoint_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "chronomerge/errors.hpp"

namespace chronomerge {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using json = nlohmann::json;

constexpr std::size_t kPreambleSize = 12;  // magic + version + header length
constexpr std::size_t kTrailerSize = 4;

void put_u32(std::vector<char>& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

CheckpointHeader parse_header(const char* text, std::size_t length, std::uint64_t data_start, std::uint64_t data_size) {
  CheckpointHeader header;
  header.json_text.assign(text, length);
  header.data_start = data_start;
  json j;
  try {
    j = json::parse(header.json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("tensors") || !j["tensors"].is_object())
    throw FormatError("checkpoint header lacks a 'tensors' object");
  try {
    for (const auto& [name, entry] : j["tensors"].items()) {
      if (name.empty()) throw FormatError("checkpoint header holds an empty tensor name");
      if (entry.at("dtype").get<std::string>() != "f32")
        throw FormatError("tensor '" + name + "' has unsupported dtype " + entry.at("dtype").dump());
      TensorEntry te;
      te.shape = entry.at("shape").get<Shape>();
      te.offset = entry.at("offset").get<std::uint64_t>();
      te.nbytes = entry.at("nbytes").get<std::uint64_t>();
      std::size_t numel = 0;
      try {
        numel = shape_numel(te.shape);
      } catch (const std::invalid_argument& e) {
        throw FormatError("tensor '" + name + "': " + e.what());
      }
      if (te.nbytes != numel * sizeof(float))
        throw FormatError("tensor '" + name + "' byte count disagrees with its shape");
      if (te.offset > data_size || te.nbytes > data_size - te.offset)
        throw FormatError("tensor '" + name + "' extends past the data region");
      header.tensors.emplace(name, std::move(te));
    }
    if (j.contains("meta")) {
      for (const auto& [k, v] : j["meta"].items()) header.meta.emplace(k, v.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
  return header;
}

// Validates the fixed-size framing and checksum; returns the header length.
std::uint32_t check_framing(const char* bytes, std::size_t size, bool verify_crc) {
  if (size < kPreambleSize + kTrailerSize) throw FormatError("checkpoint file is truncated");
  if (std::memcmp(bytes, kCheckpointMagic, 4) != 0) throw FormatError("bad magic bytes; not a CMRG checkpoint");
  const auto version = get_u32(bytes + 4);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_u32(bytes + 8);
  if (header_len > size - kPreambleSize - kTrailerSize) throw FormatError("checkpoint header length exceeds file size");
  if (verify_crc) {
    const auto stored = get_u32(bytes + size - kTrailerSize);
    if (stored != crc32_of(bytes, size - kTrailerSize)) throw FormatError("checkpoint checksum mismatch");
  }
  return header_len;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> bytes(size);
  in.seekg(0);
  if (size && !in.read(bytes.data(), static_cast<std::streamsize>(size)))
    throw IoError("failed reading '" + path.string() + "'");
  return bytes;
}

}  // namespace

std::uint32_t crc32_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  while (size > 0) {
    const auto n = static_cast<uInt>(std::min(size, kChunk));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), n);
    data += n;
    size -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<char> encode_checkpoint(const Checkpoint& c) {
  json tensors = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : c) {
    const std::uint64_t nbytes = t.numel() * sizeof(float);
    tensors[name] = {{"shape", t.shape}, {"dtype", "f32"}, {"offset", offset}, {"nbytes", nbytes}};
    offset += nbytes;
  }
  json header = {{"tensors", std::move(tensors)}, {"meta", c.meta()}};
  const std::string text = header.dump();

  std::vector<char> out;
  out.reserve(kPreambleSize + text.size() + offset + kTrailerSize);
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [_, t] : c) {
    const auto* p = reinterpret_cast<const char*>(t.data.data());
    out.insert(out.end(), p, p + t.numel() * sizeof(float));
  }
  put_u32(out, crc32_of(out.data(), out.size()));
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  const auto header_len = check_framing(bytes.data(), bytes.size(), true);
  const std::uint64_t data_start = kPreambleSize + header_len;
  const std::uint64_t data_size = bytes.size() - kTrailerSize - data_start;
  auto header = parse_header(bytes.data() + kPreambleSize, header_len, data_start, data_size);

  Checkpoint c;
  for (const auto& [name, e] : header.tensors) {
    std::vector<float> data(e.nbytes / sizeof(float));
    if (e.nbytes) std::memcpy(data.data(), bytes.data() + data_start + e.offset, e.nbytes);
    c.set(name, Tensor(e.shape, std::move(data)));
  }
  c.meta() = std::move(header.meta);
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path, bool verify_crc) {
  if (verify_crc) {
    const auto bytes = read_file(path);
    const auto header_len = check_framing(bytes.data(), bytes.size(), true);
    const std::uint64_t data_start = kPreambleSize + header_len;
    return parse_header(bytes.data() + kPreambleSize, header_len, data_start, bytes.size() - kTrailerSize - data_start);
  }
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size < kPreambleSize + kTrailerSize) throw FormatError("checkpoint file is truncated");
  in.seekg(0);
  std::vector<char> pre(kPreambleSize);
  in.read(pre.data(), kPreambleSize);
  if (std::memcmp(pre.data(), kCheckpointMagic, 4) != 0) throw FormatError("bad magic bytes; not a CMRG checkpoint");
  if (get_u32(pre.data() + 4) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  const auto header_len = get_u32(pre.data() + 8);
  if (header_len > size - kPreambleSize - kTrailerSize) throw FormatError("checkpoint header length exceeds file size");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), header_len)) throw IoError("failed reading header of '" + path.string() + "'");
  const std::uint64_t data_start = kPreambleSize + header_len;
  return parse_header(text.data(), text.size(), data_start, size - kTrailerSize - data_start);
}

Tensor read_tensor(const std::filesystem::path& path, const CheckpointHeader& header, const std::string& name) {
  auto it = header.tensors.find(name);
  if (it == header.tensors.end()) throw KeyMismatch("checkpoint '" + path.string() + "' has no tensor '" + name + "'");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<float> data(it->second.nbytes / sizeof(float));
  in.seekg(static_cast<std::streamoff>(header.data_start + it->second.offset));
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(it->second.nbytes)))
    throw IoError("failed reading tensor '" + name + "' from '" + path.string() + "'");
  return Tensor(it->second.shape, std::move(data));
}

}  // namespace chronomerge
