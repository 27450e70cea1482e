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

// On-disk checkpoint format (all integers little-endian):
//
//   bytes 0..3    magic "CMRG"
//   u32           format version (1)
//   u32           header length in bytes
//   header        UTF-8 JSON:
//                   {"tensors": {name: {"shape": [...], "dtype": "f32",
//                                       "offset": o, "nbytes": n}, ...},
//                    "meta": {key: value, ...}}
//                 offsets are relative to the first byte after the header
//   blobs         raw little-endian f32 tensor data at the stated offsets
//   u32           CRC-32 of every preceding byte

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chronomerge/checkpoint.hpp"

namespace chronomerge {

inline constexpr char kCheckpointMagic[4] = {'C', 'M', 'R', 'G'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorEntry {
  Shape shape;
  std::uint64_t offset = 0;  // relative to the blob region
  std::uint64_t nbytes = 0;
};

/// Parsed header of a checkpoint file.
struct CheckpointHeader {
  std::map<std::string, TensorEntry> tensors;
  std::map<std::string, std::string> meta;
  std::uint64_t data_start = 0;  // absolute file offset of the blob region
  std::string json_text;
};

/// Serializes `c` into the byte layout above.
std::vector<char> encode_checkpoint(const Checkpoint& c);
/// Inverse of encode_checkpoint. Throws FormatError on any corruption.
Checkpoint decode_checkpoint(const std::vector<char>& bytes);

/// Writes atomically (temp file + rename). Throws IoError.
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
/// Throws IoError when unreadable, FormatError on magic/version/checksum or
/// header problems.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Reads and validates the header (and, when `verify_crc`, the whole-file
/// checksum) without materializing tensor data.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path, bool verify_crc = true);

/// Reads a single tensor using a previously parsed header.
Tensor read_tensor(const std::filesystem::path& path, const CheckpointHeader& header, const std::string& name);

std::uint32_t crc32_of(const char* data, std::size_t size);

}  // namespace chronomerge
