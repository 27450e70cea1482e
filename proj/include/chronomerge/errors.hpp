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

#pragma once

#include <stdexcept>
#include <string>

namespace chronomerge {

// Root of every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StructureMismatch : public Error {
 public:
  using Error::Error;
};
class KeyMismatch : public StructureMismatch {
 public:
  using StructureMismatch::StructureMismatch;
};
class ShapeMismatch : public StructureMismatch {
 public:
  using StructureMismatch::StructureMismatch;
};

class IoError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};
class WeightMismatch : public Error {
 public:
  using Error::Error;
};
class ArityError : public Error {
 public:
  using Error::Error;
};
class ZeroTaskVector : public Error {
 public:
  using Error::Error;
};
class InvalidProbability : public Error {
 public:
  using Error::Error;
};
class InvalidThresholds : public Error {
 public:
  using Error::Error;
};
class InvalidCount : public Error {
 public:
  using Error::Error;
};

class EmptyBuffer : public Error {
 public:
  using Error::Error;
};
class DivergenceError : public Error {
 public:
  using Error::Error;
};
class InvalidDimensions : public Error {
 public:
  using Error::Error;
};
class EmptyDataset : public Error {
 public:
  using Error::Error;
};
class EmptyHoldout : public Error {
 public:
  using Error::Error;
};

// Bad user-supplied configuration: unknown keys, out-of-range values,
// incompatible protocol pairs, missing required fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace chronomerge
