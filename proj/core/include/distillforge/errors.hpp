// Copyright 2026 The DistillForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace distillforge {

/// Root of every error raised by the library. Each subclass names one failure
/// kind so callers (and the CLI exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroNormRow : public Error {
 public:
  explicit ZeroNormRow(std::size_t row)
      : Error("row " + std::to_string(row) + " has zero norm"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class BatchMismatch : public ShapeMismatch {
 public:
  using ShapeMismatch::ShapeMismatch;
};

class DimMismatch : public ShapeMismatch {
 public:
  using ShapeMismatch::ShapeMismatch;
};

class CosineDimMismatch : public DimMismatch {
 public:
  using DimMismatch::DimMismatch;
};

class NonFiniteEvaluation : public Error {
 public:
  using Error::Error;
};

class MissingKey : public Error {
 public:
  explicit MissingKey(std::string key)
      : Error("missing key: " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit FormatError(const std::string& what) : Error(what), offset_(0) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class DataExhausted : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(const std::string& what, std::string dump_path)
      : Error(what), dump_path_(std::move(dump_path)) {}
  const std::string& dump_path() const noexcept { return dump_path_; }

 private:
  std::string dump_path_;
};

class EmptyTokenSequence : public Error {
 public:
  using Error::Error;
};

class MissingQrel : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace distillforge
