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

#include <stdexcept>
#include <string>

namespace fnet {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible extents between operands or against a layer contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Hyperparameter or argument outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Operation invoked in the wrong mode or with a stale cache.
class StateError : public Error {
 public:
  using Error::Error;
};

// Unknown magic or unsupported on-disk version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Checksum mismatch or truncated file.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// Dataset cannot be balanced or split as requested.
class CorpusError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Unknown key or unparsable value in a run configuration.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what) : Error(what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace fnet
