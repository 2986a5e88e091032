// Copyright 2026 The CRCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CRCL_ERRORS_H_
#define CRCL_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crcl {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (dimensions, counts, hyperparameter ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A value violated a structural invariant (e.g. non-bijective pairing).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite input or divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked in the wrong lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace crcl

#endif  // CRCL_ERRORS_H_
