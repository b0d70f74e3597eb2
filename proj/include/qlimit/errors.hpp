// Copyright 2026 The qlimit Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace qlimit {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model or grid parameters (bad PSF sampling, non-finite inputs, ...).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// The requested measurement model has no implementation for this PSF kind.
class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

// The mean derivative has weight on a zero-variance direction, so the
// moment bound is unbounded.
class DegenerateMomentError : public Error {
 public:
  using Error::Error;
};

class LabelMismatchError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

// Bad command-line or config input. `field` is the dotted path of the
// offending config entry, if any.
class UsageError : public Error {
 public:
  UsageError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qlimit
