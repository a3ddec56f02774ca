/*
Copyright 2026 The fcdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace fcdiff {

// Exception taxonomy. The CLI maps each family onto a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-range configuration (schedule endpoints, JSON fields).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File system and file-format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Data that violates an operation's contract: shape mismatches, non-finite
// values, out-of-range indices, stale statistics.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IndexError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class FingerprintMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace fcdiff
