// Copyright 2026 The ivfusion Authors.
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

namespace ivf {

// Base class for all toolkit errors. Data/numeric problems derive from this
// and map to CLI exit code 1; command-line usage problems are handled by the
// argument parser and map to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes disagree with an operation's contract.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// A file could not be read or written.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// File contents disagree with their declared layout (sidecar mismatch etc.).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// A configuration value is outside its legal range.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& msg) : Error(msg) {}
};

// An operation needs more frames than the clip provides.
class InsufficientFramesError : public Error {
 public:
  explicit InsufficientFramesError(const std::string& msg) : Error(msg) {}
};

// A required auxiliary input (e.g. source clips for modality drift) is absent.
class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& msg) : Error(msg) {}
};

}  // namespace ivf
