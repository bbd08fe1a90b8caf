// Copyright 2026 The dqpsa Authors.
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

namespace dqpsa {

// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Index or slice outside a tensor / table.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Invalid model geometry or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation was called outside its contract (e.g. a description-only
// sequence routed into image cross-attention).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// API misuse: non-scalar backward root, empty batch, unknown mode.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed dataset / checkpoint / config file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A referenced input file does not exist.
class MissingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dqpsa
