// SPDX-License-Identifier: Apache-2.0
//
// Error types shared across the library. Configuration problems (bad file,
// bad field, dimension mismatch) and bad runtime inputs are kept distinct so
// the CLI can map them to different exit codes.

#pragma once

#include <stdexcept>
#include <string>

namespace rlx {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rlx
