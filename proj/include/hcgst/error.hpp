// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hcgst {

/// Bad input or configuration. The CLI maps this to exit code 2.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input record rejected at a known position (edge row, label row, node id).
class RecordError : public InputError {
 public:
  RecordError(const std::string& what, long long index)
      : InputError(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  long long index() const noexcept { return index_; }

 private:
  long long index_;
};

/// Numerical failure during a run (divergence, non-finite loss). Exit code 3.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hcgst
