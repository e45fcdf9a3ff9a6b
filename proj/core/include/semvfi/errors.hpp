// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace semvfi {

/// A caller broke a documented precondition (shape, range, mode).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Weights or checkpoints could not be read or did not match the schema.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset layout problems: missing frames, malformed list files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered where the pipeline requires finite values.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
template <typename... Parts>
std::string concat(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << std::forward<Parts>(parts));
  return os.str();
}
}  // namespace detail

template <typename... Parts>
void expects(bool condition, Parts&&... message) {
  if (!condition) {
    throw ContractViolation(detail::concat(std::forward<Parts>(message)...));
  }
}

}  // namespace semvfi
