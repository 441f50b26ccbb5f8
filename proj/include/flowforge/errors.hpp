// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace flowforge {

/// Base class for every error raised by the library. `code()` is a stable
/// machine-readable identifier (also used in service error bodies).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, int line, int column)
      : Error("SyntaxError", message + " (line " + std::to_string(line) + ", column " +
                                 std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class UnknownKey : public Error {
 public:
  UnknownKey(const std::string& key, int line, int column)
      : Error("UnknownKey", "unknown key '" + key + "' (line " + std::to_string(line) +
                                ", column " + std::to_string(column) + ")"),
        key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class DuplicateOrder : public Error {
 public:
  explicit DuplicateOrder(int order)
      : Error("DuplicateOrder", "duplicate step order " + std::to_string(order)) {}
};

}  // namespace flowforge
