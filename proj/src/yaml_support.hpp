// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

// Small helpers over yaml-cpp shared by the workflow and catalog readers.

#pragma once

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <initializer_list>
#include <string>
#include <string_view>

#include "flowforge/errors.hpp"

namespace flowforge::yaml {

inline int line_of(const YAML::Node& node) { return node.Mark().line + 1; }
inline int column_of(const YAML::Node& node) { return node.Mark().column + 1; }

[[noreturn]] inline void fail(const YAML::Node& node, const std::string& message) {
  throw SyntaxError(message, line_of(node), column_of(node));
}

inline YAML::Node load(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw SyntaxError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
}

inline void expect_map(const YAML::Node& node, std::string_view what) {
  if (!node.IsMap()) fail(node, std::string(what) + " must be a mapping");
}

inline void expect_sequence(const YAML::Node& node, std::string_view what) {
  if (!node.IsSequence()) fail(node, std::string(what) + " must be a sequence");
}

/// Rejects keys outside `allowed`.
inline void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed) {
  for (const auto& kv : map) {
    if (!kv.first.IsScalar()) fail(kv.first, "mapping keys must be scalars");
    const auto& key = kv.first.Scalar();
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) throw UnknownKey(key, line_of(kv.first), column_of(kv.first));
  }
}

inline std::string scalar(const YAML::Node& node, std::string_view what) {
  if (!node.IsScalar()) fail(node, std::string(what) + " must be a scalar");
  return node.Scalar();
}

inline std::string required_string(const YAML::Node& map, const char* key) {
  const YAML::Node node = map[key];
  if (!node) fail(map, std::string("missing key '") + key + "'");
  return scalar(node, key);
}

inline int to_int(const YAML::Node& node, std::string_view what) {
  const std::string text = scalar(node, what);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(node, std::string(what) + " must be an integer");
  }
  return value;
}

inline bool to_bool(const YAML::Node& node, std::string_view what) {
  const std::string text = scalar(node, what);
  if (text == "true") return true;
  if (text == "false") return false;
  fail(node, std::string(what) + " must be true or false");
}

}  // namespace flowforge::yaml
