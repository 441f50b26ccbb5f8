// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "flowforge/errors.hpp"
#include "flowforge/orchestrator.hpp"

namespace flowforge {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

struct ServiceConfig {
  std::filesystem::path catalog_dir = "data/catalog";
  std::filesystem::path corpus_dir = "data/corpus";
  std::string generator_name = "reference";
  int k = kDefaultChoices;
  bool repair_mode = true;
  bool context_expansion = false;
  std::string listen_address = "127.0.0.1:8080";
  std::optional<std::string> auth_token;
  std::filesystem::path ui_dir;          // served under /ui when set
  std::filesystem::path event_log_dir;   // per-session event logs when set
  std::string transcript_path;           // scripted generator
  std::string endpoint;                  // http generator
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment lookup.
std::optional<std::string> process_env(const std::string& name);

/// Reads a YAML config file (keys as in ServiceConfig) and then applies
/// FLOWFORGE_* overrides, e.g. FLOWFORGE_K or FLOWFORGE_AUTH_TOKEN.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const EnvLookup& env = process_env);

/// Throws ConfigError when the generator is not registered or k < 1.
void check_service_config(const ServiceConfig& config);

/// Splits "host:port".
std::pair<std::string, int> split_listen_address(const std::string& address);

/// HTTP front end over a SessionManager. Endpoints live under /v1; event
/// streams are server-sent events with `id:` set to the sequence number.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks a free one. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  /// bind() plus run() on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  SessionManager& sessions();
  const ServiceConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flowforge
