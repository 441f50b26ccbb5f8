// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "flowforge/catalog.hpp"
#include "flowforge/generation.hpp"
#include "flowforge/json_io.hpp"
#include "flowforge/retriever.hpp"
#include "flowforge/workflow.hpp"

namespace flowforge {

class InvalidPhase : public Error {
 public:
  explicit InvalidPhase(const std::string& message) : Error("InvalidPhase", message) {}
};

class UnknownSession : public Error {
 public:
  explicit UnknownSession(const std::string& id) : Error("UnknownSession", "no session " + id) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message) : Error("InvalidArgument", message) {}
};

/// Wraps the sub-task error that moved a session to FAILED.
class GenerationFailed : public Error {
 public:
  GenerationFailed(std::string cause_code, const std::string& message)
      : Error("GenerationFailed", message), cause_code_(std::move(cause_code)) {}
  const std::string& cause_code() const noexcept { return cause_code_; }

 private:
  std::string cause_code_;
};

/// Catalog plus the index built from it; swapped as a unit.
struct Engine {
  std::shared_ptr<const EnvironmentCatalog> catalog;
  std::shared_ptr<const LexicalIndex> index;
};

Engine make_engine(EnvironmentCatalog catalog);

struct OrchestrationConfig {
  std::shared_ptr<const Generator> generator;
  int k = kDefaultChoices;
  int budget = 256;
  bool repair_mode = true;
  bool context_expansion = false;
  bool auto_continue = false;
  ArtifactFilter filter;
  /// When set, each session appends its events to `<dir>/<id>.events.jsonl`.
  std::filesystem::path event_log_dir;
};

// --- single sub-task calls ---------------------------------------------------

struct OutlineOutcome {
  Outline outline;
  SubTaskResult result;
};

OutlineOutcome create_flow(const Engine& engine, const OrchestrationConfig& config,
                           const std::string& requirement, std::stop_token stop = {});

struct StepOutcome {
  int order = 0;
  std::vector<StepInputValue> inputs;
  SubTaskResult result;
};

/// Populates one step of `partial`. Outline-only mode hides the inputs of
/// earlier steps from the prompt.
StepOutcome populate_step(const Engine& engine, const OrchestrationConfig& config,
                          const Workflow& partial, const Outline& outline, int target_order,
                          bool outline_only, std::stop_token stop = {},
                          const std::function<void(const RankedChoices&)>& on_choices = {});

/// Every step with outline-only context. `parallel` spreads steps over
/// OpenMP threads; results come back in outline order either way.
std::vector<StepOutcome> populate_all_outline_only(const Engine& engine,
                                                   const OrchestrationConfig& config,
                                                   const Workflow& skeleton, const Outline& outline,
                                                   bool parallel, std::stop_token stop = {});

/// Whole pipeline without a session: createFlow, then every step in order.
struct GenerationRun {
  Workflow workflow;
  OutlineOutcome outline;
  std::vector<StepOutcome> steps;
};

GenerationRun generate_workflow(const Engine& engine, const OrchestrationConfig& config,
                                const std::string& requirement, bool parallel_populate = false);

/// createFlow transcript followed by each populateInputs transcript.
std::string run_transcript_jsonl(const GenerationRun& run);

// --- sessions ----------------------------------------------------------------

enum class Phase { kIdle, kOutlineReady, kPopulating, kComplete, kStopped, kFailed };

std::string_view phase_name(Phase phase);

struct SessionEvent {
  std::string session_id;
  std::uint64_t seq = 0;
  std::string type;  // outline, choices_offered, step_populated, completed, stopped, failed
  Json payload;
};

Json event_to_json(const SessionEvent& event);

struct SessionSnapshot {
  std::string id;
  std::string parent_id;
  std::string requirement;
  Phase phase = Phase::kIdle;
  int next_order = 0;  // step POPULATING waits on
  bool superseded = false;
  std::optional<Outline> outline;
  Workflow workflow;  // populated prefix plus outline-only rest
  std::string error_code;
  std::string error_message;

  /// "POPULATING(2)" style label.
  std::string phase_label() const;
};

Json snapshot_to_json(const SessionSnapshot& snapshot);

class Session {
 public:
  Session(std::string id, std::string requirement, std::string parent_id);

  const std::string& id() const { return id_; }
  SessionSnapshot snapshot() const;
  bool terminal() const;
  std::vector<SessionEvent> events_after(std::optional<std::uint64_t> last_seq) const;
  /// Blocks until an event newer than `last_seq` exists, the session is
  /// terminal, or `timeout` passes.
  std::vector<SessionEvent> wait_events(std::optional<std::uint64_t> last_seq,
                                        std::chrono::milliseconds timeout) const;

 private:
  friend class SessionManager;

  void emit(const std::string& type, Json payload);

  const std::string id_;
  std::filesystem::path log_file_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::mutex command_mutex_;
  std::stop_source stop_;
  SessionSnapshot state_;
  std::vector<SessionEvent> events_;
  bool closed_ = false;  // no further events
};

class SessionManager {
 public:
  SessionManager(Engine engine, OrchestrationConfig config);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  /// Runs createFlow (and population when `auto_continue`) before returning.
  /// Throws InvalidArgument on an empty requirement and GenerationFailed when
  /// a sub-task fails (the session is kept in FAILED).
  std::shared_ptr<Session> start_session(const std::string& requirement,
                                         std::optional<bool> auto_continue = std::nullopt);
  /// Same, but runs on a background thread; the session is returned in IDLE.
  std::shared_ptr<Session> start_session_async(const std::string& requirement,
                                               std::optional<bool> auto_continue = std::nullopt);

  /// Runs createFlow for an IDLE session (e.g. one returned by
  /// modify_requirement), then population when `auto_continue`.
  void begin(const std::string& id, std::optional<bool> auto_continue = std::nullopt);
  void begin_async(const std::string& id, std::optional<bool> auto_continue = std::nullopt);

  void continue_session(const std::string& id, std::optional<int> up_to = std::nullopt);
  /// Validates the phase, then populates on a background thread.
  void continue_session_async(const std::string& id, std::optional<int> up_to = std::nullopt);
  void stop_session(const std::string& id);
  /// Returns the new linked session (IDLE, createFlow not yet run).
  std::shared_ptr<Session> modify_requirement(const std::string& id, const std::string& requirement);
  void batch_populate(const std::string& id, bool parallel = true);

  std::shared_ptr<Session> find(const std::string& id) const;
  std::vector<std::shared_ptr<Session>> sessions() const;

  Engine engine() const;
  void swap_engine(Engine engine);
  const OrchestrationConfig& config() const { return config_; }

 private:
  std::shared_ptr<Session> create(const std::string& requirement, const std::string& parent_id);
  void run_outline(Session& session, bool auto_continue);
  void run_continue(Session& session, std::optional<int> up_to);
  void fail(Session& session, const Error& error);
  void spawn(std::function<void()> task);

  OrchestrationConfig config_;
  mutable std::mutex engine_mutex_;
  Engine engine_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  struct Worker {
    std::jthread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::mutex workers_mutex_;
  std::vector<Worker> workers_;
};

}  // namespace flowforge
