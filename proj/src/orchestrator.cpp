// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>

#include "flowforge/validate.hpp"

namespace flowforge {

namespace {

RunOptions run_options(const Engine& engine, const OrchestrationConfig& config,
                       std::stop_token stop) {
  RunOptions options;
  options.k = config.k;
  options.budget = config.budget;
  options.context_expansion = config.context_expansion;
  options.filter = config.filter;
  options.require_fresh = &engine.catalog->version();
  options.stop = std::move(stop);
  return options;
}

void require_engine(const Engine& engine, const OrchestrationConfig& config) {
  if (!engine.catalog || !engine.index) throw InvalidArgument("no catalog or index loaded");
  if (!config.generator) throw InvalidArgument("no generator configured");
}

bool in_progress(Phase phase) { return phase == Phase::kOutlineReady || phase == Phase::kPopulating; }

}  // namespace

Engine make_engine(EnvironmentCatalog catalog) {
  auto shared = std::make_shared<const EnvironmentCatalog>(std::move(catalog));
  auto index = std::make_shared<const LexicalIndex>(build_index(*shared));
  return {std::move(shared), std::move(index)};
}

OutlineOutcome create_flow(const Engine& engine, const OrchestrationConfig& config,
                           const std::string& requirement, std::stop_token stop) {
  require_engine(engine, config);
  PromptState state;
  state.sub_task = SubTask::kCreateFlow;
  state.requirement = requirement;
  const SubTaskResult raw =
      run_sub_task(*config.generator, state, *engine.index, run_options(engine, config, stop));
  SubTaskResult result =
      constrain_output(raw, state, *engine.catalog, {config.repair_mode, engine.index.get()});
  Outline outline = parse_outline(result.text);
  return {std::move(outline), std::move(result)};
}

StepOutcome populate_step(const Engine& engine, const OrchestrationConfig& config,
                          const Workflow& partial, const Outline& outline, int target_order,
                          bool outline_only, std::stop_token stop,
                          const std::function<void(const RankedChoices&)>& on_choices) {
  require_engine(engine, config);
  const PromptState state = populate_state(partial, outline, target_order, outline_only);
  RunOptions options = run_options(engine, config, std::move(stop));
  options.on_choices = on_choices;
  const SubTaskResult raw = run_sub_task(*config.generator, state, *engine.index, options);
  SubTaskResult result =
      constrain_output(raw, state, *engine.catalog, {config.repair_mode, engine.index.get()});
  StepOutcome outcome;
  outcome.order = target_order;
  outcome.inputs = parse_input_list(result.text);
  outcome.result = std::move(result);
  return outcome;
}

std::vector<StepOutcome> populate_all_outline_only(const Engine& engine,
                                                   const OrchestrationConfig& config,
                                                   const Workflow& skeleton, const Outline& outline,
                                                   bool parallel, std::stop_token stop) {
  const int n = static_cast<int>(outline.rows.size());
  std::vector<StepOutcome> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < n; ++i) {
    try {
      outcomes[i] = populate_step(engine, config, skeleton, outline, outline.rows[i].order, true, stop);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  return outcomes;
}

GenerationRun generate_workflow(const Engine& engine, const OrchestrationConfig& config,
                                const std::string& requirement, bool parallel_populate) {
  GenerationRun run;
  run.outline = create_flow(engine, config, requirement);
  run.workflow = workflow_from_outline(run.outline.outline, requirement);
  if (parallel_populate) {
    run.steps = populate_all_outline_only(engine, config, run.workflow, run.outline.outline, true);
    for (const auto& step : run.steps) run.workflow.steps[step.order - 1].inputs = step.inputs;
    return run;
  }
  for (const auto& row : run.outline.outline.rows) {
    run.steps.push_back(populate_step(engine, config, run.workflow, run.outline.outline, row.order, false));
    run.workflow.steps[row.order - 1].inputs = run.steps.back().inputs;
  }
  return run;
}

std::string run_transcript_jsonl(const GenerationRun& run) {
  std::string out = transcript_to_jsonl(run.outline.result.transcript);
  for (const auto& step : run.steps) out += transcript_to_jsonl(step.result.transcript);
  return out;
}

// --- sessions ----------------------------------------------------------------

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kIdle: return "IDLE";
    case Phase::kOutlineReady: return "OUTLINE_READY";
    case Phase::kPopulating: return "POPULATING";
    case Phase::kComplete: return "COMPLETE";
    case Phase::kStopped: return "STOPPED";
    case Phase::kFailed: return "FAILED";
  }
  return "UNKNOWN";
}

std::string SessionSnapshot::phase_label() const {
  std::string label(phase_name(phase));
  if (phase == Phase::kPopulating) label += "(" + std::to_string(next_order) + ")";
  return label;
}

Json event_to_json(const SessionEvent& event) {
  return {{"session_id", event.session_id},
          {"seq", event.seq},
          {"type", event.type},
          {"payload", event.payload}};
}

Json snapshot_to_json(const SessionSnapshot& s) {
  Json j = {{"id", s.id},
            {"parent_id", s.parent_id},
            {"requirement", s.requirement},
            {"phase", s.phase_label()},
            {"superseded", s.superseded},
            {"workflow", serialize_workflow(s.workflow)}};
  if (s.phase == Phase::kPopulating) j["next_order"] = s.next_order;
  if (s.outline) {
    j["outline"] = serialize_outline(*s.outline);
    j["rows"] = outline_to_json(*s.outline)["rows"];
  }
  if (!s.error_code.empty()) j["error"] = {{"code", s.error_code}, {"message", s.error_message}};
  return j;
}

Session::Session(std::string id, std::string requirement, std::string parent_id) : id_(std::move(id)) {
  state_.id = id_;
  state_.requirement = requirement;
  state_.parent_id = std::move(parent_id);
  state_.workflow.requirement = std::move(requirement);
}

SessionSnapshot Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

bool Session::terminal() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::vector<SessionEvent> Session::events_after(std::optional<std::uint64_t> last_seq) const {
  std::lock_guard lock(mutex_);
  const std::size_t from = last_seq ? static_cast<std::size_t>(*last_seq + 1) : 0;
  if (from >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

std::vector<SessionEvent> Session::wait_events(std::optional<std::uint64_t> last_seq,
                                               std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const std::size_t from = last_seq ? static_cast<std::size_t>(*last_seq + 1) : 0;
  cv_.wait_for(lock, timeout, [&] { return events_.size() > from || closed_; });
  if (from >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

// Caller holds mutex_.
void Session::emit(const std::string& type, Json payload) {
  if (closed_) return;
  SessionEvent event{id_, events_.size(), type, std::move(payload)};
  if (!log_file_.empty()) {
    std::ofstream out(log_file_, std::ios::app);
    out << event_to_json(event).dump() << '\n';
  }
  events_.push_back(std::move(event));
  if (type == "completed" || type == "stopped" || type == "failed") closed_ = true;
  cv_.notify_all();
}

SessionManager::SessionManager(Engine engine, OrchestrationConfig config)
    : config_(std::move(config)), engine_(std::move(engine)) {
  if (!config_.event_log_dir.empty()) std::filesystem::create_directories(config_.event_log_dir);
}

SessionManager::~SessionManager() {
  for (const auto& session : sessions()) session->stop_.request_stop();
  std::lock_guard lock(workers_mutex_);
  workers_.clear();
}

Engine SessionManager::engine() const {
  std::lock_guard lock(engine_mutex_);
  return engine_;
}

void SessionManager::swap_engine(Engine engine) {
  std::lock_guard lock(engine_mutex_);
  engine_ = std::move(engine);
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession(id);
  return it->second;
}

std::vector<std::shared_ptr<Session>> SessionManager::sessions() const {
  std::lock_guard lock(sessions_mutex_);
  std::vector<std::shared_ptr<Session>> out;
  for (const auto& [id, session] : sessions_) out.push_back(session);
  return out;
}

std::shared_ptr<Session> SessionManager::create(const std::string& requirement,
                                                const std::string& parent_id) {
  if (requirement.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw InvalidArgument("requirement must not be empty");
  }
  std::lock_guard lock(sessions_mutex_);
  char id[16];
  std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(next_id_++));
  auto session = std::make_shared<Session>(id, requirement, parent_id);
  if (!config_.event_log_dir.empty()) {
    session->log_file_ = config_.event_log_dir / (std::string(id) + ".events.jsonl");
  }
  sessions_.emplace(id, session);
  return session;
}

void SessionManager::spawn(std::function<void()> task) {
  std::lock_guard lock(workers_mutex_);
  std::erase_if(workers_, [](const Worker& w) { return w.done->load(); });
  auto done = std::make_shared<std::atomic<bool>>(false);
  workers_.push_back({std::jthread([task = std::move(task), done] {
                        task();
                        done->store(true);
                      }),
                      done});
}

void SessionManager::fail(Session& session, const Error& error) {
  std::lock_guard lock(session.mutex_);
  session.state_.phase = Phase::kFailed;
  session.state_.error_code = error.code();
  session.state_.error_message = error.what();
  session.emit("failed", {{"code", error.code()}, {"message", error.what()}});
}

// Caller holds the command mutex.
void SessionManager::run_outline(Session& session, bool auto_continue) {
  std::string requirement;
  {
    std::lock_guard lock(session.mutex_);
    if (session.state_.phase != Phase::kIdle) {
      throw InvalidPhase("createFlow needs IDLE, session is " + session.state_.phase_label());
    }
    requirement = session.state_.requirement;
  }
  const std::stop_token stop = session.stop_.get_token();
  if (stop.stop_requested()) return;
  const Engine current = engine();
  OutlineOutcome outcome;
  try {
    outcome = create_flow(current, config_, requirement, stop);
  } catch (const Cancelled&) {
    return;
  } catch (const Error& e) {
    fail(session, e);
    throw GenerationFailed(e.code(), e.what());
  } catch (const std::exception& e) {
    fail(session, Error("InternalError", e.what()));
    throw GenerationFailed("InternalError", e.what());
  }
  {
    std::lock_guard lock(session.mutex_);
    if (stop.stop_requested()) return;
    Json sites = Json::array();
    for (const auto& site : outcome.result.sites) sites.push_back(choices_to_json(site));
    Json rows = outline_to_json(outcome.outline);
    session.state_.outline = outcome.outline;
    session.state_.workflow = workflow_from_outline(outcome.outline, requirement);
    session.state_.phase = Phase::kOutlineReady;
    session.state_.next_order = 1;
    session.emit("outline", {{"requirement", requirement},
                             {"outline", serialize_outline(outcome.outline)},
                             {"trigger", rows["trigger"]},
                             {"rows", rows["rows"]},
                             {"choices", sites}});
  }
  if (auto_continue) run_continue(session, std::nullopt);
}

// Caller holds the command mutex.
void SessionManager::run_continue(Session& session, std::optional<int> up_to) {
  Outline outline;
  int next = 0;
  {
    std::lock_guard lock(session.mutex_);
    if (!in_progress(session.state_.phase)) {
      throw InvalidPhase("continue needs OUTLINE_READY or POPULATING, session is " +
                         session.state_.phase_label());
    }
    outline = *session.state_.outline;
    next = session.state_.next_order;
  }
  const int n = static_cast<int>(outline.rows.size());
  const int last = std::min(n, up_to.value_or(n));
  const std::stop_token stop = session.stop_.get_token();
  const Engine current = engine();
  for (int order = next; order <= last; ++order) {
    if (stop.stop_requested()) return;
    Workflow partial;
    {
      std::lock_guard lock(session.mutex_);
      partial = session.state_.workflow;
    }
    int site = 0;
    auto on_choices = [&](const RankedChoices& choices) {
      std::lock_guard lock(session.mutex_);
      if (stop.stop_requested()) return;
      session.emit("choices_offered",
                   {{"order", order}, {"site", site++}, {"choices", choices_to_json(choices)}});
    };
    StepOutcome outcome;
    try {
      outcome = populate_step(current, config_, partial, outline, order, false, stop, on_choices);
    } catch (const Cancelled&) {
      return;
    } catch (const Error& e) {
      fail(session, e);
      throw GenerationFailed(e.code(), e.what());
    } catch (const std::exception& e) {
      fail(session, Error("InternalError", e.what()));
      throw GenerationFailed("InternalError", e.what());
    }
    std::lock_guard lock(session.mutex_);
    if (stop.stop_requested()) return;
    Step& step = session.state_.workflow.steps[order - 1];
    step.inputs = outcome.inputs;
    session.state_.phase = Phase::kPopulating;
    session.state_.next_order = order + 1;
    session.emit("step_populated", {{"order", order},
                                    {"name", step.name},
                                    {"annotation", step.annotation},
                                    {"block", step.block},
                                    {"inputs", serialize_input_list(step.inputs)},
                                    {"repairs", outcome.result.repairs},
                                    {"retrieval_failures", outcome.result.retrieval_failures}});
  }
  std::lock_guard lock(session.mutex_);
  if (session.state_.next_order > n) {
    session.state_.phase = Phase::kComplete;
    session.emit("completed",
                 {{"workflow", serialize_workflow(session.state_.workflow)},
                  {"validation", report_to_json(validate_workflow(session.state_.workflow, *current.catalog))}});
  }
}

std::shared_ptr<Session> SessionManager::start_session(const std::string& requirement,
                                                       std::optional<bool> auto_continue) {
  auto session = create(requirement, "");
  begin(session->id(), auto_continue);
  return session;
}

std::shared_ptr<Session> SessionManager::start_session_async(const std::string& requirement,
                                                             std::optional<bool> auto_continue) {
  auto session = create(requirement, "");
  begin_async(session->id(), auto_continue);
  return session;
}

void SessionManager::begin(const std::string& id, std::optional<bool> auto_continue) {
  auto session = find(id);
  std::lock_guard command(session->command_mutex_);
  run_outline(*session, auto_continue.value_or(config_.auto_continue));
}

void SessionManager::begin_async(const std::string& id, std::optional<bool> auto_continue) {
  auto session = find(id);
  {
    std::lock_guard lock(session->mutex_);
    if (session->state_.phase != Phase::kIdle) {
      throw InvalidPhase("createFlow needs IDLE, session is " + session->state_.phase_label());
    }
  }
  const bool automatic = auto_continue.value_or(config_.auto_continue);
  spawn([this, session, automatic] {
    std::lock_guard command(session->command_mutex_);
    try {
      run_outline(*session, automatic);
    } catch (const Error&) {
      // Already recorded as a failed event or a phase conflict.
    }
  });
}

void SessionManager::continue_session(const std::string& id, std::optional<int> up_to) {
  auto session = find(id);
  std::lock_guard command(session->command_mutex_);
  run_continue(*session, up_to);
}

void SessionManager::continue_session_async(const std::string& id, std::optional<int> up_to) {
  auto session = find(id);
  {
    std::lock_guard lock(session->mutex_);
    if (!in_progress(session->state_.phase)) {
      throw InvalidPhase("continue needs OUTLINE_READY or POPULATING, session is " +
                         session->state_.phase_label());
    }
  }
  spawn([this, session, up_to] {
    std::lock_guard command(session->command_mutex_);
    try {
      run_continue(*session, up_to);
    } catch (const Error&) {
    }
  });
}

void SessionManager::stop_session(const std::string& id) {
  auto session = find(id);
  {
    std::lock_guard lock(session->mutex_);
    if (!in_progress(session->state_.phase)) {
      throw InvalidPhase("stop needs OUTLINE_READY or POPULATING, session is " +
                         session->state_.phase_label());
    }
  }
  session->stop_.request_stop();
  std::lock_guard command(session->command_mutex_);
  std::lock_guard lock(session->mutex_);
  if (!in_progress(session->state_.phase)) {
    throw InvalidPhase("session finished as " + session->state_.phase_label() + " before stopping");
  }
  session->state_.phase = Phase::kStopped;
  session->emit("stopped", {{"workflow", serialize_workflow(session->state_.workflow)},
                            {"next_order", session->state_.next_order}});
}

std::shared_ptr<Session> SessionManager::modify_requirement(const std::string& id,
                                                            const std::string& requirement) {
  auto old = find(id);
  {
    std::lock_guard lock(old->mutex_);
    if (old->state_.phase == Phase::kFailed) throw InvalidPhase("cannot modify a FAILED session");
  }
  auto fresh = create(requirement, id);
  old->stop_.request_stop();
  std::lock_guard command(old->command_mutex_);
  std::lock_guard lock(old->mutex_);
  old->state_.superseded = true;
  if (old->state_.phase == Phase::kIdle || in_progress(old->state_.phase)) {
    old->state_.phase = Phase::kStopped;
    old->emit("stopped", {{"workflow", serialize_workflow(old->state_.workflow)},
                          {"next_order", old->state_.next_order},
                          {"superseded_by", fresh->id()}});
  }
  return fresh;
}

void SessionManager::batch_populate(const std::string& id, bool parallel) {
  auto session = find(id);
  std::lock_guard command(session->command_mutex_);
  Workflow skeleton;
  Outline outline;
  {
    std::lock_guard lock(session->mutex_);
    if (session->state_.phase != Phase::kOutlineReady) {
      throw InvalidPhase("batch population needs OUTLINE_READY, session is " +
                         session->state_.phase_label());
    }
    skeleton = session->state_.workflow;
    outline = *session->state_.outline;
  }
  const std::stop_token stop = session->stop_.get_token();
  const Engine current = engine();
  std::vector<StepOutcome> outcomes;
  try {
    outcomes = populate_all_outline_only(current, config_, skeleton, outline, parallel, stop);
  } catch (const Cancelled&) {
    return;
  } catch (const Error& e) {
    fail(*session, e);
    throw GenerationFailed(e.code(), e.what());
  } catch (const std::exception& e) {
    fail(*session, Error("InternalError", e.what()));
    throw GenerationFailed("InternalError", e.what());
  }
  std::lock_guard lock(session->mutex_);
  if (stop.stop_requested()) return;
  for (const auto& outcome : outcomes) {
    int site = 0;
    for (const auto& choices : outcome.result.sites) {
      session->emit("choices_offered",
                    {{"order", outcome.order}, {"site", site++}, {"choices", choices_to_json(choices)}});
    }
    Step& step = session->state_.workflow.steps[outcome.order - 1];
    step.inputs = outcome.inputs;
    session->state_.phase = Phase::kPopulating;
    session->state_.next_order = outcome.order + 1;
    session->emit("step_populated", {{"order", outcome.order},
                                     {"name", step.name},
                                     {"annotation", step.annotation},
                                     {"block", step.block},
                                     {"inputs", serialize_input_list(step.inputs)},
                                     {"repairs", outcome.result.repairs},
                                     {"retrieval_failures", outcome.result.retrieval_failures}});
  }
  session->state_.phase = Phase::kComplete;
  session->emit("completed",
                {{"workflow", serialize_workflow(session->state_.workflow)},
                 {"validation",
                  report_to_json(validate_workflow(session->state_.workflow, *current.catalog))}});
}

}  // namespace flowforge
