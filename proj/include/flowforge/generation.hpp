// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowforge/catalog.hpp"
#include "flowforge/errors.hpp"
#include "flowforge/retriever.hpp"
#include "flowforge/workflow.hpp"

namespace flowforge {

class BudgetExceeded : public Error {
 public:
  explicit BudgetExceeded(int budget)
      : Error("BudgetExceeded", "generator did not finish within " + std::to_string(budget) +
                                    " events") {}
};

class GeneratorFault : public Error {
 public:
  explicit GeneratorFault(const std::string& message) : Error("GeneratorFault", message) {}
};

/// Raised by retrievers that cannot answer; the engine recovers from it.
class RetrievalFailed : public Error {
 public:
  explicit RetrievalFailed(const std::string& message) : Error("RetrievalFailed", message) {}
};

class Cancelled : public Error {
 public:
  Cancelled() : Error("Cancelled", "generation was cancelled") {}
};

class ConstraintViolation : public Error {
 public:
  ConstraintViolation(const std::string& message, std::vector<std::string> offending)
      : Error("ConstraintViolation", message), offending_(std::move(offending)) {}
  const std::vector<std::string>& offending() const noexcept { return offending_; }

 private:
  std::vector<std::string> offending_;
};

class NoTriggerClause : public Error {
 public:
  explicit NoTriggerClause(const std::string& requirement)
      : Error("NoTriggerClause", "no trigger cue found in requirement: " + requirement) {}
};

class UnresolvedTable : public Error {
 public:
  explicit UnresolvedTable(const std::string& query)
      : Error("UnresolvedTable", "no table choice scored above the floor for: " + query) {}
};

enum class SubTask { kCreateFlow, kPopulateInputs };

std::string_view sub_task_name(SubTask task);

// --- events ------------------------------------------------------------------

struct Fragment {
  std::string text;
  friend bool operator==(const Fragment&, const Fragment&) = default;
};

struct ChoicesRequest {
  ArtifactKind kind = ArtifactKind::kStepName;
  std::string query;
  std::string scope;
  friend bool operator==(const ChoicesRequest&, const ChoicesRequest&) = default;
};

struct Done {
  friend bool operator==(const Done&, const Done&) = default;
};

using GenerationEvent = std::variant<Fragment, ChoicesRequest, Done>;

/// One transcript line: generator events plus the engine's injections.
using TranscriptEntry = std::variant<Fragment, ChoicesRequest, RankedChoices, Done>;

std::string transcript_to_jsonl(const std::vector<TranscriptEntry>& transcript);
std::vector<TranscriptEntry> transcript_from_jsonl(std::string_view jsonl);

/// Every request is answered by the next entry, and nothing follows Done.
bool transcript_well_bracketed(const std::vector<TranscriptEntry>& transcript);

// --- prompt state ------------------------------------------------------------

struct PromptState {
  SubTask sub_task = SubTask::kCreateFlow;
  std::string requirement;
  /// POPULATE_INPUTS only: the outline document.
  std::string outline;
  /// POPULATE_INPUTS only: workflow document holding the trigger and the
  /// steps ordered before the target (inputs empty in outline-only mode).
  std::string context;
  int target_order = 0;
  std::vector<RankedChoices> injected_choices;
  /// Length of `emitted` at the time each choice list was injected.
  std::vector<std::size_t> injection_offsets;
  std::string emitted;
};

/// Builds the POPULATE_INPUTS state for one step of `partial`. With
/// `outline_only` the earlier steps carry no inputs.
PromptState populate_state(const Workflow& partial, const Outline& outline, int target_order,
                           bool outline_only);

/// Target row of a POPULATE_INPUTS state.
OutlineRow target_row(const PromptState& state);

/// Numbered, payload-only rendering of a choice list.
std::string render_choices(const RankedChoices& choices);

/// Prompt text for raw-text generators: requirement, context and the emitted
/// text with each injected choice list rendered after a `choices:` sentinel.
std::string render_prompt(const PromptState& state);

// --- generators --------------------------------------------------------------

/// Produces the next event from the prompt state alone.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string name() const = 0;
  virtual GenerationEvent next(const PromptState& state) const = 0;
};

/// Fragments and requests in emission order.
using ScriptOp = std::variant<Fragment, ChoicesRequest>;

/// Event a scripted generator emits next given what the state already holds.
/// Fragments already present in `emitted` and requests already answered are
/// skipped.
GenerationEvent next_from_script(const std::vector<ScriptOp>& ops, const PromptState& state,
                                 bool complete);

/// Replays the generator side of a recorded transcript. A transcript with
/// several Done-terminated segments is a whole run: segment 0 answers
/// createFlow and segment n populates step n.
class ScriptedGenerator : public Generator {
 public:
  explicit ScriptedGenerator(std::vector<TranscriptEntry> transcript);
  std::string name() const override { return "scripted"; }
  GenerationEvent next(const PromptState& state) const override;

 private:
  std::vector<std::vector<ScriptOp>> segments_;
};

/// Raw text continuation source (an FM endpoint or a test double).
class TextCompletion {
 public:
  virtual ~TextCompletion() = default;
  virtual std::string complete(const std::string& prompt) const = 0;
};

/// Adapts raw text containing the literal `choices:` sentinel to events.
/// The request kind comes from the YAML key preceding the sentinel and the
/// query from the latest annotation.
class SentinelTextGenerator : public Generator {
 public:
  explicit SentinelTextGenerator(std::shared_ptr<const TextCompletion> completion);
  std::string name() const override { return "text"; }
  GenerationEvent next(const PromptState& state) const override;

 private:
  std::shared_ptr<const TextCompletion> completion_;
};

/// POSTs {"prompt": ...} to an HTTP endpoint and reads {"text": ...}.
class HttpCompletion : public TextCompletion {
 public:
  HttpCompletion(std::string base_url, std::string path);
  std::string complete(const std::string& prompt) const override;

 private:
  std::string base_url_;
  std::string path_;
};

/// Sentinel kind inferred from the key text preceding a `choices:` marker.
std::optional<ChoicesRequest> infer_sentinel_request(SubTask task, std::string_view emitted,
                                                     std::string_view fallback_query);

struct GeneratorConfig {
  std::shared_ptr<const EnvironmentCatalog> catalog;
  std::string transcript_path;  // scripted
  std::string endpoint;         // http, e.g. "http://127.0.0.1:8090/complete"
};

using GeneratorFactory = std::function<std::shared_ptr<const Generator>(const GeneratorConfig&)>;

/// Name-keyed generator plug-ins; ships with reference, scripted and http.
class GeneratorRegistry {
 public:
  static GeneratorRegistry& instance();
  void add(const std::string& name, GeneratorFactory factory);
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  std::shared_ptr<const Generator> create(const std::string& name, const GeneratorConfig& config) const;

 private:
  GeneratorRegistry();
  std::map<std::string, GeneratorFactory> factories_;
};

// --- engine ------------------------------------------------------------------

struct TeacherForcingConfig {
  bool enabled = false;
  /// Gold payload per request site, in request order.
  std::vector<std::string> gold;
};

/// Puts `gold` into `choices` when missing: appended when there is room,
/// otherwise it replaces the rank-k entry. Sets `forced`.
void force_gold(RankedChoices& choices, const std::string& gold);

struct RunOptions {
  int k = kDefaultChoices;
  int budget = 256;
  TeacherForcingConfig teacher_forcing;
  bool context_expansion = false;
  ArtifactFilter filter;
  const CatalogVersion* require_fresh = nullptr;
  std::stop_token stop;
  /// Called after each choice injection (for streaming choices_offered).
  std::function<void(const RankedChoices&)> on_choices;
};

struct SubTaskResult {
  SubTask sub_task = SubTask::kCreateFlow;
  std::string text;
  std::vector<TranscriptEntry> transcript;
  int retrieval_call_count = 0;
  int retrieval_failures = 0;
  /// Injected lists, one per request site.
  std::vector<RankedChoices> sites;
  /// Constraint repairs applied, as "old -> new" descriptions.
  std::vector<std::string> repairs;
};

SubTaskResult run_sub_task(const Generator& generator, PromptState state, const Retriever& retriever,
                           const RunOptions& options = {});

// --- constrained output ------------------------------------------------------

struct ConstraintOptions {
  bool repair_mode = true;
  /// Optional fallback used when no request site covers a field.
  const Retriever* retriever = nullptr;
};

/// Checks every artifact-valued field of the output against the choice list
/// of its request site (or the catalog when no site covers it). `state` is
/// the prompt the result was produced from.
SubTaskResult constrain_output(const SubTaskResult& result, const PromptState& state,
                               const EnvironmentCatalog& catalog,
                               const ConstraintOptions& options = {});

/// Workflow view of a sub-task output: the outline for CREATE_FLOW, or the
/// context plus the populated target step for POPULATE_INPUTS.
Workflow output_workflow(const SubTaskResult& result, const PromptState& state);

// --- reference generator -----------------------------------------------------

/// Callback answering one choices request during a reference run.
using ChoicesOracle = std::function<RankedChoices(const ChoicesRequest&)>;

struct ReferenceTrace {
  std::vector<ScriptOp> ops;
};

/// Rule-based createFlow: clause segmentation, trigger cues, one STEP_NAME
/// request per clause. Throws NoTriggerClause.
std::string reference_create_flow(const std::string& requirement, const ChoicesOracle& oracle,
                                  const EnvironmentCatalog& steps, ReferenceTrace* trace = nullptr);

/// Rule-based populateInputs over the target step's declared inputs.
/// Throws UnresolvedTable when a table request has no choice above the floor.
std::string reference_populate_inputs(const PromptState& state, const ChoicesOracle& oracle,
                                      const EnvironmentCatalog& steps,
                                      ReferenceTrace* trace = nullptr);

inline constexpr double kTableFloor = 0.05;

/// Deterministic stand-in for a fine-tuned FM. Consults step definitions
/// only; tables, columns and values come from injected choices.
class ReferenceGenerator : public Generator {
 public:
  explicit ReferenceGenerator(std::shared_ptr<const EnvironmentCatalog> catalog);
  std::string name() const override { return "reference"; }
  GenerationEvent next(const PromptState& state) const override;

 private:
  std::shared_ptr<const EnvironmentCatalog> catalog_;
};

}  // namespace flowforge
