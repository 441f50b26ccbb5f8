// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/generation.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "flowforge/json_io.hpp"

#include "flowforge/validate.hpp"

namespace flowforge {

namespace {

using json = nlohmann::json;

ArtifactKind kind_from(const json& j) {
  const auto kind = parse_artifact_kind(j.at("kind").get<std::string>());
  if (!kind) throw SyntaxError("unknown artifact kind " + j.at("kind").dump(), 0, 0);
  return *kind;
}

// Key of the last (possibly unfinished) line, e.g. "name" for `    name: `.
std::string trailing_key(std::string_view text) {
  const auto nl = text.rfind('\n');
  std::string_view line = nl == std::string_view::npos ? text : text.substr(nl + 1);
  const auto colon = line.rfind(':');
  if (colon == std::string_view::npos) return {};
  line = line.substr(0, colon);
  const auto start = line.find_first_not_of(" -");
  return start == std::string_view::npos ? std::string() : std::string(line.substr(start));
}

// Value of the latest `annotation: "..."` line, unquoted.
std::optional<std::string> latest_annotation(std::string_view text) {
  const std::string key = "annotation: \"";
  const auto pos = text.rfind(key);
  if (pos == std::string_view::npos) return std::nullopt;
  std::string out;
  for (std::size_t i = pos + key.size(); i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      out.push_back(text[++i]);
      continue;
    }
    if (text[i] == '"' || text[i] == '\n') break;
    out.push_back(text[i]);
  }
  return out;
}

bool site_covers(const RankedChoices& site, const ArtifactField& field) {
  if (site.kind != field.kind) return false;
  switch (field.kind) {
    case ArtifactKind::kStepName:
    case ArtifactKind::kTableName: return true;
    case ArtifactKind::kColumnName: return site.scope == field.scope;
    case ArtifactKind::kColumnValue:
      return site.scope == field.scope || site.scope == field.scope.substr(0, field.scope.find('.'));
  }
  return false;
}

Step* mutable_step(Workflow& workflow, int order) {
  for (auto& step : workflow.steps) {
    if (step.order == order) return &step;
  }
  return nullptr;
}

StepInputValue* mutable_input(Step& step, const std::string& name) {
  for (auto& input : step.inputs) {
    if (input.name == name) return &input;
  }
  return nullptr;
}

void replace_in_text(TextValue& text, const std::string& from, const std::string& to) {
  TextValue rebuilt;
  for (const auto& seg : text.segments) {
    if (const auto* ref = std::get_if<OutputRef>(&seg)) {
      auto parts = ref->segments();
      for (std::size_t i = 1; i < parts.size(); ++i) {
        if (parts[i] == from) parts[i] = to;
      }
      OutputRef updated{ref->step, parts.front()};
      for (std::size_t i = 1; i < parts.size(); ++i) updated.path += "." + parts[i];
      rebuilt.append(updated);
    } else {
      rebuilt.append(seg);
    }
  }
  text = std::move(rebuilt);
}

void replace_in_condition(ConditionExpr& cond, const ArtifactField& field, const std::string& to) {
  for (auto& c : cond.conjuncts) {
    if (field.kind == ArtifactKind::kColumnName && !field.from_path && c.column == field.value) {
      c.column = to;
    } else if (field.kind == ArtifactKind::kColumnValue && c.operand && c.operand->is_literal() &&
               c.operand->literal_text() == field.value &&
               field.scope.substr(field.scope.find('.') + 1) == c.column) {
      c.operand = TextValue::literal(to);
    } else if (field.from_path && c.operand) {
      replace_in_text(*c.operand, field.value, to);
    }
  }
}

void replace_artifact(Workflow& workflow, const ArtifactField& field, const std::string& to) {
  if (field.step_order == 0) {
    if (field.kind == ArtifactKind::kTableName) {
      workflow.trigger.table = to;
    } else if (workflow.trigger.condition) {
      replace_in_condition(*workflow.trigger.condition, field, to);
    }
    return;
  }
  Step* step = mutable_step(workflow, field.step_order);
  if (step == nullptr) return;
  if (field.kind == ArtifactKind::kStepName) {
    step->name = to;
    return;
  }
  StepInputValue* input = mutable_input(*step, field.input);
  if (input == nullptr) return;
  if (auto* cond = std::get_if<ConditionExpr>(&input->value)) {
    replace_in_condition(*cond, field, to);
    return;
  }
  auto& text = std::get<TextValue>(input->value);
  if (field.from_path) {
    replace_in_text(text, field.value, to);
  } else if (text.is_literal() || text.empty()) {
    text = TextValue::literal(to);
  }
}

std::string describe(const ArtifactField& field) {
  Location loc{field.step_order, field.input};
  return std::string(artifact_kind_name(field.kind)) + " '" + field.value + "' at " + loc.to_string();
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

}  // namespace

std::string_view sub_task_name(SubTask task) {
  return task == SubTask::kCreateFlow ? "CREATE_FLOW" : "POPULATE_INPUTS";
}

// --- transcripts -------------------------------------------------------------

std::string transcript_to_jsonl(const std::vector<TranscriptEntry>& transcript) {
  std::string out;
  for (const auto& entry : transcript) {
    json line;
    if (const auto* f = std::get_if<Fragment>(&entry)) {
      line = {{"event", "fragment"}, {"text", f->text}};
    } else if (const auto* r = std::get_if<ChoicesRequest>(&entry)) {
      line = {{"event", "choices_request"},
              {"kind", std::string(artifact_kind_name(r->kind))},
              {"query", r->query},
              {"scope", r->scope}};
    } else if (const auto* c = std::get_if<RankedChoices>(&entry)) {
      line = choices_to_json(*c);
      line["event"] = "choices";
    } else {
      line = {{"event", "done"}};
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<TranscriptEntry> transcript_from_jsonl(std::string_view jsonl) {
  std::vector<TranscriptEntry> transcript;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SyntaxError(std::string("bad transcript record: ") + e.what(), line_no, 1);
    }
    const std::string event = j.value("event", "");
    if (event == "fragment") {
      transcript.emplace_back(Fragment{j.at("text").get<std::string>()});
    } else if (event == "choices_request") {
      transcript.emplace_back(
          ChoicesRequest{kind_from(j), j.at("query").get<std::string>(), j.value("scope", "")});
    } else if (event == "choices") {
      RankedChoices rc = choices_from_json(j);
      transcript.emplace_back(std::move(rc));
    } else if (event == "done") {
      transcript.emplace_back(Done{});
    } else {
      throw SyntaxError("unknown transcript event '" + event + "'", line_no, 1);
    }
  }
  return transcript;
}

bool transcript_well_bracketed(const std::vector<TranscriptEntry>& transcript) {
  bool awaiting = false;
  bool done = false;
  for (const auto& entry : transcript) {
    if (done) return false;
    if (std::holds_alternative<RankedChoices>(entry)) {
      if (!awaiting) return false;
      awaiting = false;
      continue;
    }
    if (awaiting) return false;
    if (std::holds_alternative<ChoicesRequest>(entry)) awaiting = true;
    if (std::holds_alternative<Done>(entry)) done = true;
  }
  return !awaiting;
}

// --- prompt state ------------------------------------------------------------

PromptState populate_state(const Workflow& partial, const Outline& outline, int target_order,
                           bool outline_only) {
  PromptState state;
  state.sub_task = SubTask::kPopulateInputs;
  state.requirement = partial.requirement;
  state.outline = serialize_outline(outline);
  state.target_order = target_order;
  Workflow context;
  context.requirement = partial.requirement;
  context.trigger = outline.trigger;
  for (const auto& row : outline.rows) {
    if (row.order >= target_order) break;
    Step step{row.name, row.annotation, row.order, row.block, {}};
    if (!outline_only) {
      if (const Step* populated = partial.find_step(row.order)) step.inputs = populated->inputs;
    }
    context.steps.push_back(std::move(step));
  }
  state.context = serialize_workflow(context);
  return state;
}

OutlineRow target_row(const PromptState& state) {
  const Outline outline = parse_outline(state.outline);
  for (const auto& row : outline.rows) {
    if (row.order == state.target_order) return row;
  }
  throw GeneratorFault("outline has no step with order " + std::to_string(state.target_order));
}

std::string render_choices(const RankedChoices& choices) {
  std::string out;
  for (std::size_t i = 0; i < choices.choices.size(); ++i) {
    out += std::to_string(i + 1) + ". " + choices.choices[i].payload + "\n";
  }
  return out;
}

std::string render_prompt(const PromptState& state) {
  std::string out = "task: " + std::string(sub_task_name(state.sub_task)) + "\n";
  out += "requirement: " + state.requirement + "\n";
  if (state.sub_task == SubTask::kPopulateInputs) {
    out += "outline:\n" + state.outline;
    out += "context:\n" + state.context;
    out += "target: " + std::to_string(state.target_order) + "\n";
  }
  out += "output:\n";
  std::size_t pos = 0;
  for (std::size_t i = 0; i < state.injected_choices.size(); ++i) {
    const std::size_t offset = std::min(state.injection_offsets.at(i), state.emitted.size());
    out += state.emitted.substr(pos, offset - pos);
    out += "choices:\n" + render_choices(state.injected_choices[i]);
    pos = offset;
  }
  out += state.emitted.substr(pos);
  return out;
}

// --- scripted replay ---------------------------------------------------------

GenerationEvent next_from_script(const std::vector<ScriptOp>& ops, const PromptState& state,
                                 bool complete) {
  std::size_t pos = 0;
  std::size_t answered = 0;
  const std::string& emitted = state.emitted;
  for (const auto& op : ops) {
    if (const auto* f = std::get_if<Fragment>(&op)) {
      const std::size_t covered = std::min(f->text.size(), emitted.size() - pos);
      if (emitted.compare(pos, covered, f->text, 0, covered) != 0) {
        throw GeneratorFault("emitted text diverged from the script");
      }
      pos += covered;
      if (covered < f->text.size()) return Fragment{f->text.substr(covered)};
      continue;
    }
    if (answered < state.injected_choices.size()) {
      ++answered;
      continue;
    }
    return std::get<ChoicesRequest>(op);
  }
  if (pos != emitted.size()) throw GeneratorFault("emitted text runs past the script");
  if (!complete) throw GeneratorFault("script ended before the generator finished");
  return Done{};
}

ScriptedGenerator::ScriptedGenerator(std::vector<TranscriptEntry> transcript) {
  segments_.emplace_back();
  for (auto& entry : transcript) {
    if (auto* f = std::get_if<Fragment>(&entry)) {
      segments_.back().emplace_back(std::move(*f));
    } else if (auto* r = std::get_if<ChoicesRequest>(&entry)) {
      segments_.back().emplace_back(std::move(*r));
    } else if (std::holds_alternative<Done>(entry)) {
      segments_.emplace_back();
    }
  }
  if (segments_.size() > 1 && segments_.back().empty()) segments_.pop_back();
}

GenerationEvent ScriptedGenerator::next(const PromptState& state) const {
  if (segments_.size() == 1) return next_from_script(segments_.front(), state, true);
  const std::size_t segment =
      state.sub_task == SubTask::kCreateFlow ? 0 : static_cast<std::size_t>(std::max(state.target_order, 0));
  if (segment >= segments_.size()) {
    throw GeneratorFault("transcript has no segment for " + std::string(sub_task_name(state.sub_task)) +
                         (segment > 0 ? " of step " + std::to_string(segment) : std::string()));
  }
  return next_from_script(segments_[segment], state, true);
}

// --- raw text adapter --------------------------------------------------------

std::optional<ChoicesRequest> infer_sentinel_request(SubTask task, std::string_view emitted,
                                                     std::string_view fallback_query) {
  const std::string key = trailing_key(emitted);
  ChoicesRequest request;
  if (task == SubTask::kCreateFlow) {
    if (key == "name") {
      request.kind = ArtifactKind::kStepName;
    } else if (key == "table") {
      request.kind = ArtifactKind::kTableName;
    } else {
      return std::nullopt;
    }
  } else {
    if (key == "value") {
      request.kind = ArtifactKind::kTableName;
    } else if (key == "condition") {
      request.kind = ArtifactKind::kColumnName;
    } else {
      return std::nullopt;
    }
  }
  const auto annotation = task == SubTask::kCreateFlow && request.kind == ArtifactKind::kStepName
                              ? latest_annotation(emitted)
                              : std::nullopt;
  request.query = annotation ? *annotation : std::string(fallback_query);
  if (request.query.empty()) return std::nullopt;
  return request;
}

SentinelTextGenerator::SentinelTextGenerator(std::shared_ptr<const TextCompletion> completion)
    : completion_(std::move(completion)) {}

GenerationEvent SentinelTextGenerator::next(const PromptState& state) const {
  static constexpr std::string_view kSentinel = "choices:";
  const std::string continuation = completion_->complete(render_prompt(state));
  if (continuation.empty()) return Done{};
  const auto pos = continuation.find(kSentinel);
  if (pos == std::string::npos) return Fragment{continuation};
  if (pos > 0) return Fragment{continuation.substr(0, pos)};

  std::string fallback = state.requirement;
  if (state.sub_task == SubTask::kPopulateInputs) fallback = target_row(state).annotation;
  auto request = infer_sentinel_request(state.sub_task, state.emitted, fallback);
  if (!request) throw GeneratorFault("cannot infer the request kind for a choices sentinel");
  if (request->kind == ArtifactKind::kColumnName) {
    for (auto it = state.injected_choices.rbegin(); it != state.injected_choices.rend(); ++it) {
      if (it->kind == ArtifactKind::kTableName && !it->choices.empty()) {
        request->scope = it->choices.front().payload;
        break;
      }
    }
  }
  return *request;
}

HttpCompletion::HttpCompletion(std::string base_url, std::string path)
    : base_url_(std::move(base_url)), path_(std::move(path)) {}

std::string HttpCompletion::complete(const std::string& prompt) const {
  httplib::Client client(base_url_);
  client.set_read_timeout(30, 0);
  const json body = {{"prompt", prompt}};
  const auto response = client.Post(path_, body.dump(), "application/json");
  if (!response) throw GeneratorFault("completion endpoint " + base_url_ + path_ + " unreachable");
  if (response->status != 200) {
    throw GeneratorFault("completion endpoint returned HTTP " + std::to_string(response->status));
  }
  try {
    return json::parse(response->body).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw GeneratorFault(std::string("bad completion response: ") + e.what());
  }
}

// --- registry ----------------------------------------------------------------

GeneratorRegistry::GeneratorRegistry() {
  factories_["reference"] = [](const GeneratorConfig& config) -> std::shared_ptr<const Generator> {
    if (!config.catalog) throw std::invalid_argument("reference generator needs a catalog");
    return std::make_shared<ReferenceGenerator>(config.catalog);
  };
  factories_["scripted"] = [](const GeneratorConfig& config) -> std::shared_ptr<const Generator> {
    std::ifstream in(config.transcript_path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read transcript " + config.transcript_path);
    std::ostringstream text;
    text << in.rdbuf();
    return std::make_shared<ScriptedGenerator>(transcript_from_jsonl(text.str()));
  };
  factories_["http"] = [](const GeneratorConfig& config) -> std::shared_ptr<const Generator> {
    if (config.endpoint.empty()) throw std::invalid_argument("http generator needs an endpoint");
    auto [base, path] = split_url(config.endpoint);
    return std::make_shared<SentinelTextGenerator>(std::make_shared<HttpCompletion>(base, path));
  };
}

GeneratorRegistry& GeneratorRegistry::instance() {
  static GeneratorRegistry registry;
  return registry;
}

void GeneratorRegistry::add(const std::string& name, GeneratorFactory factory) {
  factories_[name] = std::move(factory);
}

bool GeneratorRegistry::contains(const std::string& name) const { return factories_.count(name) > 0; }

std::vector<std::string> GeneratorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, factory] : factories_) out.push_back(name);
  return out;
}

std::shared_ptr<const Generator> GeneratorRegistry::create(const std::string& name,
                                                           const GeneratorConfig& config) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) throw std::invalid_argument("unknown generator '" + name + "'");
  return it->second(config);
}

// --- engine ------------------------------------------------------------------

void force_gold(RankedChoices& choices, const std::string& gold) {
  if (gold.empty() || choices.contains(gold)) return;
  const int k = std::max(choices.k, 1);
  if (static_cast<int>(choices.choices.size()) >= k) {
    choices.choices.resize(static_cast<std::size_t>(k));
    Choice& last = choices.choices.back();
    last = Choice{gold, last.score, ""};
  } else {
    const double score = choices.choices.empty() ? 0.0 : choices.choices.back().score;
    choices.choices.push_back({gold, score, ""});
  }
  choices.forced = true;
}

SubTaskResult run_sub_task(const Generator& generator, PromptState state, const Retriever& retriever,
                           const RunOptions& options) {
  if (options.budget <= 0) throw std::invalid_argument("budget must be positive");
  SubTaskResult result;
  result.sub_task = state.sub_task;
  std::size_t site = 0;
  for (int events = 0;; ++events) {
    if (options.stop.stop_requested()) throw Cancelled();
    if (events >= options.budget) throw BudgetExceeded(options.budget);
    GenerationEvent event;
    try {
      event = generator.next(state);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw GeneratorFault(generator.name() + ": " + e.what());
    }

    if (auto* fragment = std::get_if<Fragment>(&event)) {
      if (fragment->text.empty()) throw GeneratorFault(generator.name() + " emitted an empty fragment");
      state.emitted += fragment->text;
      result.transcript.emplace_back(std::move(*fragment));
      continue;
    }
    if (std::holds_alternative<Done>(event)) {
      result.transcript.emplace_back(Done{});
      break;
    }

    auto& request = std::get<ChoicesRequest>(event);
    if (request.query.empty()) throw GeneratorFault(generator.name() + " requested choices without a query");
    result.transcript.emplace_back(request);
    ++result.retrieval_call_count;

    QueryOptions query;
    query.k = options.k;
    query.scope = request.scope;
    query.filter = options.filter;
    query.require_fresh = options.require_fresh;
    const std::string text =
        compose_query(request.kind, request.query, state.requirement, options.context_expansion);
    RankedChoices injected;
    try {
      injected = retriever.query(request.kind, text, query);
    } catch (const RetrievalFailed&) {
      ++result.retrieval_failures;
      injected = RankedChoices{text, request.kind, request.scope, options.k, {}, false};
    }
    const auto& tf = options.teacher_forcing;
    if (tf.enabled && site < tf.gold.size()) force_gold(injected, tf.gold[site]);
    ++site;

    state.injected_choices.push_back(injected);
    state.injection_offsets.push_back(state.emitted.size());
    result.sites.push_back(injected);
    if (options.on_choices) options.on_choices(injected);
    result.transcript.emplace_back(std::move(injected));
  }
  result.text = std::move(state.emitted);
  return result;
}

// --- constrained output ------------------------------------------------------

Workflow output_workflow(const SubTaskResult& result, const PromptState& state) {
  if (state.sub_task == SubTask::kCreateFlow) {
    return workflow_from_outline(parse_outline(result.text), state.requirement);
  }
  Workflow workflow = parse_workflow(state.context);
  const OutlineRow row = target_row(state);
  workflow.steps.push_back({row.name, row.annotation, row.order, row.block, parse_input_list(result.text)});
  return workflow;
}

SubTaskResult constrain_output(const SubTaskResult& result, const PromptState& state,
                               const EnvironmentCatalog& catalog, const ConstraintOptions& options) {
  SubTaskResult out = result;
  Workflow workflow = output_workflow(result, state);
  const bool populate = state.sub_task == SubTask::kPopulateInputs;
  auto in_target = [&](const ArtifactField& f) { return !populate || f.step_order == state.target_order; };

  for (int pass = 0; pass < 8; ++pass) {
    std::vector<ArtifactField> bad;
    for (const auto& field : collect_artifact_fields(workflow, catalog)) {
      if (!in_target(field)) continue;
      bool covered = false;
      bool member = false;
      for (const auto& site : result.sites) {
        if (!site_covers(site, field)) continue;
        covered = true;
        member = member || site.contains(field.value);
      }
      if (!(covered ? member : artifact_exists(field, catalog))) bad.push_back(field);
    }
    if (bad.empty()) break;
    if (!options.repair_mode) {
      std::vector<std::string> offending;
      for (const auto& f : bad) offending.push_back(describe(f));
      std::string message = "output uses names outside the offered choices:";
      for (const auto& o : offending) message += " " + o + ";";
      throw ConstraintViolation(message, offending);
    }
    // Repair the most fundamental kind first; dependent scopes are
    // re-resolved on the next pass.
    const ArtifactKind kind =
        std::min_element(bad.begin(), bad.end(), [](const auto& a, const auto& b) { return a.kind < b.kind; })->kind;
    bool progressed = false;
    for (const auto& field : bad) {
      if (field.kind != kind) continue;
      std::optional<std::string> replacement;
      for (const auto& site : result.sites) {
        if (site_covers(site, field) && !site.choices.empty()) {
          replacement = site.choices.front().payload;
          break;
        }
      }
      if (!replacement && options.retriever != nullptr && !field.value.empty()) {
        QueryOptions q;
        q.scope = field.scope;
        const auto ranked = options.retriever->query(field.kind, field.value, q);
        if (!ranked.choices.empty()) replacement = ranked.choices.front().payload;
      }
      if (!replacement) {
        try {
          const auto docs = list_artifacts(catalog, field.kind,
                                           field.scope.empty() ? std::nullopt
                                                               : std::optional<std::string>(field.scope));
          if (!docs.empty()) replacement = docs.front().payload;
        } catch (const UnknownTable&) {
        }
      }
      if (!replacement || *replacement == field.value) continue;
      replace_artifact(workflow, field, *replacement);
      out.repairs.push_back(describe(field) + " -> '" + *replacement + "'");
      progressed = true;
    }
    if (!progressed) break;
  }
  if (populate) {
    const Step* step = workflow.find_step(state.target_order);
    out.text = serialize_input_list(step ? step->inputs : std::vector<StepInputValue>{});
  } else {
    out.text = serialize_outline(extract_outline(workflow));
  }
  return out;
}

}  // namespace flowforge
