// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "flowforge/generation.hpp"
#include "flowforge/validate.hpp"

namespace flowforge {

namespace {

using WordSet = std::set<std::string, std::less<>>;

const WordSet kArticles = {"the", "a", "an", "all", "any", "every", "each", "new", "its", "their"};
const WordSet kBoundary = {"that", "which", "who",    "whose",  "where",     "with", "without",
                           "having", "assigned", "opened", "created", "requested", "of",   "for",
                           "from", "by",    "in",     "on",     "to",        "whom"};
const WordSet kRelationPrepositions = {"to", "of", "for", "from", "by"};
const WordSet kClauseLeads = {"that", "which", "who", "whose", "where", "with", "having"};
const WordSet kNegations = {"not", "no", "without", "never", "unassigned", "empty", "missing"};
const WordSet kCreatedWords = {"created", "opened", "submitted", "raised", "logged", "inserted"};
const WordSet kUpdatedWords = {"updated", "changed", "modified", "changes", "updates"};
const WordSet kEventCues = {"when", "whenever", "if", "once", "after"};
const WordSet kAuxiliaries = {"is", "are", "was", "were", "gets", "get", "got", "has", "have", "been", "be"};
const std::vector<std::string> kLeadingVerbs = {"look up", "search for", "lookup", "find", "get",
                                                "fetch",   "retrieve",   "query",  "create", "open",
                                                "add",     "make",       "raise",  "file"};
const std::vector<std::pair<std::string, std::string>> kSchedules = {
    {"every day", "daily"},      {"each day", "daily"},       {"every morning", "daily"},
    {"every night", "daily"},    {"daily", "daily"},          {"every hour", "hourly"},
    {"hourly", "hourly"},        {"every week", "weekly"},    {"weekly", "weekly"},
    {"every month", "monthly"},  {"monthly", "monthly"}};
// Longest first so ", and then " wins over ", ".
const std::vector<std::string> kSeparators = {", and then ", " and then ", ", then ", ", and ",
                                              " then ",      " and ",      ", ",      "; "};

struct Word {
  std::string text;
  std::string lower;
};

using Words = std::vector<Word>;

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Words split_words(std::string_view text) {
  Words words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view token = text.substr(i, j - i);
    auto punct = [](char c) { return std::string_view(",.;:!?()\"'").find(c) != std::string_view::npos; };
    while (!token.empty() && punct(token.front())) token.remove_prefix(1);
    while (!token.empty() && punct(token.back())) token.remove_suffix(1);
    if (!token.empty()) words.push_back({std::string(token), lowercase(token)});
    i = j;
  }
  return words;
}

std::string join(const Words& words, std::size_t from = 0, std::size_t to = std::string::npos) {
  std::string out;
  to = std::min(to, words.size());
  for (std::size_t i = from; i < to; ++i) {
    if (!out.empty()) out += ' ';
    out += words[i].text;
  }
  return out;
}

Words slice(const Words& words, std::size_t from, std::size_t to = std::string::npos) {
  to = std::min(to, words.size());
  return from >= to ? Words{} : Words(words.begin() + static_cast<std::ptrdiff_t>(from),
                                      words.begin() + static_cast<std::ptrdiff_t>(to));
}

bool same_word(std::string_view a, std::string_view b) {
  if (a == b) return true;
  if (a.size() == b.size() + 1 && a.back() == 's' && a.starts_with(b)) return true;
  return b.size() == a.size() + 1 && b.back() == 's' && b.starts_with(a);
}

bool contains_any(const Words& words, const WordSet& set) {
  return std::any_of(words.begin(), words.end(), [&](const Word& w) { return set.count(w.lower) > 0; });
}

// Position of a lowercase multi-word phrase inside `words`, if any.
std::optional<std::size_t> find_phrase(const Words& words, std::string_view phrase) {
  const Words needle = split_words(phrase);
  if (needle.empty() || needle.size() > words.size()) return std::nullopt;
  for (std::size_t i = 0; i + needle.size() <= words.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size() && match; ++j) match = words[i + j].lower == needle[j].lower;
    if (match) return i;
  }
  return std::nullopt;
}

std::string trim_clause(std::string clause) {
  const auto strip = [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '.' || c == ';'; };
  while (!clause.empty() && strip(clause.front())) clause.erase(clause.begin());
  while (!clause.empty() && strip(clause.back())) clause.pop_back();
  for (const std::string lead : {"then ", "and "}) {
    if (lowercase(clause.substr(0, lead.size())) == lead) clause = clause.substr(lead.size());
  }
  return clause;
}

std::vector<std::string> segment_clauses(const std::string& requirement) {
  std::vector<std::string> clauses;
  const std::string lower = lowercase(requirement);
  std::string current;
  std::size_t i = 0;
  while (i < requirement.size()) {
    bool split = false;
    for (const auto& sep : kSeparators) {
      if (lower.compare(i, sep.size(), sep) == 0) {
        clauses.push_back(current);
        current.clear();
        i += sep.size();
        split = true;
        break;
      }
    }
    if (split) continue;
    const char c = requirement[i];
    if ((c == '.' || c == ';') && (i + 1 == requirement.size() || requirement[i + 1] == ' ')) {
      clauses.push_back(current);
      current.clear();
      ++i;
      continue;
    }
    current.push_back(c);
    ++i;
  }
  clauses.push_back(current);
  std::vector<std::string> out;
  for (auto& clause : clauses) {
    clause = trim_clause(clause);
    if (!clause.empty()) out.push_back(clause);
  }
  return out;
}

struct TriggerClause {
  std::optional<std::string> schedule;
  TriggerEvent event = TriggerEvent::kCreated;
  Words noun;                   // record triggers: words naming the table and condition
  std::string remainder;        // scheduled triggers: text left after the schedule cue
};

std::optional<TriggerClause> detect_trigger(const std::string& clause) {
  const Words words = split_words(clause);
  for (const auto& [phrase, schedule] : kSchedules) {
    const auto at = find_phrase(words, phrase);
    if (!at) continue;
    TriggerClause t;
    t.schedule = schedule;
    t.event = TriggerEvent::kScheduled;
    Words rest = slice(words, 0, *at);
    const Words after = slice(words, *at + split_words(phrase).size());
    rest.insert(rest.end(), after.begin(), after.end());
    t.remainder = join(rest);
    return t;
  }
  if (words.empty() || !kEventCues.count(words.front().lower)) return std::nullopt;
  const bool created = contains_any(words, kCreatedWords);
  const bool updated = contains_any(words, kUpdatedWords);
  if (!created && !updated) return std::nullopt;
  TriggerClause t;
  t.event = created ? TriggerEvent::kCreated : TriggerEvent::kUpdated;
  for (std::size_t i = 1; i < words.size(); ++i) {
    const auto& w = words[i].lower;
    if (kCreatedWords.count(w) || kUpdatedWords.count(w) || kAuxiliaries.count(w) || kArticles.count(w)) {
      continue;
    }
    t.noun.push_back(words[i]);
  }
  return t;
}

class Plan {
 public:
  Plan(const ChoicesOracle& oracle, ReferenceTrace* trace) : oracle_(oracle), trace_(trace) {}

  void text(const std::string& piece) {
    out_ += piece;
    if (trace_ == nullptr) return;
    if (!trace_->ops.empty()) {
      if (auto* last = std::get_if<Fragment>(&trace_->ops.back())) {
        last->text += piece;
        return;
      }
    }
    trace_->ops.emplace_back(Fragment{piece});
  }

  RankedChoices ask(ArtifactKind kind, const std::string& query, const std::string& scope = {}) {
    ChoicesRequest request{kind, query, scope};
    if (trace_ != nullptr) trace_->ops.emplace_back(request);
    return oracle_(request);
  }

  std::string take() { return std::move(out_); }

 private:
  const ChoicesOracle& oracle_;
  ReferenceTrace* trace_;
  std::string out_;
};

std::optional<std::string> top_above_floor(const RankedChoices& choices) {
  if (choices.choices.empty() || choices.choices.front().score < kTableFloor) return std::nullopt;
  return choices.choices.front().payload;
}

// Column condition from free text: negation gives ISEMPTY, an enum value
// match gives EQ, anything else ISNOTEMPTY.
std::optional<Conjunct> phrase_condition(Plan& plan, const std::string& query, const Words& words,
                                         const std::string& table) {
  const RankedChoices columns = plan.ask(ArtifactKind::kColumnName, query, table);
  if (columns.choices.empty()) return std::nullopt;
  const std::string column = columns.choices.front().payload;
  if (contains_any(words, kNegations)) return Conjunct{column, ConditionOp::kIsEmpty, std::nullopt};
  const RankedChoices values = plan.ask(ArtifactKind::kColumnValue, query, table + "." + column);
  if (const auto value = top_above_floor(values)) {
    return Conjunct{column, ConditionOp::kEq, TextValue::literal(*value)};
  }
  return Conjunct{column, ConditionOp::kIsNotEmpty, std::nullopt};
}

Words strip_leading(Words words, const WordSet& set) {
  while (!words.empty() && set.count(words.front().lower)) words.erase(words.begin());
  return words;
}

struct HeadSplit {
  Words head;
  Words rest;
};

HeadSplit split_head(const std::string& annotation) {
  const Words words = split_words(annotation);
  std::size_t i = 0;
  for (const auto& verb : kLeadingVerbs) {
    const Words v = split_words(verb);
    if (v.size() > words.size()) continue;
    bool match = true;
    for (std::size_t j = 0; j < v.size() && match; ++j) match = words[j].lower == v[j].lower;
    if (match) {
      i = v.size();
      break;
    }
  }
  while (i < words.size() && kArticles.count(words[i].lower)) ++i;
  std::size_t j = i;
  while (j < words.size() && !kBoundary.count(words[j].lower)) ++j;
  return {slice(words, i, j), slice(words, j)};
}

// Reference-generator view of the populateInputs prompt.
class InputPlanner {
 public:
  InputPlanner(const PromptState& state, const EnvironmentCatalog& steps, Plan& plan)
      : steps_(steps), plan_(plan), context_(parse_workflow(state.context)), row_(target_row(state)) {}

  void run() {
    const StepDefinition* def = steps_.find_step(row_.name);
    if (def == nullptr || def->inputs.empty()) {
      plan_.text("inputs: []\n");
      return;
    }
    plan_.text("inputs:\n");
    for (const auto& decl : def->inputs) {
      plan_.text("  - name: " + quote_scalar(decl.name) + "\n");
      const ValueExpr value = populate(decl);
      if (const auto* cond = std::get_if<ConditionExpr>(&value)) {
        plan_.text("    condition: " + quote_scalar(encode_condition(*cond)) + "\n");
      } else {
        plan_.text("    value: " + quote_scalar(encode_text(std::get<TextValue>(value))) + "\n");
      }
    }
  }

 private:
  ValueExpr populate(const InputDecl& decl) {
    switch (decl.kind) {
      case ValueKind::kTable: {
        const HeadSplit split = split_head(row_.annotation);
        std::string query = join(split.head);
        if (query.empty()) query = row_.annotation;
        const auto table = top_above_floor(plan_.ask(ArtifactKind::kTableName, query));
        if (!table) throw UnresolvedTable(query);
        resolved_[decl.name] = *table;
        return TextValue::literal(*table);
      }
      case ValueKind::kReference: {
        OutputRef ref = pick_reference(row_.order, decl.accepts).value_or(fallback_ref());
        refs_[decl.name] = ref;
        return TextValue::reference(ref);
      }
      case ValueKind::kCondition:
      case ValueKind::kColumn: {
        const auto table = input_table(decl);
        if (!table) throw UnresolvedTable(row_.annotation);
        if (decl.kind == ValueKind::kColumn) {
          const RankedChoices columns = plan_.ask(ArtifactKind::kColumnName, row_.annotation, *table);
          return TextValue::literal(columns.choices.empty() ? std::string() : columns.choices.front().payload);
        }
        return condition_for(decl, *table);
      }
      case ValueKind::kText: return TextValue::literal(row_.annotation);
      case ValueKind::kEmailBody: {
        TextValue body = TextValue::literal(row_.annotation);
        if (const auto ref = body_reference()) {
          body.append(std::string(" "));
          body.append(*ref);
        }
        return body;
      }
    }
    return TextValue{};
  }

  std::optional<std::string> input_table(const InputDecl& decl) {
    const auto resolved = resolved_.find(decl.table_from);
    if (resolved != resolved_.end()) return resolved->second;
    const auto ref = refs_.find(decl.table_from);
    if (ref != refs_.end()) return table_of_ref(ref->second);
    return std::nullopt;
  }

  ConditionExpr condition_for(const InputDecl& decl, const std::string& table) {
    ConditionExpr cond;
    const StepDefinition* def = steps_.find_step(row_.name);
    const InputDecl* source = def ? def->find_input(decl.table_from) : nullptr;
    if (source != nullptr && source->kind == ValueKind::kTable) {
      const HeadSplit split = split_head(row_.annotation);
      if (auto relation = relation_condition(split.rest, table)) {
        cond.conjuncts.push_back(std::move(*relation));
        return cond;
      }
      Words phrase = strip_leading(split.rest, kClauseLeads);
      const std::string query = phrase.empty() ? row_.annotation : join(phrase);
      if (phrase.empty()) phrase = split_words(row_.annotation);
      if (auto c = phrase_condition(plan_, query, phrase, table)) cond.conjuncts.push_back(std::move(*c));
      return cond;
    }
    Words phrase = split_words(row_.annotation);
    if (!phrase.empty() && (phrase.front().lower == "if" || phrase.front().lower == "whether")) {
      phrase.erase(phrase.begin());
    }
    const std::string query = phrase.empty() ? row_.annotation : join(phrase);
    if (auto c = phrase_condition(plan_, query, phrase, table)) cond.conjuncts.push_back(std::move(*c));
    return cond;
  }

  // "<relation words> to|of|for|from|by <earlier record>" links the looked-up
  // table to an earlier output.
  std::optional<Conjunct> relation_condition(const Words& rest, const std::string& head_table) {
    std::optional<std::size_t> prep;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (kRelationPrepositions.count(rest[i].lower)) prep = i;
    }
    if (!prep) return std::nullopt;
    const Words object = strip_leading(slice(rest, *prep + 1), kArticles);
    if (object.empty()) return std::nullopt;
    const Words relation = strip_leading(slice(rest, 0, *prep), kClauseLeads);
    const auto object_table = top_above_floor(plan_.ask(ArtifactKind::kTableName, join(object)));
    if (!object_table) return std::nullopt;
    const auto record = latest_record_of(*object_table);
    if (!record) return std::nullopt;
    if (!relation.empty()) {
      const RankedChoices columns = plan_.ask(ArtifactKind::kColumnName, join(relation), *object_table);
      if (columns.choices.empty()) return std::nullopt;
      OutputRef ref = *record;
      ref.path += "." + columns.choices.front().payload;
      return Conjunct{"sys_id", ConditionOp::kEq, TextValue::reference(ref)};
    }
    const RankedChoices columns = plan_.ask(ArtifactKind::kColumnName, join(object), head_table);
    if (columns.choices.empty()) return std::nullopt;
    return Conjunct{columns.choices.front().payload, ConditionOp::kEq, TextValue::reference(*record)};
  }

  // Record-schema outputs ordered latest first, then the trigger record.
  std::vector<OutputRef> record_candidates() const {
    std::vector<OutputRef> refs;
    for (auto it = context_.steps.rbegin(); it != context_.steps.rend(); ++it) {
      if (it->order >= row_.order) continue;
      const StepDefinition* def = steps_.find_step(it->name);
      if (def == nullptr) continue;
      for (const auto& out : def->outputs) {
        if (out.schema == "record") refs.push_back({it->order, out.name});
      }
    }
    if (context_.trigger.event != TriggerEvent::kScheduled) refs.push_back({kTriggerStep, "record"});
    return refs;
  }

  std::optional<OutputRef> latest_record_of(const std::string& table) {
    for (const auto& ref : record_candidates()) {
      if (table_of_ref(ref) == table) return ref;
    }
    return std::nullopt;
  }

  std::optional<OutputRef> body_reference() {
    const Words words = split_words(row_.annotation);
    for (const auto& ref : record_candidates()) {
      const auto table = table_of_ref(ref);
      if (!table) continue;
      std::string spaced = *table;
      std::replace(spaced.begin(), spaced.end(), '_', ' ');
      for (const auto& tw : split_words(spaced)) {
        for (const auto& w : words) {
          if (same_word(w.lower, tw.lower)) return ref;
        }
      }
    }
    if (context_.trigger.event != TriggerEvent::kScheduled) return OutputRef{kTriggerStep, "record"};
    return std::nullopt;
  }

  OutputRef fallback_ref() const {
    const auto outputs = trigger_outputs(context_.trigger);
    return {kTriggerStep, outputs.front().name};
  }

  std::optional<OutputRef> pick_reference(int before_order, const std::vector<std::string>& accepts) const {
    auto accepted = [&](const std::string& schema) {
      return std::find(accepts.begin(), accepts.end(), schema) != accepts.end();
    };
    for (auto it = context_.steps.rbegin(); it != context_.steps.rend(); ++it) {
      if (it->order >= before_order) continue;
      const StepDefinition* def = steps_.find_step(it->name);
      if (def == nullptr) continue;
      for (const auto& out : def->outputs) {
        if (accepted(out.schema)) return OutputRef{it->order, out.name};
      }
    }
    for (const auto& out : trigger_outputs(context_.trigger)) {
      if (accepted(out.schema)) return OutputRef{kTriggerStep, out.name};
    }
    return std::nullopt;
  }

  std::optional<std::string> table_of_ref(const OutputRef& ref) {
    if (ref.segments().size() != 1) return std::nullopt;
    const std::string key = encode_ref(ref);
    if (const auto it = table_memo_.find(key); it != table_memo_.end()) return it->second;
    const auto table = compute_table_of(ref);
    table_memo_[key] = table;
    return table;
  }

  std::optional<std::string> compute_table_of(const OutputRef& ref) {
    if (ref.is_trigger()) {
      if (context_.trigger.event == TriggerEvent::kScheduled || ref.path != "record") return std::nullopt;
      return context_.trigger.table;
    }
    const Step* step = context_.find_step(ref.step);
    const StepDefinition* def = step ? steps_.find_step(step->name) : nullptr;
    const OutputDecl* out = def ? def->find_output(ref.output_name()) : nullptr;
    if (out == nullptr || out->table_from.empty()) return std::nullopt;
    const InputDecl* source = def->find_input(out->table_from);
    if (source == nullptr) return std::nullopt;
    const StepInputValue* given = step->find_input(source->name);
    const TextValue* text = given ? std::get_if<TextValue>(&given->value) : nullptr;
    if (source->kind == ValueKind::kTable) {
      if (text != nullptr && text->is_literal() && !text->empty()) return text->literal_text();
      // Outline-only context: recover the table from the step's annotation.
      const HeadSplit split = split_head(step->annotation);
      const std::string query = split.head.empty() ? step->annotation : join(split.head);
      return top_above_floor(plan_.ask(ArtifactKind::kTableName, query));
    }
    if (source->kind == ValueKind::kReference) {
      if (text != nullptr) {
        if (const OutputRef* inner = text->as_reference()) return table_of_ref(*inner);
      }
      if (const auto inner = pick_reference(step->order, source->accepts)) return table_of_ref(*inner);
    }
    return std::nullopt;
  }

  const EnvironmentCatalog& steps_;
  Plan& plan_;
  Workflow context_;
  OutlineRow row_;
  std::map<std::string, std::string> resolved_;
  std::map<std::string, OutputRef> refs_;
  std::map<std::string, std::optional<std::string>> table_memo_;
};

}  // namespace

std::string reference_create_flow(const std::string& requirement, const ChoicesOracle& oracle,
                                  const EnvironmentCatalog& steps, ReferenceTrace* trace) {
  if (requirement.empty()) throw std::invalid_argument("requirement must not be empty");
  std::vector<std::string> clauses = segment_clauses(requirement);
  std::optional<TriggerClause> trigger;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    trigger = detect_trigger(clauses[i]);
    if (!trigger) continue;
    if (trigger->schedule && !trigger->remainder.empty()) {
      clauses[i] = trigger->remainder;
    } else {
      clauses.erase(clauses.begin() + static_cast<std::ptrdiff_t>(i));
    }
    break;
  }
  if (!trigger) throw NoTriggerClause(requirement);

  Plan plan(oracle, trace);
  plan.text("trigger:\n");
  if (trigger->schedule) {
    plan.text("  event: \"scheduled\"\n  schedule: " + quote_scalar(*trigger->schedule) + "\n");
  } else {
    plan.text("  table: ");
    const std::string noun = trigger->noun.empty() ? requirement : join(trigger->noun);
    const auto table = top_above_floor(plan.ask(ArtifactKind::kTableName, noun));
    if (!table) throw UnresolvedTable(noun);
    plan.text(quote_scalar(*table) + "\n  event: " + quote_scalar(event_name(trigger->event)) + "\n");
    std::string spaced = *table;
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    const Words table_words = split_words(spaced);
    Words leftover;
    for (const auto& w : trigger->noun) {
      const bool names_table = std::any_of(table_words.begin(), table_words.end(),
                                           [&](const Word& t) {
                                             return same_word(w.lower, t.lower) ||
                                                    (t.lower.size() >= 3 && w.lower.starts_with(t.lower));
                                           });
      if (!names_table && !kClauseLeads.count(w.lower)) leftover.push_back(w);
    }
    if (!leftover.empty()) {
      if (auto c = phrase_condition(plan, join(leftover), leftover, *table)) {
        plan.text("  condition: " + quote_scalar(encode_condition({{*c}})) + "\n");
      }
    }
  }

  if (clauses.empty()) {
    plan.text("steps: []\n");
    return plan.take();
  }
  plan.text("steps:\n");
  int block = 0;
  int order = 0;
  for (const auto& clause : clauses) {
    ++order;
    const Words words = split_words(clause);
    const bool opens_block =
        !words.empty() && (words.front().lower == "if" ||
                           (words.size() > 1 && words[0].lower == "for" &&
                            (words[1].lower == "each" || words[1].lower == "every")));
    plan.text("  - annotation: " + quote_scalar(clause) + "\n    name: ");
    const RankedChoices choices = plan.ask(ArtifactKind::kStepName, clause);
    std::string name;
    for (const auto& choice : choices.choices) {
      const StepDefinition* def = steps.find_step(choice.payload);
      if (def != nullptr && def->flow_control == opens_block) {
        name = choice.payload;
        break;
      }
    }
    if (name.empty() && !choices.choices.empty()) name = choices.choices.front().payload;
    plan.text(quote_scalar(name) + "\n    order: " + std::to_string(order) + "\n    block: " +
              std::to_string(block) + "\n");
    const StepDefinition* def = steps.find_step(name);
    if (def != nullptr && def->flow_control) block = order;
  }
  return plan.take();
}

std::string reference_populate_inputs(const PromptState& state, const ChoicesOracle& oracle,
                                      const EnvironmentCatalog& steps, ReferenceTrace* trace) {
  Plan plan(oracle, trace);
  InputPlanner(state, steps, plan).run();
  return plan.take();
}

ReferenceGenerator::ReferenceGenerator(std::shared_ptr<const EnvironmentCatalog> catalog)
    : catalog_(std::move(catalog)) {}

GenerationEvent ReferenceGenerator::next(const PromptState& state) const {
  struct Pending {};
  std::size_t answered = 0;
  const ChoicesOracle oracle = [&](const ChoicesRequest&) -> RankedChoices {
    if (answered < state.injected_choices.size()) return state.injected_choices[answered++];
    throw Pending{};
  };
  ReferenceTrace trace;
  bool complete = true;
  try {
    if (state.sub_task == SubTask::kCreateFlow) {
      reference_create_flow(state.requirement, oracle, *catalog_, &trace);
    } else {
      reference_populate_inputs(state, oracle, *catalog_, &trace);
    }
  } catch (const Pending&) {
    complete = false;
  }
  return next_from_script(trace.ops, state, complete);
}

}  // namespace flowforge
