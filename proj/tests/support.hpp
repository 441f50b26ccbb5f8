// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures and independent oracles for the test suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowforge/catalog.hpp"
#include "flowforge/dataset.hpp"
#include "flowforge/evaluator.hpp"
#include "flowforge/retriever.hpp"
#include "flowforge/validate.hpp"
#include "flowforge/workflow.hpp"

#ifndef FLOWFORGE_TEST_DATA_DIR
#error "FLOWFORGE_TEST_DATA_DIR must point at the repository data directory"
#endif

namespace ff_test {

using namespace flowforge;
namespace fs = std::filesystem;

inline fs::path data_dir() { return FLOWFORGE_TEST_DATA_DIR; }
inline fs::path catalog_dir() { return data_dir() / "catalog"; }
inline fs::path corpus_dir() { return data_dir() / "corpus"; }
inline fs::path golden_dir() { return data_dir() / "golden"; }

inline const EnvironmentCatalog& demo_catalog() {
  static const EnvironmentCatalog catalog = load_catalog_dir(catalog_dir());
  return catalog;
}

inline std::shared_ptr<const EnvironmentCatalog> shared_catalog() {
  static const auto catalog = std::make_shared<const EnvironmentCatalog>(demo_catalog());
  return catalog;
}

inline const LexicalIndex& demo_index() {
  static const LexicalIndex index = build_index(demo_catalog());
  return index;
}

inline const std::vector<LabeledWorkflow>& demo_corpus() {
  static const std::vector<LabeledWorkflow> corpus = load_corpus(corpus_dir());
  return corpus;
}

inline std::set<std::string> solvable_ids() {
  std::set<std::string> ids;
  std::istringstream in(read_file(corpus_dir() / "solvable.txt"));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ids.insert(line);
  }
  return ids;
}

inline const std::string kReminderRequirement =
    "When a P1 incident is created, look up the user assigned to the incident and if the user has a "
    "manager, send an email reminding them of the incident";

inline const std::string kScheduledRequirement =
    "Every day, look up incident tasks that do not have assignees and close them";

inline Workflow reminder_workflow() {
  return parse_workflow(read_file(corpus_dir() / "incident_manager_reminder.flow.yaml"));
}

// --- random valid workflows --------------------------------------------------

struct RecordSource {
  OutputRef ref;
  std::string schema;  // record, records, text, number
  std::string table;   // empty for non-record outputs
};

/// Builds workflows that validate against a catalog by growing them step by
/// step and keeping only steps that leave the prefix valid.
class WorkflowGenerator {
 public:
  WorkflowGenerator(const EnvironmentCatalog& catalog, std::uint64_t seed) : catalog_(catalog), rng_(seed) {
    for (const auto& [name, def] : catalog.steps()) step_names_.push_back(name);
    for (const auto& [name, table] : catalog.tables()) table_names_.push_back(name);
  }

  Workflow generate(int min_steps = 0, int max_steps = 8) {
    Workflow w;
    w.requirement = text(1, 12);
    w.trigger = trigger();
    const int target = uniform(min_steps, max_steps);
    for (int attempts = 0; static_cast<int>(w.steps.size()) < target && attempts < target * 30; ++attempts) {
      auto step = try_step(w);
      if (!step) continue;
      Workflow candidate = w;
      candidate.steps.push_back(std::move(*step));
      if (validate_workflow(candidate, catalog_).ok()) w = std::move(candidate);
    }
    return w;
  }

  std::mt19937_64& rng() { return rng_; }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(uniform(0, static_cast<int>(items.size()) - 1))];
  }

  /// Free text exercising quoting: punctuation, quotes, backslashes, tabs,
  /// newlines and multi-byte characters.
  std::string text(int min_words, int max_words) {
    static const std::vector<std::string> words = {
        "incident", "user",  "close",    "P1",     "\"quoted\"", "back\\slash", "colon:", "#hash",
        "it's",     "élan",  "naïve",    "→",      "tab\there",  "line\nbreak", "100%",   "a,b",
        "[list]",   "- dash", "*star",   "&amp",   "!bang",      "@at",         "? q",    "null",
        "true",     "123",   "~tilde",  "`tick`", "|pipe",      ">gt",         "<lt",    "Ünïcödé"};
    std::string out;
    const int n = uniform(min_words, max_words);
    for (int i = 0; i < n; ++i) {
      if (i) out += chance(0.1) ? "  " : " ";
      out += pick(words);
    }
    if (n > 0 && chance(0.05)) out = " " + out + " ";
    return out;
  }

 private:
  std::string operand_literal() {
    static const std::vector<std::string> words = {"1", "abc", "in progress", "x-y", "v_2", "3.5", "é"};
    return pick(words);
  }

  ConditionExpr condition(const TableSchema& table, const std::vector<RecordSource>& sources) {
    ConditionExpr cond;
    const int n = uniform(1, 3);
    for (int i = 0; i < n; ++i) {
      const ColumnDef& column = pick(table.columns);
      Conjunct c;
      c.column = column.name;
      c.op = static_cast<ConditionOp>(uniform(0, 5));
      if (op_takes_operand(c.op)) {
        if (!column.values.empty() && chance(0.7)) {
          c.operand = TextValue::literal(pick(column.values).value);
        } else if (!sources.empty() && chance(0.4)) {
          c.operand = TextValue::reference(pick(sources).ref);
        } else {
          c.operand = TextValue::literal(operand_literal());
        }
      }
      cond.conjuncts.push_back(std::move(c));
    }
    return cond;
  }

  Trigger trigger() {
    Trigger t;
    if (chance(0.2)) {
      t.event = TriggerEvent::kScheduled;
      t.schedule = chance(0.5) ? "daily" : "every 2 hours at :15";
      return t;
    }
    t.event = chance(0.5) ? TriggerEvent::kCreated : TriggerEvent::kUpdated;
    t.table = pick(table_names_);
    if (chance(0.6)) t.condition = condition(*catalog_.find_table(t.table), {});
    return t;
  }

  std::vector<RecordSource> sources(const Workflow& w, int before_order) {
    std::vector<RecordSource> out;
    if (w.trigger.event != TriggerEvent::kScheduled) {
      out.push_back({{kTriggerStep, "record"}, "record", w.trigger.table});
    } else {
      out.push_back({{kTriggerStep, "run_time"}, "text", ""});
    }
    for (const auto& step : w.steps) {
      if (step.order >= before_order) break;
      const StepDefinition* def = catalog_.find_step(step.name);
      for (const auto& out_decl : def->outputs) {
        OutputRef ref{step.order, out_decl.name};
        std::string table;
        if (!out_decl.table_from.empty()) table = resolve_ref_table(w, catalog_, ref, before_order).value_or("");
        out.push_back({ref, out_decl.schema, table});
      }
    }
    // Extend record refs through reference columns.
    const std::size_t base = out.size();
    for (std::size_t i = 0; i < base; ++i) {
      if (out[i].schema != "record" || out[i].table.empty()) continue;
      for (const auto& column : catalog_.find_table(out[i].table)->columns) {
        if (column.reference_table.empty()) continue;
        OutputRef ref = out[i].ref;
        ref.path += "." + column.name;
        out.push_back({ref, "record", column.reference_table});
      }
    }
    return out;
  }

  std::optional<Step> try_step(const Workflow& w) {
    Step step;
    step.order = static_cast<int>(w.steps.size()) + 1;
    step.name = pick(step_names_);
    step.annotation = text(0, 6);
    const StepDefinition* def = catalog_.find_step(step.name);
    std::vector<int> blocks;
    for (const auto& s : w.steps) {
      if (catalog_.find_step(s.name)->flow_control) blocks.push_back(s.order);
    }
    if (!blocks.empty() && chance(0.5)) step.block = pick(blocks);

    const auto available = sources(w, step.order);
    std::vector<RecordSource> records, record_lists;
    for (const auto& s : available) {
      if (s.schema == "record" && !s.table.empty()) records.push_back(s);
      if (s.schema == "records" && !s.table.empty()) record_lists.push_back(s);
    }
    std::map<std::string, std::string> input_tables;
    for (const auto& decl : def->inputs) {
      if (!decl.required && chance(0.4)) continue;
      StepInputValue input;
      input.name = decl.name;
      switch (decl.kind) {
        case ValueKind::kTable: {
          const std::string table = pick(table_names_);
          input_tables[decl.name] = table;
          input.value = TextValue::literal(table);
          break;
        }
        case ValueKind::kReference: {
          const bool lists = std::find(decl.accepts.begin(), decl.accepts.end(), "records") != decl.accepts.end();
          const auto& pool = lists ? record_lists : records;
          if (pool.empty()) return std::nullopt;
          const RecordSource& s = pick(pool);
          input_tables[decl.name] = s.table;
          input.value = TextValue::reference(s.ref);
          break;
        }
        case ValueKind::kCondition:
        case ValueKind::kColumn: {
          const auto it = input_tables.find(decl.table_from);
          if (it == input_tables.end()) return std::nullopt;
          const TableSchema& table = *catalog_.find_table(it->second);
          if (decl.kind == ValueKind::kColumn) {
            input.value = TextValue::literal(pick(table.columns).name);
          } else {
            input.value = condition(table, available);
          }
          break;
        }
        case ValueKind::kText:
        case ValueKind::kEmailBody: {
          TextValue value;
          const int parts = uniform(1, 4);
          for (int i = 0; i < parts; ++i) {
            if (chance(0.35)) {
              value.append(pick(available).ref);
            } else {
              value.append(text(1, 3));
            }
          }
          input.value = std::move(value);
          break;
        }
      }
      step.inputs.push_back(std::move(input));
    }
    if (chance(0.3)) std::shuffle(step.inputs.begin(), step.inputs.end(), rng_);
    return step;
  }

  const EnvironmentCatalog& catalog_;
  std::mt19937_64 rng_;
  std::vector<std::string> step_names_;
  std::vector<std::string> table_names_;
};

/// Valid workflow with exactly `n` top-level look-up/update/note steps.
inline Workflow synthetic_workflow(int n) {
  Workflow w;
  w.requirement = "synthetic workflow with " + std::to_string(n) + " steps";
  w.trigger.table = "incident";
  w.trigger.event = TriggerEvent::kUpdated;
  w.trigger.condition = ConditionExpr{{{"priority", ConditionOp::kEq, TextValue::literal("1")}}};
  for (int i = 1; i <= n; ++i) {
    Step s;
    s.order = i;
    switch (i % 3) {
      case 1:
        s.name = "look_up_record";
        s.annotation = "look up the assignee " + std::to_string(i);
        s.inputs = {{"table", TextValue::literal("sys_user")},
                    {"conditions", ConditionExpr{{{"sys_id", ConditionOp::kEq,
                                                   TextValue::reference({kTriggerStep, "record.assigned_to"})}}}}};
        break;
      case 2:
        s.name = "add_work_note";
        s.annotation = "note step " + std::to_string(i);
        s.inputs = {{"record", TextValue::reference({kTriggerStep, "record"})},
                    {"note", TextValue::literal("checked by {{" + std::to_string(i - 1) + ".record}}")}};
        break;
      default:
        s.name = "update_record";
        s.annotation = "set state " + std::to_string(i);
        s.inputs = {{"record", TextValue::reference({kTriggerStep, "record"})},
                    {"values", ConditionExpr{{{"state", ConditionOp::kEq, TextValue::literal("2")}}}}};
        break;
    }
    w.steps.push_back(std::move(s));
  }
  // The note literal above spells a reference; decode it properly.
  for (auto& s : w.steps) {
    for (auto& in : s.inputs) {
      if (auto* t = std::get_if<TextValue>(&in.value); t && t->is_literal()) *t = decode_text(t->literal_text());
    }
  }
  return w;
}

// --- violation injection -----------------------------------------------------

struct Injection {
  Workflow workflow;
  ViolationCode code;
  int step_order = 0;  // where the violation must be reported
};

/// Injects one violation of `code` into a valid workflow with at least one
/// step. Returns nullopt when the workflow offers no site for it.
inline std::optional<Injection> inject_violation(const Workflow& valid, ViolationCode code, std::mt19937_64& rng,
                                                 const EnvironmentCatalog& catalog) {
  if (valid.steps.empty()) return std::nullopt;
  Injection out{valid, code, 0};
  Workflow& w = out.workflow;
  auto pick_index = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto text_inputs = [&]() {
    std::vector<std::pair<std::size_t, std::size_t>> sites;
    for (std::size_t s = 0; s < w.steps.size(); ++s) {
      for (std::size_t i = 0; i < w.steps[s].inputs.size(); ++i) {
        if (std::holds_alternative<TextValue>(w.steps[s].inputs[i].value)) sites.emplace_back(s, i);
      }
    }
    return sites;
  };
  switch (code) {
    case ViolationCode::kUnknownStep: {
      Step& s = w.steps[pick_index(w.steps.size())];
      s.name += "_x";
      out.step_order = s.order;
      return out;
    }
    case ViolationCode::kUnknownTable: {
      std::vector<std::size_t> table_steps;
      for (std::size_t s = 0; s < w.steps.size(); ++s) {
        const StepDefinition* def = catalog.find_step(w.steps[s].name);
        for (const auto& in : w.steps[s].inputs) {
          const InputDecl* decl = def->find_input(in.name);
          if (decl && decl->kind == ValueKind::kTable) table_steps.push_back(s);
        }
      }
      if (w.trigger.event != TriggerEvent::kScheduled && (table_steps.empty() || pick_index(2) == 0)) {
        w.trigger.table = "userz";
        w.trigger.condition.reset();
        out.step_order = 0;
        return out;
      }
      if (table_steps.empty()) return std::nullopt;
      Step& s = w.steps[table_steps[pick_index(table_steps.size())]];
      const StepDefinition* def = catalog.find_step(s.name);
      for (auto& in : s.inputs) {
        const InputDecl* decl = def->find_input(in.name);
        if (decl && decl->kind == ValueKind::kTable) in.value = TextValue::literal("userz");
      }
      out.step_order = s.order;
      return out;
    }
    case ViolationCode::kUnknownColumn: {
      std::vector<std::pair<std::size_t, std::size_t>> sites;
      for (std::size_t s = 0; s < w.steps.size(); ++s) {
        for (std::size_t i = 0; i < w.steps[s].inputs.size(); ++i) {
          if (std::holds_alternative<ConditionExpr>(w.steps[s].inputs[i].value)) sites.emplace_back(s, i);
        }
      }
      if (sites.empty() || (w.trigger.condition && pick_index(3) == 0)) {
        if (!w.trigger.condition) return std::nullopt;
        w.trigger.condition->conjuncts.push_back({"no_such_column", ConditionOp::kIsEmpty, std::nullopt});
        out.step_order = 0;
        return out;
      }
      const auto [s, i] = sites[pick_index(sites.size())];
      std::get<ConditionExpr>(w.steps[s].inputs[i].value)
          .conjuncts.push_back({"no_such_column", ConditionOp::kEq, TextValue::literal("1")});
      out.step_order = w.steps[s].order;
      return out;
    }
    case ViolationCode::kForwardRef: {
      const auto sites = text_inputs();
      if (sites.empty()) return std::nullopt;
      const auto [s, i] = sites[pick_index(sites.size())];
      const int order = w.steps[s].order;
      const int target = order + static_cast<int>(pick_index(static_cast<std::size_t>(w.steps.size()) - s));
      std::get<TextValue>(w.steps[s].inputs[i].value).append(OutputRef{target, "record"});
      out.step_order = order;
      return out;
    }
    case ViolationCode::kBadBlock: {
      Step& s = w.steps[pick_index(w.steps.size())];
      s.block = s.order;
      out.step_order = s.order;
      return out;
    }
    case ViolationCode::kOrderGap: {
      Step& s = w.steps.back();
      s.order += 1 + static_cast<int>(pick_index(3));
      out.step_order = s.order;
      return out;
    }
    case ViolationCode::kUnknownInputName: {
      Step& s = w.steps[pick_index(w.steps.size())];
      s.inputs.push_back({"no_such_input", TextValue::literal("x")});
      out.step_order = s.order;
      return out;
    }
    case ViolationCode::kMissingRequiredInput: {
      Step& s = w.steps[pick_index(w.steps.size())];
      const StepDefinition* def = catalog.find_step(s.name);
      std::vector<std::string> required;
      for (const auto& decl : def->inputs) {
        if (decl.required && s.find_input(decl.name)) required.push_back(decl.name);
      }
      if (required.empty()) return std::nullopt;
      const std::string victim = required[pick_index(required.size())];
      std::erase_if(s.inputs, [&](const StepInputValue& in) { return in.name == victim; });
      out.step_order = s.order;
      return out;
    }
    case ViolationCode::kBadOutputPath: {
      const auto sites = text_inputs();
      if (sites.empty()) return std::nullopt;
      const auto [s, i] = sites[pick_index(sites.size())];
      std::get<TextValue>(w.steps[s].inputs[i].value).append(OutputRef{kTriggerStep, "no_such_output"});
      out.step_order = w.steps[s].order;
      return out;
    }
  }
  return std::nullopt;
}

// --- tree edit distance oracles ----------------------------------------------

/// Forest edit distance by the textbook recursion on rightmost roots,
/// memoized on the bracket strings of the two forests.
class BruteForceTed {
 public:
  explicit BruteForceTed(EditCostModel costs = {}) : costs_(costs) {}

  long distance(const FlowTree& a, const FlowTree& b) { return forest({a}, {b}); }

 private:
  using Forest = std::vector<FlowTree>;

  static std::string key(const Forest& f) {
    std::string s;
    for (const auto& t : f) s += t.to_string() + ";";
    return s;
  }

  static long count(const Forest& f) {
    long n = 0;
    for (const auto& t : f) n += static_cast<long>(t.size());
    return n;
  }

  // Forest minus the root of its rightmost tree (children promoted).
  static Forest without_root(const Forest& f) {
    Forest out(f.begin(), f.end() - 1);
    for (const auto& c : f.back().children) out.push_back(c);
    return out;
  }

  long forest(const Forest& f, const Forest& g) {
    if (f.empty()) return count(g) * costs_.insert;
    if (g.empty()) return count(f) * costs_.remove;
    const std::string k = key(f) + "|" + key(g);
    if (const auto it = memo_.find(k); it != memo_.end()) return it->second;
    const FlowTree& v = f.back();
    const FlowTree& w = g.back();
    long best = forest(without_root(f), g) + costs_.remove;
    best = std::min(best, forest(f, without_root(g)) + costs_.insert);
    const Forest f_rest(f.begin(), f.end() - 1);
    const Forest g_rest(g.begin(), g.end() - 1);
    best = std::min(best, forest(f_rest, g_rest) + forest(v.children, w.children) +
                              (v.label == w.label ? 0 : costs_.relabel));
    memo_.emplace(k, best);
    return best;
  }

  EditCostModel costs_;
  std::unordered_map<std::string, long> memo_;
};

/// Every ordered forest with at most `max_nodes` nodes over `labels`,
/// interned to dense ids, with the edit distance between every pair of
/// forests filled in by the same recursion as BruteForceTed (unit costs).
class ExhaustiveForests {
 public:
  ExhaustiveForests(int max_nodes, std::vector<std::string> labels) : labels_(std::move(labels)) {
    by_size_.resize(static_cast<std::size_t>(max_nodes) + 1);
    intern({});
    for (int n = 1; n <= max_nodes; ++n) {
      for (const auto& f : build(n)) intern(f);
    }
    const std::size_t n = forests_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = forests_[i];
      if (f.empty()) {
        rest_.push_back(0);
        kids_.push_back(0);
        drop_.push_back(0);
        label_.push_back(-1);
        continue;
      }
      rest_.push_back(id_of({f.begin(), f.end() - 1}));
      kids_.push_back(id_of(f.back().children));
      std::vector<FlowTree> dropped(f.begin(), f.end() - 1);
      for (const auto& c : f.back().children) dropped.push_back(c);
      drop_.push_back(id_of(dropped));
      label_.push_back(static_cast<int>(std::find(labels_.begin(), labels_.end(), f.back().label) - labels_.begin()));
    }
    memo_.assign(n * n, 0xFF);
  }

  /// All single trees (forests of one tree).
  std::vector<std::size_t> tree_ids() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < forests_.size(); ++i) {
      if (forests_[i].size() == 1) out.push_back(i);
    }
    return out;
  }

  const FlowTree& tree(std::size_t id) const { return forests_[id].front(); }

  long distance(std::size_t a, std::size_t b) {
    const std::size_t n = forests_.size();
    std::uint8_t& slot = memo_[a * n + b];
    if (slot != 0xFF) return slot;
    long d;
    if (a == 0) {
      d = sizes_[b];
    } else if (b == 0) {
      d = sizes_[a];
    } else {
      d = std::min(distance(drop_[a], b) + 1, distance(a, drop_[b]) + 1);
      d = std::min(d, distance(rest_[a], rest_[b]) + distance(kids_[a], kids_[b]) + (label_[a] == label_[b] ? 0 : 1));
    }
    slot = static_cast<std::uint8_t>(d);
    return d;
  }

  std::size_t forest_count() const { return forests_.size(); }

 private:
  using Forest = std::vector<FlowTree>;

  static std::string key(const Forest& f) {
    std::string s;
    for (const auto& t : f) s += t.to_string() + ";";
    return s;
  }

  std::size_t id_of(const Forest& f) const { return ids_.at(key(f)); }

  void intern(const Forest& f) {
    const std::string k = key(f);
    if (ids_.count(k)) return;
    ids_.emplace(k, forests_.size());
    long n = 0;
    for (const auto& t : f) n += static_cast<long>(t.size());
    sizes_.push_back(n);
    forests_.push_back(f);
  }

  // Forests with exactly n nodes: first tree of size k, then a forest of n-k.
  std::vector<Forest> build(int n) {
    auto& cached = by_size_[static_cast<std::size_t>(n)];
    if (!cached.empty() || n == 0) return n == 0 ? std::vector<Forest>{{}} : cached;
    for (int k = 1; k <= n; ++k) {
      for (const auto& kids : build(k - 1)) {
        for (const auto& label : labels_) {
          FlowTree t{label, kids};
          for (const auto& tail : build(n - k)) {
            Forest f{t};
            f.insert(f.end(), tail.begin(), tail.end());
            cached.push_back(std::move(f));
          }
        }
      }
    }
    return cached;
  }

  std::vector<std::string> labels_;
  std::vector<std::vector<Forest>> by_size_;
  std::vector<Forest> forests_;
  std::map<std::string, std::size_t> ids_;
  std::vector<long> sizes_;
  std::vector<std::size_t> rest_, kids_, drop_;
  std::vector<int> label_;
  std::vector<std::uint8_t> memo_;
};

/// Random ordered tree with exactly `nodes` nodes.
inline FlowTree random_tree(std::mt19937_64& rng, int nodes, const std::vector<std::string>& labels) {
  std::uniform_int_distribution<std::size_t> label(0, labels.size() - 1);
  std::vector<int> parent(static_cast<std::size_t>(nodes), -1);
  for (int i = 1; i < nodes; ++i) parent[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, i - 1)(rng);
  std::vector<FlowTree> made(static_cast<std::size_t>(nodes));
  for (auto& t : made) t.label = labels[label(rng)];
  for (int i = nodes - 1; i >= 1; --i) {
    auto& p = made[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    p.children.insert(p.children.begin(), std::move(made[static_cast<std::size_t>(i)]));
  }
  return made.front();
}

// --- retrieval oracles -------------------------------------------------------

struct BruteMetrics {
  double recall_at_1 = 0, recall_at_4 = 0, recall_at_10 = 0, hit_rate_at_4 = 0, mrr = 0;
};

/// Recomputes retrieval metrics from full rankings obtained one query at a
/// time, with the standard definitions.
inline BruteMetrics brute_force_metrics(const LexicalIndex& index, const std::vector<RetrievalSample>& samples) {
  BruteMetrics m;
  for (const auto& s : samples) {
    QueryOptions options;
    options.k = 100000;
    options.scope = s.scope;
    const auto ranked = index.query(s.kind, s.query, options);
    const std::set<std::string> gold(s.gold.begin(), s.gold.end());
    auto recall = [&](std::size_t k) {
      if (gold.empty()) return 0.0;
      std::size_t hits = 0;
      for (std::size_t r = 0; r < ranked.choices.size() && r < k; ++r) hits += gold.count(ranked.choices[r].payload);
      return static_cast<double>(hits) / static_cast<double>(gold.size());
    };
    std::size_t first = 0;
    for (std::size_t r = 0; r < ranked.choices.size(); ++r) {
      if (gold.count(ranked.choices[r].payload)) {
        first = r + 1;
        break;
      }
    }
    m.recall_at_1 += recall(1);
    m.recall_at_4 += recall(4);
    m.recall_at_10 += recall(10);
    m.hit_rate_at_4 += first >= 1 && first <= 4 ? 1.0 : 0.0;
    m.mrr += first ? 1.0 / static_cast<double>(first) : 0.0;
  }
  const double n = static_cast<double>(samples.size());
  m.recall_at_1 /= n;
  m.recall_at_4 /= n;
  m.recall_at_10 /= n;
  m.hit_rate_at_4 /= n;
  m.mrr /= n;
  return m;
}

/// Cosine score of one document against a query, computed from scratch over
/// the document set (idf = ln(1 + N/df), tf weight 1 + ln tf).
inline double brute_force_cosine(const std::vector<ArtifactDoc>& docs, std::size_t target, std::string_view query) {
  std::map<std::string, std::size_t> df;
  std::vector<std::map<std::string, double>> tfs;
  for (const auto& d : docs) {
    tfs.push_back(term_frequencies(d.text));
    for (const auto& [term, c] : tfs.back()) ++df[term];
  }
  auto scale = [](const std::string& term) {
    if (term.rfind("t:", 0) == 0) return 0.35;
    if (term.rfind("n:", 0) == 0) return 2.0;
    return 1.0;
  };
  auto vec = [&](const std::map<std::string, double>& tf) {
    std::map<std::string, double> v;
    for (const auto& [term, c] : tf) {
      const auto it = df.find(term);
      if (it == df.end()) continue;
      v[term] = (1.0 + std::log(c)) * std::log(1.0 + static_cast<double>(docs.size()) / static_cast<double>(it->second)) *
                scale(term);
    }
    return v;
  };
  const auto q = vec(term_frequencies(query));
  const auto d = vec(tfs[target]);
  double dot = 0, nq = 0, nd = 0;
  for (const auto& [t, w] : q) {
    nq += w * w;
    if (const auto it = d.find(t); it != d.end()) dot += w * it->second;
  }
  for (const auto& [t, w] : d) nd += w * w;
  if (nq == 0 || nd == 0) return 0.0;
  return dot / (std::sqrt(nq) * std::sqrt(nd));
}

}  // namespace ff_test
