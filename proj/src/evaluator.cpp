// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

namespace flowforge {

namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

FlowTree leaf(std::string label) { return {std::move(label), {}}; }

std::vector<FlowTree> value_atoms(const ValueExpr& value) {
  std::vector<FlowTree> atoms;
  if (const auto* text = std::get_if<TextValue>(&value)) {
    for (const auto& segment : text->segments) {
      if (const auto* literal = std::get_if<std::string>(&segment)) {
        std::string atom = trim(*literal);
        if (!atom.empty()) atoms.push_back(leaf(std::move(atom)));
      } else {
        atoms.push_back(leaf(encode_ref(std::get<OutputRef>(segment))));
      }
    }
  } else {
    for (const auto& conjunct : std::get<ConditionExpr>(value).conjuncts) {
      atoms.push_back(leaf(encode_conjunct(conjunct)));
    }
  }
  return atoms;
}

FlowTree trigger_tree(const Trigger& trigger) {
  FlowTree node{"TRIGGER", {}};
  node.children.push_back({"event", {leaf(std::string(event_name(trigger.event)))}});
  if (!trigger.table.empty()) node.children.push_back({"table", {leaf(trigger.table)}});
  if (trigger.condition) node.children.push_back({"condition", value_atoms(*trigger.condition)});
  if (trigger.schedule) node.children.push_back({"schedule", {leaf(*trigger.schedule)}});
  return node;
}

FlowTree step_node(const Step& step, const TreeOptions& options) {
  FlowTree node{step.name, {}};
  if (options.include_annotations) node.children.push_back({"annotation", {leaf(step.annotation)}});
  if (options.mode != TreeMode::kOutlineOnly) {
    for (const auto& input : step.inputs) node.children.push_back({input.name, value_atoms(input.value)});
  }
  return node;
}

// Parent order of each step; unresolvable blocks fall back to the top level.
int parent_of(const Workflow& workflow, const Step& step) {
  if (step.block <= 0 || step.block >= step.order) return 0;
  return workflow.find_step(step.block) ? step.block : 0;
}

FlowTree step_subtree(const Workflow& workflow, const Step& step, const TreeOptions& options) {
  FlowTree node = step_node(step, options);
  for (const auto& child : workflow.steps) {
    if (child.order != step.order && parent_of(workflow, child) == step.order) {
      node.children.push_back(step_subtree(workflow, child, options));
    }
  }
  return node;
}

// Postorder arrays for the dynamic program.
struct Indexed {
  std::vector<const std::string*> labels;
  std::vector<int> leftmost;
  std::vector<int> keyroots;
};

int index_tree(const FlowTree& node, Indexed& out) {
  int first_leaf = -1;
  for (const auto& child : node.children) {
    const int leftmost = index_tree(child, out);
    if (first_leaf < 0) first_leaf = leftmost;
  }
  const int id = static_cast<int>(out.labels.size());
  out.labels.push_back(&node.label);
  out.leftmost.push_back(first_leaf < 0 ? id : first_leaf);
  return out.leftmost.back();
}

Indexed index_tree(const FlowTree& tree) {
  Indexed out;
  index_tree(tree, out);
  std::set<int> seen;
  for (int i = static_cast<int>(out.labels.size()) - 1; i >= 0; --i) {
    if (seen.insert(out.leftmost[i]).second) out.keyroots.push_back(i);
  }
  std::sort(out.keyroots.begin(), out.keyroots.end());
  return out;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

PairScore score_pair(const EvaluationPair& pair) {
  PairScore score;
  score.id = pair.id;
  score.full = flow_similarity(pair.expected, pair.generated, {TreeMode::kFull, {}});
  score.outline = flow_similarity(pair.expected, pair.generated, {TreeMode::kOutlineOnly, {}});
  std::set<std::string> names;
  for (const auto& step : pair.expected.steps) names.insert(step.name);
  for (const auto& name : names) {
    score.steps.emplace_back(name,
                             flow_similarity(pair.expected, pair.generated, {TreeMode::kSingleStep, name}));
  }
  return score;
}

EvaluationReport assemble(std::vector<PairScore> scores) {
  EvaluationReport report;
  std::vector<double> outline, full, steps;
  std::map<std::string, std::vector<double>> by_step;
  for (const auto& score : scores) {
    outline.push_back(score.outline);
    full.push_back(score.full);
    for (const auto& [name, value] : score.steps) {
      steps.push_back(value);
      by_step[name].push_back(value);
    }
  }
  report.outline = group_stats(outline);
  report.full = group_stats(full);
  report.step_inputs = group_stats(steps);
  for (auto& [name, values] : by_step) report.per_step.push_back({name, group_stats(values)});
  std::stable_sort(report.per_step.begin(), report.per_step.end(),
                   [](const StepTypeRow& a, const StepTypeRow& b) { return a.stats.mean < b.stats.mean; });
  report.pairs = std::move(scores);
  return report;
}

Json stats_json(const GroupStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"min", s.min}};
}

Json metrics_json(const RetrievalMetrics& m) {
  return {{"count", m.count},
          {"recall_at_1", m.recall_at_1},
          {"recall_at_4", m.recall_at_4},
          {"recall_at_10", m.recall_at_10},
          {"hit_rate_at_4", m.hit_rate_at_4},
          {"mrr", m.mrr}};
}

}  // namespace

std::size_t FlowTree::size() const {
  std::size_t n = 1;
  for (const auto& child : children) n += child.size();
  return n;
}

std::string FlowTree::to_string() const {
  std::string out = label;
  if (children.empty()) return out;
  out += '(';
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (i) out += ' ';
    out += children[i].to_string();
  }
  out += ')';
  return out;
}

FlowTree workflow_to_tree(const Workflow& workflow, const TreeOptions& options) {
  FlowTree root{"WORKFLOW", {}};
  if (options.mode == TreeMode::kSingleStep) {
    for (const auto& step : workflow.steps) {
      if (step.name == options.step_name) root.children.push_back(step_node(step, options));
    }
    return root;
  }
  root.children.push_back(trigger_tree(workflow.trigger));
  for (const auto& step : workflow.steps) {
    if (parent_of(workflow, step) == 0) root.children.push_back(step_subtree(workflow, step, options));
  }
  return root;
}

long tree_edit_distance(const FlowTree& a, const FlowTree& b, const EditCostModel& costs) {
  const Indexed ta = index_tree(a);
  const Indexed tb = index_tree(b);
  const int n = static_cast<int>(ta.labels.size());
  const int m = static_cast<int>(tb.labels.size());
  std::vector<long> tree(static_cast<std::size_t>(n) * m, 0);
  std::vector<long> forest(static_cast<std::size_t>(n + 1) * (m + 1), 0);
  auto td = [&](int i, int j) -> long& { return tree[static_cast<std::size_t>(i) * m + j]; };

  for (const int i : ta.keyroots) {
    for (const int j : tb.keyroots) {
      const int li = ta.leftmost[i];
      const int lj = tb.leftmost[j];
      const int rows = i - li + 2;
      const int cols = j - lj + 2;
      auto fd = [&](int x, int y) -> long& { return forest[static_cast<std::size_t>(x) * cols + y]; };
      fd(0, 0) = 0;
      for (int x = 1; x < rows; ++x) fd(x, 0) = fd(x - 1, 0) + costs.remove;
      for (int y = 1; y < cols; ++y) fd(0, y) = fd(0, y - 1) + costs.insert;
      for (int x = 1; x < rows; ++x) {
        const int ni = li + x - 1;
        for (int y = 1; y < cols; ++y) {
          const int nj = lj + y - 1;
          const long del = fd(x - 1, y) + costs.remove;
          const long ins = fd(x, y - 1) + costs.insert;
          if (ta.leftmost[ni] == li && tb.leftmost[nj] == lj) {
            const long ren = fd(x - 1, y - 1) + (*ta.labels[ni] == *tb.labels[nj] ? 0 : costs.relabel);
            fd(x, y) = std::min({del, ins, ren});
            td(ni, nj) = fd(x, y);
          } else {
            const int px = ta.leftmost[ni] - li;
            const int py = tb.leftmost[nj] - lj;
            fd(x, y) = std::min({del, ins, fd(px, py) + td(ni, nj)});
          }
        }
      }
    }
  }
  return td(n - 1, m - 1);
}

double tree_similarity(const FlowTree& a, const FlowTree& b, const EditCostModel& costs) {
  const double total = static_cast<double>(a.size() + b.size());
  return 1.0 - static_cast<double>(tree_edit_distance(a, b, costs)) / total;
}

double flow_similarity(const Workflow& expected, const Workflow& generated,
                       const TreeOptions& options, const EditCostModel& costs) {
  return tree_similarity(workflow_to_tree(expected, options), workflow_to_tree(generated, options), costs);
}

TreeOptions parse_tree_mode(const std::string& text) {
  if (text == "full") return {TreeMode::kFull, {}};
  if (text == "outline") return {TreeMode::kOutlineOnly, {}};
  if (text.rfind("step:", 0) == 0 && text.size() > 5) return {TreeMode::kSingleStep, text.substr(5)};
  throw Error("InvalidMode", "mode must be full, outline or step:<name>, got '" + text + "'");
}

GroupStats group_stats(std::vector<double> values) {
  GroupStats stats;
  stats.count = values.size();
  if (values.empty()) return stats;
  stats.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  stats.min = *std::min_element(values.begin(), values.end());
  stats.median = median_of(std::move(values));
  return stats;
}

EvaluationReport evaluate_corpus(const std::vector<EvaluationPair>& pairs) {
  if (pairs.empty()) throw EmptyCorpus();
  std::vector<PairScore> scores(pairs.size());
  const long n = static_cast<long>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) scores[i] = score_pair(pairs[i]);
  return assemble(std::move(scores));
}

EvaluationReport evaluate_corpus_serial(const std::vector<EvaluationPair>& pairs) {
  if (pairs.empty()) throw EmptyCorpus();
  std::vector<PairScore> scores;
  for (const auto& pair : pairs) scores.push_back(score_pair(pair));
  return assemble(std::move(scores));
}

Json retrieval_to_json(const RetrievalReport& report) {
  Json per_kind = Json::object();
  for (const auto& [kind, metrics] : report.per_kind) {
    per_kind[std::string(artifact_kind_name(kind))] = metrics_json(metrics);
  }
  return {{"overall", metrics_json(report.overall)},
          {"per_kind", per_kind},
          {"failures", report.failures}};
}

Json evaluation_to_json(const EvaluationReport& report) {
  Json pairs = Json::array();
  for (const auto& p : report.pairs) {
    Json steps = Json::object();
    for (const auto& [name, value] : p.steps) steps[name] = value;
    pairs.push_back({{"id", p.id}, {"full", p.full}, {"outline", p.outline}, {"steps", steps}});
  }
  Json per_step = Json::array();
  for (const auto& row : report.per_step) {
    Json j = stats_json(row.stats);
    j["step"] = row.step_name;
    per_step.push_back(j);
  }
  Json j = {{"pairs", pairs},
            {"outline", stats_json(report.outline)},
            {"full", stats_json(report.full)},
            {"step_inputs", stats_json(report.step_inputs)},
            {"per_step", per_step}};
  if (report.retrieval) j["retrieval"] = retrieval_to_json(*report.retrieval);
  return j;
}

std::string evaluation_table(const EvaluationReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %6s %8s %8s %8s\n", "group", "count", "mean", "median", "min");
  out += line;
  auto row = [&](const std::string& name, const GroupStats& s) {
    std::snprintf(line, sizeof line, "%-22s %6zu %8.4f %8.4f %8.4f\n", name.c_str(), s.count, s.mean,
                  s.median, s.min);
    out += line;
  };
  row("outline", report.outline);
  row("full", report.full);
  row("step inputs", report.step_inputs);
  out += "\nper step type (lowest first)\n";
  for (const auto& r : report.per_step) row(r.step_name, r.stats);
  if (report.retrieval) {
    const auto& m = report.retrieval->overall;
    std::snprintf(line, sizeof line, "\nretrieval: n=%zu R@1=%.4f R@4=%.4f R@10=%.4f HR@4=%.4f MRR=%.4f\n",
                  m.count, m.recall_at_1, m.recall_at_4, m.recall_at_10, m.hit_rate_at_4, m.mrr);
    out += line;
  }
  return out;
}

}  // namespace flowforge
