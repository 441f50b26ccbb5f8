// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "flowforge/errors.hpp"
#include "flowforge/json_io.hpp"
#include "flowforge/retriever.hpp"
#include "flowforge/workflow.hpp"

namespace flowforge {

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("EmptyCorpus", "evaluation needs at least one workflow pair") {}
};

/// Rooted, ordered, labeled tree.
struct FlowTree {
  std::string label;
  std::vector<FlowTree> children;

  std::size_t size() const;
  /// Bracket notation, e.g. `WORKFLOW(TRIGGER(event(created)) IF)`.
  std::string to_string() const;

  friend bool operator==(const FlowTree&, const FlowTree&) = default;
};

enum class TreeMode { kFull, kOutlineOnly, kSingleStep };

struct TreeOptions {
  TreeMode mode = TreeMode::kFull;
  std::string step_name;  // kSingleStep only
  bool include_annotations = false;
};

/// Root WORKFLOW, then the TRIGGER subtree, then one subtree per top-level
/// step. Steps in a flow-control block hang under their parent step after its
/// inputs. Every input node holds one leaf per value atom: literal text,
/// output reference, or condition conjunct. Single-step mode keeps only the
/// matching steps, flat under the root.
FlowTree workflow_to_tree(const Workflow& workflow, const TreeOptions& options = {});

struct EditCostModel {
  long insert = 1;
  long remove = 1;
  long relabel = 1;  // charged only when labels differ
};

/// Zhang–Shasha keyroot/forest dynamic program.
long tree_edit_distance(const FlowTree& a, const FlowTree& b, const EditCostModel& costs = {});

/// 1 - TED / (|a| + |b|).
double tree_similarity(const FlowTree& a, const FlowTree& b, const EditCostModel& costs = {});

double flow_similarity(const Workflow& expected, const Workflow& generated,
                       const TreeOptions& options = {}, const EditCostModel& costs = {});

/// Parses "full", "outline" or "step:<name>".
TreeOptions parse_tree_mode(const std::string& text);

// --- corpus evaluation -------------------------------------------------------

struct EvaluationPair {
  std::string id;
  Workflow expected;
  Workflow generated;
};

struct GroupStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
};

struct PairScore {
  std::string id;
  double full = 0.0;
  double outline = 0.0;
  /// Single-step similarity per step type of the expected workflow.
  std::vector<std::pair<std::string, double>> steps;
};

struct StepTypeRow {
  std::string step_name;
  GroupStats stats;
};

struct EvaluationReport {
  std::vector<PairScore> pairs;  // input order
  GroupStats outline;
  GroupStats full;
  GroupStats step_inputs;
  /// Ascending by mean similarity, ties by name.
  std::vector<StepTypeRow> per_step;
  std::optional<RetrievalReport> retrieval;
};

GroupStats group_stats(std::vector<double> values);

/// Scores pairs in parallel; aggregation is single-threaded.
EvaluationReport evaluate_corpus(const std::vector<EvaluationPair>& pairs);
EvaluationReport evaluate_corpus_serial(const std::vector<EvaluationPair>& pairs);

Json evaluation_to_json(const EvaluationReport& report);
Json retrieval_to_json(const RetrievalReport& report);
std::string evaluation_table(const EvaluationReport& report);

}  // namespace flowforge
