// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace flowforge {

/// Step reference value meaning "the trigger". Real steps use order >= 1.
inline constexpr int kTriggerStep = 0;

/// Reference to an output of the trigger or of an earlier step, rendered as
/// `{{trigger.record.assigned_to}}` or `{{1.record}}`.
struct OutputRef {
  int step = kTriggerStep;
  std::string path;  // dot-joined; first segment names the output

  bool is_trigger() const { return step == kTriggerStep; }
  std::string output_name() const;
  std::vector<std::string> segments() const;

  friend bool operator==(const OutputRef&, const OutputRef&) = default;
};

using Segment = std::variant<std::string, OutputRef>;

/// Literal text, a single output reference, or a composite mixing both.
/// Adjacent literal segments are always merged and empty literals dropped,
/// so equal texts have equal segment lists.
struct TextValue {
  std::vector<Segment> segments;

  static TextValue literal(std::string text);
  static TextValue reference(OutputRef ref);

  bool empty() const { return segments.empty(); }
  bool is_literal() const;
  bool is_reference() const;
  /// Concatenated literal text; only meaningful when is_literal().
  std::string literal_text() const;
  const OutputRef* as_reference() const;
  std::vector<OutputRef> references() const;

  /// Appends and keeps the canonical form.
  void append(Segment segment);

  friend bool operator==(const TextValue&, const TextValue&) = default;
};

enum class ConditionOp { kEq, kNeq, kGt, kLt, kIsEmpty, kIsNotEmpty };

bool op_takes_operand(ConditionOp op);
std::string_view op_token(ConditionOp op);
std::string_view op_name(ConditionOp op);

struct Conjunct {
  std::string column;
  ConditionOp op = ConditionOp::kEq;
  std::optional<TextValue> operand;

  friend bool operator==(const Conjunct&, const Conjunct&) = default;
};

/// Caret-joined conjunct list, e.g. `assigned_toISEMPTY^state=3`.
struct ConditionExpr {
  std::vector<Conjunct> conjuncts;

  friend bool operator==(const ConditionExpr&, const ConditionExpr&) = default;
};

using ValueExpr = std::variant<TextValue, ConditionExpr>;

struct StepInputValue {
  std::string name;
  ValueExpr value;

  friend bool operator==(const StepInputValue&, const StepInputValue&) = default;
};

enum class TriggerEvent { kCreated, kUpdated, kScheduled };

std::string_view event_name(TriggerEvent event);
std::optional<TriggerEvent> parse_event_name(std::string_view name);

struct Trigger {
  std::string table;  // empty for scheduled triggers
  TriggerEvent event = TriggerEvent::kCreated;
  std::optional<ConditionExpr> condition;
  std::optional<std::string> schedule;

  friend bool operator==(const Trigger&, const Trigger&) = default;
};

struct Step {
  std::string name;
  std::string annotation;
  int order = 1;
  int block = 0;  // order of the parent flow-control step; 0 = top level
  std::vector<StepInputValue> inputs;

  const StepInputValue* find_input(std::string_view input_name) const;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Workflow {
  std::string requirement;
  Trigger trigger;
  std::vector<Step> steps;

  const Step* find_step(int order) const;

  friend bool operator==(const Workflow&, const Workflow&) = default;
};

struct OutlineRow {
  std::string name;
  std::string annotation;
  int order = 1;
  int block = 0;

  friend bool operator==(const OutlineRow&, const OutlineRow&) = default;
};

/// Workflow skeleton: trigger plus step names, annotations, order and block.
struct Outline {
  Trigger trigger;
  std::vector<OutlineRow> rows;

  /// Trigger counts as a row.
  std::size_t row_count() const { return rows.size() + 1; }

  friend bool operator==(const Outline&, const Outline&) = default;
};

// Value encodings. Decoders throw SyntaxError with line/column 0 relative to
// the encoded string; document parsers rethrow with document positions.
std::string encode_text(const TextValue& text);
TextValue decode_text(std::string_view encoded);
std::string encode_ref(const OutputRef& ref);
std::string encode_conjunct(const Conjunct& conjunct);
std::string encode_condition(const ConditionExpr& condition);
ConditionExpr decode_condition(std::string_view encoded);

/// Double-quoted scalar as written by the canonical serializers.
std::string quote_scalar(std::string_view text);

Workflow parse_workflow(std::string_view text);
std::string serialize_workflow(const Workflow& workflow);

Outline extract_outline(const Workflow& workflow);
Outline parse_outline(std::string_view text);
std::string serialize_outline(const Outline& outline);

/// Document holding one step's inputs (the populateInputs target text).
std::vector<StepInputValue> parse_input_list(std::string_view text);
std::string serialize_input_list(const std::vector<StepInputValue>& inputs);

/// Steps carry the outline rows with empty input lists.
Workflow workflow_from_outline(const Outline& outline, std::string requirement);

}  // namespace flowforge
