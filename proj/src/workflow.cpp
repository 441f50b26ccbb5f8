// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/workflow.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "flowforge/errors.hpp"
#include "yaml_support.hpp"

namespace flowforge {

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_identifier(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_ident_char);
}

[[noreturn]] void value_error(const std::string& message, std::size_t offset) {
  throw SyntaxError(message, 1, static_cast<int>(offset) + 1);
}

OutputRef decode_ref_body(std::string_view body, std::size_t offset) {
  const auto dot = body.find('.');
  if (dot == std::string_view::npos) value_error("output reference needs a path", offset);
  const std::string_view step = body.substr(0, dot);
  const std::string_view path = body.substr(dot + 1);
  OutputRef ref;
  if (step == "trigger") {
    ref.step = kTriggerStep;
  } else {
    int order = 0;
    auto [ptr, ec] = std::from_chars(step.data(), step.data() + step.size(), order);
    if (ec != std::errc() || ptr != step.data() + step.size() || order < 1) {
      value_error("output reference must start with 'trigger' or a step order", offset);
    }
    ref.step = order;
  }
  std::size_t start = 0;
  while (true) {
    const auto next = path.find('.', start);
    const auto part = path.substr(start, next == std::string_view::npos ? path.npos : next - start);
    if (!is_identifier(part)) value_error("malformed output path", offset);
    if (next == std::string_view::npos) break;
    start = next + 1;
  }
  ref.path = std::string(path);
  return ref;
}

std::string quote(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('"');
  for (const char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\x%02x", c);
          out += buf;
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
  return out;
}

template <typename F>
auto with_value_position(const YAML::Node& node, F&& decode) {
  try {
    return decode();
  } catch (const SyntaxError& e) {
    yaml::fail(node, std::string("invalid value: ") + e.what());
  }
}

// --- readers ---------------------------------------------------------------

Trigger read_trigger(const YAML::Node& node) {
  yaml::expect_map(node, "trigger");
  yaml::check_keys(node, {"table", "event", "condition", "schedule"});
  Trigger trigger;
  const YAML::Node event = node["event"];
  if (!event) yaml::fail(node, "trigger needs an event");
  const auto parsed = parse_event_name(yaml::scalar(event, "event"));
  if (!parsed) yaml::fail(event, "event must be created, updated or scheduled");
  trigger.event = *parsed;
  if (trigger.event == TriggerEvent::kScheduled) {
    if (node["table"] || node["condition"]) {
      yaml::fail(node, "scheduled triggers take no table or condition");
    }
    if (!node["schedule"]) yaml::fail(node, "scheduled trigger needs a schedule");
    trigger.schedule = yaml::scalar(node["schedule"], "schedule");
  } else {
    if (node["schedule"]) yaml::fail(node["schedule"], "schedule is only valid for scheduled triggers");
    trigger.table = yaml::required_string(node, "table");
    if (const YAML::Node cond = node["condition"]) {
      const std::string encoded = yaml::scalar(cond, "condition");
      trigger.condition = with_value_position(cond, [&] { return decode_condition(encoded); });
    }
  }
  return trigger;
}

StepInputValue read_input(const YAML::Node& node) {
  yaml::expect_map(node, "input");
  yaml::check_keys(node, {"name", "value", "condition"});
  StepInputValue input;
  input.name = yaml::required_string(node, "name");
  const YAML::Node value = node["value"];
  const YAML::Node condition = node["condition"];
  if (value && condition) yaml::fail(node, "input has both value and condition");
  if (value) {
    const std::string encoded = yaml::scalar(value, "value");
    input.value = with_value_position(value, [&] { return decode_text(encoded); });
  } else if (condition) {
    const std::string encoded = yaml::scalar(condition, "condition");
    input.value = with_value_position(condition, [&] { return decode_condition(encoded); });
  } else {
    yaml::fail(node, "input needs a value or a condition");
  }
  return input;
}

std::vector<StepInputValue> read_inputs(const YAML::Node& node) {
  std::vector<StepInputValue> inputs;
  if (!node || node.IsNull()) return inputs;
  yaml::expect_sequence(node, "inputs");
  for (const auto& item : node) inputs.push_back(read_input(item));
  return inputs;
}

int read_order(const YAML::Node& node) {
  const int order = yaml::to_int(node, "order");
  if (order < 1) yaml::fail(node, "order must be a positive integer");
  return order;
}

int read_block(const YAML::Node& node) {
  if (!node) return 0;
  const int block = yaml::to_int(node, "block");
  if (block < 0) yaml::fail(node, "block must be non-negative");
  return block;
}

std::string optional_string(const YAML::Node& map, const char* key) {
  const YAML::Node node = map[key];
  return node ? yaml::scalar(node, key) : std::string();
}

Step read_step(const YAML::Node& node) {
  yaml::expect_map(node, "step");
  yaml::check_keys(node, {"name", "annotation", "order", "block", "inputs"});
  Step step;
  step.name = yaml::required_string(node, "name");
  step.annotation = optional_string(node, "annotation");
  if (!node["order"]) yaml::fail(node, "step needs an order");
  step.order = read_order(node["order"]);
  step.block = read_block(node["block"]);
  step.inputs = read_inputs(node["inputs"]);
  return step;
}

OutlineRow read_outline_row(const YAML::Node& node) {
  yaml::expect_map(node, "outline step");
  yaml::check_keys(node, {"annotation", "name", "order", "block"});
  OutlineRow row;
  row.annotation = optional_string(node, "annotation");
  row.name = yaml::required_string(node, "name");
  if (!node["order"]) yaml::fail(node, "step needs an order");
  row.order = read_order(node["order"]);
  row.block = read_block(node["block"]);
  return row;
}

template <typename Item, typename Reader>
std::vector<Item> read_ordered(const YAML::Node& node, Reader reader) {
  std::vector<Item> items;
  if (!node || node.IsNull()) return items;
  yaml::expect_sequence(node, "steps");
  std::set<int> seen;
  for (const auto& entry : node) {
    Item item = reader(entry);
    if (!seen.insert(item.order).second) throw DuplicateOrder(item.order);
    items.push_back(std::move(item));
  }
  return items;
}

YAML::Node load_document(std::string_view text) {
  YAML::Node root = yaml::load(text);
  if (!root || root.IsNull()) throw SyntaxError("empty document", 1, 1);
  yaml::expect_map(root, "document");
  return root;
}

// --- writers ---------------------------------------------------------------

void write_trigger(std::ostringstream& out, const Trigger& trigger) {
  out << "trigger:\n";
  if (trigger.event != TriggerEvent::kScheduled) out << "  table: " << quote(trigger.table) << "\n";
  out << "  event: " << quote(event_name(trigger.event)) << "\n";
  if (trigger.condition) out << "  condition: " << quote(encode_condition(*trigger.condition)) << "\n";
  if (trigger.schedule) out << "  schedule: " << quote(*trigger.schedule) << "\n";
}

void write_inputs(std::ostringstream& out, const std::vector<StepInputValue>& inputs,
                  const std::string& indent) {
  if (inputs.empty()) {
    out << indent << "inputs: []\n";
    return;
  }
  out << indent << "inputs:\n";
  for (const auto& input : inputs) {
    out << indent << "  - name: " << quote(input.name) << "\n";
    if (const auto* text = std::get_if<TextValue>(&input.value)) {
      out << indent << "    value: " << quote(encode_text(*text)) << "\n";
    } else {
      out << indent << "    condition: "
          << quote(encode_condition(std::get<ConditionExpr>(input.value))) << "\n";
    }
  }
}

}  // namespace

// --- value model -------------------------------------------------------------

std::string OutputRef::output_name() const { return path.substr(0, path.find('.')); }

std::vector<std::string> OutputRef::segments() const {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto next = path.find('.', start);
    parts.push_back(path.substr(start, next == std::string::npos ? std::string::npos : next - start));
    if (next == std::string::npos) break;
    start = next + 1;
  }
  return parts;
}

TextValue TextValue::literal(std::string text) {
  TextValue value;
  value.append(std::move(text));
  return value;
}

TextValue TextValue::reference(OutputRef ref) {
  TextValue value;
  value.append(std::move(ref));
  return value;
}

bool TextValue::is_literal() const {
  return segments.empty() ||
         (segments.size() == 1 && std::holds_alternative<std::string>(segments.front()));
}

bool TextValue::is_reference() const {
  return segments.size() == 1 && std::holds_alternative<OutputRef>(segments.front());
}

std::string TextValue::literal_text() const {
  std::string out;
  for (const auto& seg : segments) {
    if (const auto* s = std::get_if<std::string>(&seg)) out += *s;
  }
  return out;
}

const OutputRef* TextValue::as_reference() const {
  return is_reference() ? &std::get<OutputRef>(segments.front()) : nullptr;
}

std::vector<OutputRef> TextValue::references() const {
  std::vector<OutputRef> refs;
  for (const auto& seg : segments) {
    if (const auto* r = std::get_if<OutputRef>(&seg)) refs.push_back(*r);
  }
  return refs;
}

void TextValue::append(Segment segment) {
  if (auto* s = std::get_if<std::string>(&segment)) {
    if (s->empty()) return;
    if (!segments.empty()) {
      if (auto* last = std::get_if<std::string>(&segments.back())) {
        *last += *s;
        return;
      }
    }
  }
  segments.push_back(std::move(segment));
}

bool op_takes_operand(ConditionOp op) {
  return op != ConditionOp::kIsEmpty && op != ConditionOp::kIsNotEmpty;
}

std::string_view op_token(ConditionOp op) {
  switch (op) {
    case ConditionOp::kEq: return "=";
    case ConditionOp::kNeq: return "!=";
    case ConditionOp::kGt: return ">";
    case ConditionOp::kLt: return "<";
    case ConditionOp::kIsEmpty: return "ISEMPTY";
    case ConditionOp::kIsNotEmpty: return "ISNOTEMPTY";
  }
  return "";
}

std::string_view op_name(ConditionOp op) {
  switch (op) {
    case ConditionOp::kEq: return "EQ";
    case ConditionOp::kNeq: return "NEQ";
    case ConditionOp::kGt: return "GT";
    case ConditionOp::kLt: return "LT";
    case ConditionOp::kIsEmpty: return "ISEMPTY";
    case ConditionOp::kIsNotEmpty: return "ISNOTEMPTY";
  }
  return "";
}

std::string_view event_name(TriggerEvent event) {
  switch (event) {
    case TriggerEvent::kCreated: return "created";
    case TriggerEvent::kUpdated: return "updated";
    case TriggerEvent::kScheduled: return "scheduled";
  }
  return "";
}

std::optional<TriggerEvent> parse_event_name(std::string_view name) {
  if (name == "created") return TriggerEvent::kCreated;
  if (name == "updated") return TriggerEvent::kUpdated;
  if (name == "scheduled") return TriggerEvent::kScheduled;
  return std::nullopt;
}

std::string encode_ref(const OutputRef& ref) {
  std::string out = "{{";
  out += ref.is_trigger() ? std::string("trigger") : std::to_string(ref.step);
  out += '.';
  out += ref.path;
  out += "}}";
  return out;
}

std::string encode_text(const TextValue& text) {
  std::string out;
  for (std::size_t i = 0; i < text.segments.size(); ++i) {
    const auto& seg = text.segments[i];
    if (const auto* lit = std::get_if<std::string>(&seg)) {
      if (lit->find("{{") != std::string::npos ||
          (!lit->empty() && lit->back() == '{' && i + 1 < text.segments.size())) {
        throw std::invalid_argument("literal text cannot contain '{{'");
      }
      out += *lit;
    } else {
      out += encode_ref(std::get<OutputRef>(seg));
    }
  }
  return out;
}

TextValue decode_text(std::string_view encoded) {
  TextValue value;
  std::size_t pos = 0;
  while (pos < encoded.size()) {
    const auto open = encoded.find("{{", pos);
    if (open == std::string_view::npos) {
      value.append(std::string(encoded.substr(pos)));
      break;
    }
    value.append(std::string(encoded.substr(pos, open - pos)));
    const auto close = encoded.find("}}", open + 2);
    if (close == std::string_view::npos) value_error("unterminated '{{'", open);
    value.append(decode_ref_body(encoded.substr(open + 2, close - open - 2), open));
    pos = close + 2;
  }
  return value;
}

std::string encode_conjunct(const Conjunct& conjunct) {
  if (!is_identifier(conjunct.column)) throw std::invalid_argument("malformed column name");
  std::string out = conjunct.column;
  out += op_token(conjunct.op);
  if (op_takes_operand(conjunct.op)) {
    if (!conjunct.operand || conjunct.operand->empty()) {
      throw std::invalid_argument("operator needs an operand");
    }
    const std::string operand = encode_text(*conjunct.operand);
    if (operand.find('^') != std::string::npos) throw std::invalid_argument("operand contains '^'");
    out += operand;
  } else if (conjunct.operand) {
    throw std::invalid_argument("operator takes no operand");
  }
  return out;
}

std::string encode_condition(const ConditionExpr& condition) {
  std::string out;
  for (std::size_t i = 0; i < condition.conjuncts.size(); ++i) {
    if (i > 0) out += '^';
    out += encode_conjunct(condition.conjuncts[i]);
  }
  return out;
}

ConditionExpr decode_condition(std::string_view encoded) {
  ConditionExpr condition;
  if (encoded.empty()) return condition;
  std::size_t start = 0;
  while (true) {
    const auto caret = encoded.find('^', start);
    const auto part =
        encoded.substr(start, caret == std::string_view::npos ? encoded.npos : caret - start);
    std::size_t ident = 0;
    while (ident < part.size() && is_ident_char(part[ident])) ++ident;
    Conjunct conjunct;
    const std::string_view rest = part.substr(ident);
    if (rest.empty()) {
      const std::string_view column = part;
      if (column.ends_with("ISNOTEMPTY")) {
        conjunct.op = ConditionOp::kIsNotEmpty;
        conjunct.column = std::string(column.substr(0, column.size() - 10));
      } else if (column.ends_with("ISEMPTY")) {
        conjunct.op = ConditionOp::kIsEmpty;
        conjunct.column = std::string(column.substr(0, column.size() - 7));
      } else {
        value_error("conjunct has no operator", start);
      }
    } else {
      conjunct.column = std::string(part.substr(0, ident));
      std::size_t token = 0;
      if (rest.starts_with("!=")) {
        conjunct.op = ConditionOp::kNeq;
        token = 2;
      } else if (rest.starts_with("=")) {
        conjunct.op = ConditionOp::kEq;
        token = 1;
      } else if (rest.starts_with(">")) {
        conjunct.op = ConditionOp::kGt;
        token = 1;
      } else if (rest.starts_with("<")) {
        conjunct.op = ConditionOp::kLt;
        token = 1;
      } else {
        value_error("unknown operator", start + ident);
      }
      const std::string_view operand = rest.substr(token);
      if (operand.empty()) value_error("operator needs an operand", start + ident);
      conjunct.operand = decode_text(operand);
    }
    if (conjunct.column.empty()) value_error("conjunct has no column", start);
    condition.conjuncts.push_back(std::move(conjunct));
    if (caret == std::string_view::npos) break;
    start = caret + 1;
  }
  return condition;
}

// --- documents ---------------------------------------------------------------

const StepInputValue* Step::find_input(std::string_view input_name) const {
  for (const auto& input : inputs) {
    if (input.name == input_name) return &input;
  }
  return nullptr;
}

const Step* Workflow::find_step(int order) const {
  for (const auto& step : steps) {
    if (step.order == order) return &step;
  }
  return nullptr;
}

Workflow parse_workflow(std::string_view text) {
  const YAML::Node root = load_document(text);
  yaml::check_keys(root, {"requirement", "trigger", "steps"});
  Workflow workflow;
  workflow.requirement = optional_string(root, "requirement");
  if (!root["trigger"]) yaml::fail(root, "workflow needs a trigger");
  workflow.trigger = read_trigger(root["trigger"]);
  workflow.steps = read_ordered<Step>(root["steps"], read_step);
  return workflow;
}

std::string serialize_workflow(const Workflow& workflow) {
  std::ostringstream out;
  out << "requirement: " << quote(workflow.requirement) << "\n";
  write_trigger(out, workflow.trigger);
  if (workflow.steps.empty()) {
    out << "steps: []\n";
    return out.str();
  }
  out << "steps:\n";
  for (const auto& step : workflow.steps) {
    out << "  - name: " << quote(step.name) << "\n";
    out << "    annotation: " << quote(step.annotation) << "\n";
    out << "    order: " << step.order << "\n";
    out << "    block: " << step.block << "\n";
    write_inputs(out, step.inputs, "    ");
  }
  return out.str();
}

std::string quote_scalar(std::string_view text) { return quote(text); }

Outline extract_outline(const Workflow& workflow) {
  Outline outline;
  outline.trigger = workflow.trigger;
  outline.rows.reserve(workflow.steps.size());
  for (const auto& step : workflow.steps) {
    outline.rows.push_back({step.name, step.annotation, step.order, step.block});
  }
  return outline;
}

Outline parse_outline(std::string_view text) {
  const YAML::Node root = load_document(text);
  yaml::check_keys(root, {"trigger", "steps"});
  Outline outline;
  if (!root["trigger"]) yaml::fail(root, "outline needs a trigger");
  outline.trigger = read_trigger(root["trigger"]);
  outline.rows = read_ordered<OutlineRow>(root["steps"], read_outline_row);
  return outline;
}

std::string serialize_outline(const Outline& outline) {
  std::ostringstream out;
  write_trigger(out, outline.trigger);
  if (outline.rows.empty()) {
    out << "steps: []\n";
    return out.str();
  }
  out << "steps:\n";
  for (const auto& row : outline.rows) {
    out << "  - annotation: " << quote(row.annotation) << "\n";
    out << "    name: " << quote(row.name) << "\n";
    out << "    order: " << row.order << "\n";
    out << "    block: " << row.block << "\n";
  }
  return out.str();
}

std::vector<StepInputValue> parse_input_list(std::string_view text) {
  const YAML::Node root = load_document(text);
  yaml::check_keys(root, {"inputs"});
  return read_inputs(root["inputs"]);
}

std::string serialize_input_list(const std::vector<StepInputValue>& inputs) {
  std::ostringstream out;
  write_inputs(out, inputs, "");
  return out.str();
}

Workflow workflow_from_outline(const Outline& outline, std::string requirement) {
  Workflow workflow;
  workflow.requirement = std::move(requirement);
  workflow.trigger = outline.trigger;
  for (const auto& row : outline.rows) {
    workflow.steps.push_back({row.name, row.annotation, row.order, row.block, {}});
  }
  return workflow;
}

}  // namespace flowforge
