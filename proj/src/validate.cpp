// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/validate.hpp"

#include <set>

namespace flowforge {

namespace {

std::vector<OutputRef> refs_in(const ValueExpr& value) {
  if (const auto* text = std::get_if<TextValue>(&value)) return text->references();
  std::vector<OutputRef> refs;
  for (const auto& c : std::get<ConditionExpr>(value).conjuncts) {
    if (c.operand) {
      for (auto& r : c.operand->references()) refs.push_back(std::move(r));
    }
  }
  return refs;
}

struct OutputTarget {
  OutputDecl decl;
  std::optional<std::string> table;
};

// Output declaration a ref names, plus the table it is typed by.
std::optional<OutputTarget> find_output(const Workflow& workflow, const EnvironmentCatalog& catalog,
                                        const OutputRef& ref, int before_order) {
  const std::string name = ref.output_name();
  if (ref.is_trigger()) {
    for (const auto& out : trigger_outputs(workflow.trigger)) {
      if (out.name == name) {
        std::optional<std::string> table;
        if (!out.table_from.empty()) table = workflow.trigger.table;
        return OutputTarget{out, table};
      }
    }
    return std::nullopt;
  }
  if (ref.step >= before_order) return std::nullopt;
  const Step* step = workflow.find_step(ref.step);
  if (step == nullptr) return std::nullopt;
  const StepDefinition* def = catalog.find_step(step->name);
  if (def == nullptr) return std::nullopt;
  const OutputDecl* out = def->find_output(name);
  if (out == nullptr) return std::nullopt;
  OutputTarget target{*out, std::nullopt};
  if (!out->table_from.empty()) {
    if (const InputDecl* source = def->find_input(out->table_from)) {
      target.table = resolve_input_table(workflow, catalog, *step, *source);
    }
  }
  return target;
}

class Validator {
 public:
  Validator(const Workflow& workflow, const EnvironmentCatalog& catalog)
      : workflow_(workflow), catalog_(catalog) {}

  ValidationReport run() {
    check_trigger();
    for (std::size_t i = 0; i < workflow_.steps.size(); ++i) {
      const Step& step = workflow_.steps[i];
      if (step.order != static_cast<int>(i) + 1) {
        add(ViolationCode::kOrderGap, step.order, "",
            "step at position " + std::to_string(i + 1) + " has order " +
                std::to_string(step.order));
      }
      check_step(step);
    }
    return std::move(report_);
  }

 private:
  void add(ViolationCode code, int order, std::string input, std::string message) {
    report_.violations.push_back({code, {order, std::move(input)}, std::move(message)});
  }

  void check_trigger() {
    const Trigger& trigger = workflow_.trigger;
    if (trigger.event == TriggerEvent::kScheduled) return;
    const TableSchema* table = catalog_.find_table(trigger.table);
    if (table == nullptr) {
      add(ViolationCode::kUnknownTable, 0, "table", "unknown table '" + trigger.table + "'");
    }
    if (!trigger.condition) return;
    for (const auto& c : trigger.condition->conjuncts) {
      if (table != nullptr && table->find_column(c.column) == nullptr) {
        add(ViolationCode::kUnknownColumn, 0, "condition",
            "table " + trigger.table + " has no column '" + c.column + "'");
      }
      if (c.operand && !c.operand->references().empty()) {
        add(ViolationCode::kForwardRef, 0, "condition", "the trigger cannot reference outputs");
      }
    }
  }

  void check_step(const Step& step) {
    const StepDefinition* def = catalog_.find_step(step.name);
    if (def == nullptr) add(ViolationCode::kUnknownStep, step.order, "", "unknown step '" + step.name + "'");

    if (step.block != 0) {
      const Step* parent = workflow_.find_step(step.block);
      const StepDefinition* parent_def = parent ? catalog_.find_step(parent->name) : nullptr;
      if (parent == nullptr || step.block >= step.order || parent_def == nullptr ||
          !parent_def->flow_control) {
        add(ViolationCode::kBadBlock, step.order, "",
            "block " + std::to_string(step.block) + " is not an earlier flow-control step");
      }
    }

    for (const auto& input : step.inputs) {
      for (const auto& ref : refs_in(input.value)) check_ref(step, input.name, ref);
    }
    if (def == nullptr) return;

    std::set<std::string> seen;
    for (const auto& input : step.inputs) {
      const InputDecl* decl = def->find_input(input.name);
      if (decl == nullptr) {
        add(ViolationCode::kUnknownInputName, step.order, input.name,
            "step " + step.name + " has no input '" + input.name + "'");
        continue;
      }
      if (!seen.insert(input.name).second) {
        add(ViolationCode::kUnknownInputName, step.order, input.name,
            "input '" + input.name + "' given more than once");
        continue;
      }
      check_artifacts(step, *decl, input);
    }
    for (const auto& decl : def->inputs) {
      if (decl.required && !seen.count(decl.name)) {
        add(ViolationCode::kMissingRequiredInput, step.order, decl.name,
            "required input '" + decl.name + "' is missing");
      }
    }
  }

  void check_ref(const Step& step, const std::string& input, const OutputRef& ref) {
    if (!ref.is_trigger() && ref.step >= step.order) {
      add(ViolationCode::kForwardRef, step.order, input,
          encode_ref(ref) + " does not point to an earlier step");
      return;
    }
    auto target = find_output(workflow_, catalog_, ref, step.order);
    if (!target) {
      const Step* referenced = ref.is_trigger() ? nullptr : workflow_.find_step(ref.step);
      if (!ref.is_trigger() && referenced != nullptr && catalog_.find_step(referenced->name) == nullptr) {
        return;  // already reported as UNKNOWN_STEP
      }
      add(ViolationCode::kBadOutputPath, step.order, input,
          encode_ref(ref) + " names no output of the referenced step");
      return;
    }
    const auto segments = ref.segments();
    std::optional<std::string> table = target->table;
    for (std::size_t i = 1; i < segments.size(); ++i) {
      if (!table) {
        if (target->decl.table_from.empty() || i > 1) {
          add(ViolationCode::kBadOutputPath, step.order, input,
              encode_ref(ref) + " descends into a value without fields");
        }
        return;
      }
      const TableSchema* schema = catalog_.find_table(*table);
      if (schema == nullptr) return;  // reported at the table input
      const ColumnDef* column = schema->find_column(segments[i]);
      if (column == nullptr) {
        add(ViolationCode::kBadOutputPath, step.order, input,
            encode_ref(ref) + ": table " + *table + " has no column '" + segments[i] + "'");
        return;
      }
      table = column->reference_table.empty() ? std::nullopt
                                              : std::optional<std::string>(column->reference_table);
    }
  }

  void check_artifacts(const Step& step, const InputDecl& decl, const StepInputValue& input) {
    if (decl.kind == ValueKind::kTable) {
      const auto* text = std::get_if<TextValue>(&input.value);
      if (text != nullptr && text->is_literal() && !catalog_.find_table(text->literal_text())) {
        add(ViolationCode::kUnknownTable, step.order, input.name,
            "unknown table '" + text->literal_text() + "'");
      }
      return;
    }
    if (decl.kind != ValueKind::kColumn && decl.kind != ValueKind::kCondition) return;
    const auto table_name = resolve_input_table(workflow_, catalog_, step, decl);
    const TableSchema* table = table_name ? catalog_.find_table(*table_name) : nullptr;
    if (table == nullptr) return;
    auto check_column = [&](const std::string& column) {
      if (table->find_column(column) == nullptr) {
        add(ViolationCode::kUnknownColumn, step.order, input.name,
            "table " + table->name + " has no column '" + column + "'");
      }
    };
    if (const auto* cond = std::get_if<ConditionExpr>(&input.value)) {
      for (const auto& c : cond->conjuncts) check_column(c.column);
    } else if (const auto& text = std::get<TextValue>(input.value); text.is_literal()) {
      check_column(text.literal_text());
    }
  }

  const Workflow& workflow_;
  const EnvironmentCatalog& catalog_;
  ValidationReport report_;
};

}  // namespace

std::string_view violation_code_name(ViolationCode code) {
  switch (code) {
    case ViolationCode::kUnknownStep: return "UNKNOWN_STEP";
    case ViolationCode::kUnknownTable: return "UNKNOWN_TABLE";
    case ViolationCode::kUnknownColumn: return "UNKNOWN_COLUMN";
    case ViolationCode::kForwardRef: return "FORWARD_REF";
    case ViolationCode::kBadBlock: return "BAD_BLOCK";
    case ViolationCode::kOrderGap: return "ORDER_GAP";
    case ViolationCode::kUnknownInputName: return "UNKNOWN_INPUT_NAME";
    case ViolationCode::kMissingRequiredInput: return "MISSING_REQUIRED_INPUT";
    case ViolationCode::kBadOutputPath: return "BAD_OUTPUT_PATH";
  }
  return "";
}

std::string Location::to_string() const {
  std::string out = step_order == 0 ? std::string("trigger") : "step " + std::to_string(step_order);
  if (!input.empty()) out += " input '" + input + "'";
  return out;
}

bool ValidationReport::has(ViolationCode code) const { return count(code) > 0; }

std::size_t ValidationReport::count(ViolationCode code) const {
  std::size_t n = 0;
  for (const auto& v : violations) n += v.code == code ? 1 : 0;
  return n;
}

ValidationReport validate_workflow(const Workflow& workflow, const EnvironmentCatalog& catalog) {
  return Validator(workflow, catalog).run();
}

std::vector<OutputDecl> trigger_outputs(const Trigger& trigger) {
  if (trigger.event == TriggerEvent::kScheduled) return {{"run_time", "text", ""}};
  return {{"record", "record", "table"}};
}

std::optional<std::string> resolve_ref_table(const Workflow& workflow,
                                             const EnvironmentCatalog& catalog,
                                             const OutputRef& ref, int before_order) {
  auto target = find_output(workflow, catalog, ref, before_order);
  if (!target || !target->table) return std::nullopt;
  std::string table = *target->table;
  const auto segments = ref.segments();
  for (std::size_t i = 1; i < segments.size(); ++i) {
    const TableSchema* schema = catalog.find_table(table);
    const ColumnDef* column = schema ? schema->find_column(segments[i]) : nullptr;
    if (column == nullptr || column->reference_table.empty()) return std::nullopt;
    table = column->reference_table;
  }
  return table;
}

std::optional<std::string> resolve_input_table(const Workflow& workflow,
                                               const EnvironmentCatalog& catalog,
                                               const Step& step, const InputDecl& decl) {
  const StepDefinition* def = catalog.find_step(step.name);
  if (def == nullptr) return std::nullopt;
  const InputDecl* source = nullptr;
  if (decl.kind == ValueKind::kTable || decl.kind == ValueKind::kReference) {
    source = &decl;
  } else if (!decl.table_from.empty()) {
    source = def->find_input(decl.table_from);
  }
  if (source == nullptr) return std::nullopt;
  const StepInputValue* value = step.find_input(source->name);
  if (value == nullptr) return std::nullopt;
  const auto* text = std::get_if<TextValue>(&value->value);
  if (text == nullptr) return std::nullopt;
  if (source->kind == ValueKind::kTable) {
    if (!text->is_literal() || text->empty()) return std::nullopt;
    return text->literal_text();
  }
  if (const OutputRef* ref = text->as_reference()) {
    return resolve_ref_table(workflow, catalog, *ref, step.order);
  }
  return std::nullopt;
}

std::vector<ArtifactField> collect_artifact_fields(const Workflow& workflow,
                                                   const EnvironmentCatalog& catalog) {
  std::vector<ArtifactField> fields;
  auto add_condition = [&](const ConditionExpr& cond, const std::string& table, int order,
                           const std::string& input) {
    for (const auto& c : cond.conjuncts) {
      fields.push_back({ArtifactKind::kColumnName, c.column, table, order, input});
      if (!c.operand || !c.operand->is_literal()) continue;
      const TableSchema* schema = catalog.find_table(table);
      const ColumnDef* column = schema ? schema->find_column(c.column) : nullptr;
      if (column != nullptr && !column->values.empty()) {
        fields.push_back({ArtifactKind::kColumnValue, c.operand->literal_text(),
                          table + "." + c.column, order, input});
      }
    }
  };
  auto add_path_columns = [&](const OutputRef& ref, int order, const std::string& input) {
    const auto segments = ref.segments();
    if (segments.size() < 2) return;
    OutputRef prefix{ref.step, segments[0]};
    for (std::size_t i = 1; i < segments.size(); ++i) {
      const auto table = resolve_ref_table(workflow, catalog, prefix, order);
      if (!table) return;
      ArtifactField field{ArtifactKind::kColumnName, segments[i], *table, order, input};
      field.from_path = true;
      fields.push_back(std::move(field));
      prefix.path += "." + segments[i];
    }
  };

  const Trigger& trigger = workflow.trigger;
  if (trigger.event != TriggerEvent::kScheduled) {
    fields.push_back({ArtifactKind::kTableName, trigger.table, "", 0, "table"});
    if (trigger.condition) add_condition(*trigger.condition, trigger.table, 0, "condition");
  }
  for (const auto& step : workflow.steps) {
    fields.push_back({ArtifactKind::kStepName, step.name, "", step.order, ""});
    const StepDefinition* def = catalog.find_step(step.name);
    for (const auto& input : step.inputs) {
      for (const auto& ref : refs_in(input.value)) add_path_columns(ref, step.order, input.name);
      const InputDecl* decl = def ? def->find_input(input.name) : nullptr;
      if (decl == nullptr) continue;
      const auto* text = std::get_if<TextValue>(&input.value);
      if (decl->kind == ValueKind::kTable && text != nullptr && text->is_literal()) {
        fields.push_back({ArtifactKind::kTableName, text->literal_text(), "", step.order, input.name});
        continue;
      }
      if (decl->kind != ValueKind::kColumn && decl->kind != ValueKind::kCondition) continue;
      const auto table = resolve_input_table(workflow, catalog, step, *decl);
      if (!table) continue;
      if (const auto* cond = std::get_if<ConditionExpr>(&input.value)) {
        add_condition(*cond, *table, step.order, input.name);
      } else if (text != nullptr && text->is_literal()) {
        fields.push_back({ArtifactKind::kColumnName, text->literal_text(), *table, step.order, input.name});
      }
    }
  }
  return fields;
}

bool artifact_exists(const ArtifactField& field, const EnvironmentCatalog& catalog) {
  switch (field.kind) {
    case ArtifactKind::kStepName: return catalog.find_step(field.value) != nullptr;
    case ArtifactKind::kTableName: return catalog.find_table(field.value) != nullptr;
    case ArtifactKind::kColumnName: {
      const TableSchema* table = catalog.find_table(field.scope);
      return table != nullptr && table->find_column(field.value) != nullptr;
    }
    case ArtifactKind::kColumnValue: {
      const auto dot = field.scope.find('.');
      const TableSchema* table = catalog.find_table(field.scope.substr(0, dot));
      const ColumnDef* column =
          table && dot != std::string::npos ? table->find_column(field.scope.substr(dot + 1)) : nullptr;
      if (column == nullptr) return false;
      for (const auto& v : column->values) {
        if (v.value == field.value) return true;
      }
      return false;
    }
  }
  return false;
}

}  // namespace flowforge
