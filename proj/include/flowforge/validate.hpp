// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/catalog.hpp"
#include "flowforge/workflow.hpp"

namespace flowforge {

enum class ViolationCode {
  kUnknownStep,
  kUnknownTable,
  kUnknownColumn,
  kForwardRef,
  kBadBlock,
  kOrderGap,
  kUnknownInputName,
  kMissingRequiredInput,
  kBadOutputPath,
};

inline constexpr ViolationCode kAllViolationCodes[] = {
    ViolationCode::kUnknownStep,      ViolationCode::kUnknownTable,
    ViolationCode::kUnknownColumn,    ViolationCode::kForwardRef,
    ViolationCode::kBadBlock,         ViolationCode::kOrderGap,
    ViolationCode::kUnknownInputName, ViolationCode::kMissingRequiredInput,
    ViolationCode::kBadOutputPath};

std::string_view violation_code_name(ViolationCode code);

/// Where a violation sits. `step_order` is 0 for the trigger.
struct Location {
  int step_order = 0;
  std::string input;

  std::string to_string() const;
};

struct Violation {
  ViolationCode code;
  Location location;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationCode code) const;
  std::size_t count(ViolationCode code) const;
};

ValidationReport validate_workflow(const Workflow& workflow, const EnvironmentCatalog& catalog);

/// Outputs exposed by a trigger: `record` for record triggers (typed by the
/// trigger table), `run_time` for scheduled ones.
std::vector<OutputDecl> trigger_outputs(const Trigger& trigger);

/// Table a reference points into (following reference columns along the
/// path). Only refs to steps ordered before `before_order` are followed.
std::optional<std::string> resolve_ref_table(const Workflow& workflow,
                                             const EnvironmentCatalog& catalog,
                                             const OutputRef& ref, int before_order);

/// Table context of a column/condition input, via its `table_from` sibling.
std::optional<std::string> resolve_input_table(const Workflow& workflow,
                                               const EnvironmentCatalog& catalog,
                                               const Step& step, const InputDecl& decl);

/// Environment artifact occurrence inside a workflow.
struct ArtifactField {
  ArtifactKind kind;
  std::string value;
  std::string scope;  // "", table, or table.column
  int step_order = 0;
  std::string input;
  bool from_path = false;  // column named inside an output reference path
};

/// Every step/table/column/value name used by the workflow, in document order.
std::vector<ArtifactField> collect_artifact_fields(const Workflow& workflow,
                                                   const EnvironmentCatalog& catalog);

/// True when the field names an artifact present in the catalog.
bool artifact_exists(const ArtifactField& field, const EnvironmentCatalog& catalog);

}  // namespace flowforge
