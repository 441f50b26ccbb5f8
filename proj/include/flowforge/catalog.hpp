// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/errors.hpp"

namespace flowforge {

class CatalogSyntaxError : public Error {
 public:
  explicit CatalogSyntaxError(const std::string& message) : Error("CatalogSyntaxError", message) {}
};

class DuplicateArtifact : public Error {
 public:
  explicit DuplicateArtifact(const std::string& message) : Error("DuplicateArtifact", message) {}
};

class DanglingReference : public Error {
 public:
  explicit DanglingReference(const std::string& message) : Error("DanglingReference", message) {}
};

class UnknownTable : public Error {
 public:
  explicit UnknownTable(const std::string& message) : Error("UnknownTable", message) {}
};

enum class ValueKind { kText, kTable, kColumn, kCondition, kReference, kEmailBody };

std::string_view value_kind_name(ValueKind kind);
std::optional<ValueKind> parse_value_kind(std::string_view name);

struct InputDecl {
  std::string name;
  ValueKind kind = ValueKind::kText;
  bool required = false;
  /// For column/condition inputs: the sibling input (table- or reference-kind)
  /// that fixes the table the column names belong to.
  std::string table_from;
  /// For reference inputs: output schemas this input accepts.
  std::vector<std::string> accepts;
};

struct OutputDecl {
  std::string name;
  std::string schema;  // "record", "records", "text", "number", ...
  /// Input whose resolved table types this output (record-like schemas).
  std::string table_from;
};

struct StepDefinition {
  std::string name;
  std::string description;
  bool flow_control = false;
  std::vector<InputDecl> inputs;
  std::vector<OutputDecl> outputs;

  const InputDecl* find_input(std::string_view input_name) const;
  const OutputDecl* find_output(std::string_view output_name) const;
};

struct EnumValue {
  std::string value;  // stored value, e.g. "3"
  std::string label;  // display label, e.g. "Closed Complete"
};

struct ColumnDef {
  std::string name;
  std::string label;
  std::vector<EnumValue> values;  // empty for free-form columns
  std::string reference_table;    // set for columns pointing at another table
};

struct TableSchema {
  std::string name;
  std::string label;
  std::vector<ColumnDef> columns;

  const ColumnDef* find_column(std::string_view column) const;
};

/// Identity of one loaded catalog. `sequence` increases on every load in a
/// process; `digest` fingerprints file contents and survives process restarts.
struct CatalogVersion {
  std::uint64_t sequence = 0;
  std::string digest;

  friend bool operator==(const CatalogVersion&, const CatalogVersion&) = default;
};

enum class ArtifactKind { kStepName, kTableName, kColumnName, kColumnValue };

inline constexpr ArtifactKind kAllArtifactKinds[] = {
    ArtifactKind::kStepName, ArtifactKind::kTableName, ArtifactKind::kColumnName,
    ArtifactKind::kColumnValue};

std::string_view artifact_kind_name(ArtifactKind kind);
std::optional<ArtifactKind> parse_artifact_kind(std::string_view name);

/// Indexable document for one environment artifact.
struct ArtifactDoc {
  std::string id;
  ArtifactKind kind = ArtifactKind::kStepName;
  std::string text;     // surface text used for matching
  std::string payload;  // exact string injected into generation
  std::string scope;    // table for columns, "table.column" for values
};

using ArtifactFilter = std::function<bool(const ArtifactDoc&)>;

/// One catalog source document; `family` is "steps" or "tables".
struct CatalogDocument {
  std::string family;
  std::string path;
  std::string text;
};

class EnvironmentCatalog {
 public:
  const std::map<std::string, StepDefinition>& steps() const { return steps_; }
  const std::map<std::string, TableSchema>& tables() const { return tables_; }
  const CatalogVersion& version() const { return version_; }

  const StepDefinition* find_step(std::string_view name) const;
  const TableSchema* find_table(std::string_view name) const;

 private:
  friend EnvironmentCatalog load_catalog(const std::vector<CatalogDocument>& documents);

  std::map<std::string, StepDefinition> steps_;
  std::map<std::string, TableSchema> tables_;
  CatalogVersion version_;
};

EnvironmentCatalog load_catalog(const std::vector<CatalogDocument>& documents);

/// Reads `<dir>/steps/*.yaml` and `<dir>/tables/*.yaml`.
EnvironmentCatalog load_catalog_dir(const std::filesystem::path& dir);

/// Name-sorted artifact listing. COLUMN_NAME needs a table scope; COLUMN_VALUE
/// accepts "table" or "table.column".
std::vector<ArtifactDoc> list_artifacts(const EnvironmentCatalog& catalog, ArtifactKind kind,
                                        const std::optional<std::string>& scope = std::nullopt,
                                        const ArtifactFilter& filter = {});

/// Every artifact of `kind` regardless of scope (used to build indexes).
std::vector<ArtifactDoc> all_artifacts(const EnvironmentCatalog& catalog, ArtifactKind kind);

}  // namespace flowforge
