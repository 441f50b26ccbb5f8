// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/catalog.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "yaml_support.hpp"

namespace flowforge {

namespace {

std::atomic<std::uint64_t> g_catalog_sequence{0};

std::string fnv1a_hex(const std::vector<const CatalogDocument*>& docs) {
  std::uint64_t hash = 14695981039346656037ull;
  auto mix = [&hash](std::string_view bytes) {
    for (const unsigned char c : bytes) {
      hash ^= c;
      hash *= 1099511628211ull;
    }
    hash ^= 0xff;
    hash *= 1099511628211ull;
  };
  for (const auto* doc : docs) {
    mix(doc->family);
    mix(doc->text);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string where(const CatalogDocument& doc) { return doc.path.empty() ? doc.family : doc.path; }

YAML::Node load_catalog_yaml(const CatalogDocument& doc) {
  YAML::Node root;
  try {
    root = yaml::load(doc.text);
  } catch (const Error& e) {
    throw CatalogSyntaxError(where(doc) + ": " + e.what());
  }
  if (!root || root.IsNull()) throw CatalogSyntaxError(where(doc) + ": empty document");
  if (!root.IsMap()) throw CatalogSyntaxError(where(doc) + ": expected a mapping");
  return root;
}

template <typename F>
auto wrap_syntax(const CatalogDocument& doc, F&& read) {
  try {
    return read();
  } catch (const CatalogSyntaxError&) {
    throw;
  } catch (const DanglingReference&) {
    throw;
  } catch (const DuplicateArtifact&) {
    throw;
  } catch (const Error& e) {
    throw CatalogSyntaxError(where(doc) + ": " + e.what());
  }
}

std::string opt_string(const YAML::Node& map, const char* key) {
  const YAML::Node node = map[key];
  return node ? yaml::scalar(node, key) : std::string();
}

InputDecl read_input_decl(const YAML::Node& node) {
  yaml::expect_map(node, "input declaration");
  yaml::check_keys(node, {"name", "kind", "required", "table_from", "accepts"});
  InputDecl decl;
  decl.name = yaml::required_string(node, "name");
  const YAML::Node kind = node["kind"];
  if (!kind) yaml::fail(node, "input declaration needs a kind");
  const auto parsed = parse_value_kind(yaml::scalar(kind, "kind"));
  if (!parsed) yaml::fail(kind, "unknown input kind '" + kind.Scalar() + "'");
  decl.kind = *parsed;
  if (node["required"]) decl.required = yaml::to_bool(node["required"], "required");
  decl.table_from = opt_string(node, "table_from");
  if (const YAML::Node accepts = node["accepts"]) {
    yaml::expect_sequence(accepts, "accepts");
    for (const auto& a : accepts) decl.accepts.push_back(yaml::scalar(a, "accepts"));
  } else if (decl.kind == ValueKind::kReference) {
    decl.accepts = {"record", "records"};
  }
  return decl;
}

OutputDecl read_output_decl(const YAML::Node& node) {
  yaml::expect_map(node, "output declaration");
  yaml::check_keys(node, {"name", "schema", "table_from"});
  OutputDecl decl;
  decl.name = yaml::required_string(node, "name");
  decl.schema = yaml::required_string(node, "schema");
  decl.table_from = opt_string(node, "table_from");
  return decl;
}

StepDefinition read_step_definition(const CatalogDocument& doc) {
  const YAML::Node root = load_catalog_yaml(doc);
  return wrap_syntax(doc, [&] {
    yaml::check_keys(root, {"name", "description", "flow_control", "inputs", "outputs"});
    StepDefinition def;
    def.name = yaml::required_string(root, "name");
    def.description = opt_string(root, "description");
    if (root["flow_control"]) def.flow_control = yaml::to_bool(root["flow_control"], "flow_control");
    if (const YAML::Node inputs = root["inputs"]; inputs && !inputs.IsNull()) {
      yaml::expect_sequence(inputs, "inputs");
      for (const auto& in : inputs) def.inputs.push_back(read_input_decl(in));
    }
    if (const YAML::Node outputs = root["outputs"]; outputs && !outputs.IsNull()) {
      yaml::expect_sequence(outputs, "outputs");
      for (const auto& out : outputs) def.outputs.push_back(read_output_decl(out));
    }
    return def;
  });
}

TableSchema read_table(const CatalogDocument& doc) {
  const YAML::Node root = load_catalog_yaml(doc);
  return wrap_syntax(doc, [&] {
    yaml::check_keys(root, {"name", "label", "columns"});
    TableSchema table;
    table.name = yaml::required_string(root, "name");
    table.label = opt_string(root, "label");
    if (const YAML::Node columns = root["columns"]; columns && !columns.IsNull()) {
      yaml::expect_sequence(columns, "columns");
      for (const auto& c : columns) {
        yaml::expect_map(c, "column");
        yaml::check_keys(c, {"name", "label", "reference", "values"});
        ColumnDef column;
        column.name = yaml::required_string(c, "name");
        column.label = opt_string(c, "label");
        column.reference_table = opt_string(c, "reference");
        if (const YAML::Node values = c["values"]; values && !values.IsNull()) {
          yaml::expect_sequence(values, "values");
          for (const auto& v : values) {
            yaml::expect_map(v, "value");
            yaml::check_keys(v, {"value", "label"});
            column.values.push_back({yaml::required_string(v, "value"), opt_string(v, "label")});
          }
        }
        table.columns.push_back(std::move(column));
      }
    }
    return table;
  });
}

template <typename Range, typename Key>
void require_unique(const Range& range, Key key, const std::string& what) {
  std::set<std::string> seen;
  for (const auto& item : range) {
    if (!seen.insert(key(item)).second) {
      throw DuplicateArtifact("duplicate " + what + " '" + key(item) + "'");
    }
  }
}

void check_step(const StepDefinition& def) {
  require_unique(def.inputs, [](const InputDecl& d) { return d.name; }, "input in step " + def.name);
  require_unique(def.outputs, [](const OutputDecl& d) { return d.name; },
                 "output in step " + def.name);
  auto table_source = [&](const std::string& name, const std::string& owner) {
    const InputDecl* source = def.find_input(name);
    if (source == nullptr) {
      throw DanglingReference("step " + def.name + ": " + owner + " takes its table from unknown input '" +
                              name + "'");
    }
    if (source->kind != ValueKind::kTable && source->kind != ValueKind::kReference) {
      throw DanglingReference("step " + def.name + ": input '" + name +
                              "' cannot provide a table context");
    }
  };
  for (const auto& in : def.inputs) {
    const bool needs_table = in.kind == ValueKind::kColumn || in.kind == ValueKind::kCondition;
    if (needs_table && in.table_from.empty()) {
      throw DanglingReference("step " + def.name + ": input '" + in.name +
                              "' has no table context declared");
    }
    if (!in.table_from.empty()) table_source(in.table_from, "input '" + in.name + "'");
  }
  for (const auto& out : def.outputs) {
    if (!out.table_from.empty()) table_source(out.table_from, "output '" + out.name + "'");
  }
}

void check_table(const TableSchema& table) {
  require_unique(table.columns, [](const ColumnDef& c) { return c.name; },
                 "column in table " + table.name);
  for (const auto& column : table.columns) {
    require_unique(column.values, [](const EnumValue& v) { return v.value; },
                   "value in column " + table.name + "." + column.name);
  }
}

std::string join_labels(const ColumnDef& column) {
  std::string out;
  for (const auto& v : column.values) {
    out += ' ';
    out += v.label;
  }
  return out;
}

ArtifactDoc column_doc(const TableSchema& table, const ColumnDef& column) {
  std::string text = column.name + " " + column.label + join_labels(column);
  if (!column.reference_table.empty()) text += " " + column.reference_table;
  return {"column:" + table.name + "." + column.name, ArtifactKind::kColumnName, std::move(text),
          column.name, table.name};
}

ArtifactDoc value_doc(const TableSchema& table, const ColumnDef& column, const EnumValue& value) {
  return {"value:" + table.name + "." + column.name + "=" + value.value,
          ArtifactKind::kColumnValue,
          value.value + " " + value.label + " " + column.name,
          value.value,
          table.name + "." + column.name};
}

void sort_docs(std::vector<ArtifactDoc>& docs) {
  std::sort(docs.begin(), docs.end(), [](const ArtifactDoc& a, const ArtifactDoc& b) {
    return std::tie(a.payload, a.id) < std::tie(b.payload, b.id);
  });
}

}  // namespace

std::string_view value_kind_name(ValueKind kind) {
  switch (kind) {
    case ValueKind::kText: return "text";
    case ValueKind::kTable: return "table";
    case ValueKind::kColumn: return "column";
    case ValueKind::kCondition: return "condition";
    case ValueKind::kReference: return "reference";
    case ValueKind::kEmailBody: return "email_body";
  }
  return "";
}

std::optional<ValueKind> parse_value_kind(std::string_view name) {
  for (auto kind : {ValueKind::kText, ValueKind::kTable, ValueKind::kColumn, ValueKind::kCondition,
                    ValueKind::kReference, ValueKind::kEmailBody}) {
    if (value_kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view artifact_kind_name(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::kStepName: return "STEP_NAME";
    case ArtifactKind::kTableName: return "TABLE_NAME";
    case ArtifactKind::kColumnName: return "COLUMN_NAME";
    case ArtifactKind::kColumnValue: return "COLUMN_VALUE";
  }
  return "";
}

std::optional<ArtifactKind> parse_artifact_kind(std::string_view name) {
  for (auto kind : kAllArtifactKinds) {
    if (artifact_kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

const InputDecl* StepDefinition::find_input(std::string_view input_name) const {
  for (const auto& in : inputs) {
    if (in.name == input_name) return &in;
  }
  return nullptr;
}

const OutputDecl* StepDefinition::find_output(std::string_view output_name) const {
  for (const auto& out : outputs) {
    if (out.name == output_name) return &out;
  }
  return nullptr;
}

const ColumnDef* TableSchema::find_column(std::string_view column) const {
  for (const auto& c : columns) {
    if (c.name == column) return &c;
  }
  return nullptr;
}

const StepDefinition* EnvironmentCatalog::find_step(std::string_view name) const {
  const auto it = steps_.find(std::string(name));
  return it == steps_.end() ? nullptr : &it->second;
}

const TableSchema* EnvironmentCatalog::find_table(std::string_view name) const {
  const auto it = tables_.find(std::string(name));
  return it == tables_.end() ? nullptr : &it->second;
}

EnvironmentCatalog load_catalog(const std::vector<CatalogDocument>& documents) {
  EnvironmentCatalog catalog;
  std::vector<const CatalogDocument*> ordered;
  for (const auto& doc : documents) ordered.push_back(&doc);
  std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return std::tie(a->family, a->path, a->text) < std::tie(b->family, b->path, b->text);
  });

  for (const auto* doc : ordered) {
    if (doc->family == "steps") {
      StepDefinition def = read_step_definition(*doc);
      check_step(def);
      const std::string name = def.name;
      if (!catalog.steps_.emplace(name, std::move(def)).second) {
        throw DuplicateArtifact("duplicate step '" + name + "'");
      }
    } else if (doc->family == "tables") {
      TableSchema table = read_table(*doc);
      check_table(table);
      const std::string name = table.name;
      if (!catalog.tables_.emplace(name, std::move(table)).second) {
        throw DuplicateArtifact("duplicate table '" + name + "'");
      }
    } else {
      throw CatalogSyntaxError(where(*doc) + ": unknown artifact family '" + doc->family + "'");
    }
  }
  for (const auto& [name, table] : catalog.tables_) {
    for (const auto& column : table.columns) {
      if (!column.reference_table.empty() && !catalog.tables_.count(column.reference_table)) {
        throw DanglingReference("column " + name + "." + column.name +
                                " references unknown table '" + column.reference_table + "'");
      }
    }
  }
  catalog.version_.sequence = ++g_catalog_sequence;
  catalog.version_.digest = fnv1a_hex(ordered);
  return catalog;
}

EnvironmentCatalog load_catalog_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw CatalogSyntaxError("catalog directory not found: " + dir.string());
  std::vector<CatalogDocument> documents;
  for (const char* family : {"steps", "tables"}) {
    const fs::path sub = dir / family;
    if (!fs::is_directory(sub)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(sub)) {
      if (entry.is_regular_file() && entry.path().extension() == ".yaml") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      std::ostringstream text;
      text << in.rdbuf();
      documents.push_back({family, file.filename().string(), text.str()});
    }
  }
  return load_catalog(documents);
}

std::vector<ArtifactDoc> all_artifacts(const EnvironmentCatalog& catalog, ArtifactKind kind) {
  std::vector<ArtifactDoc> docs;
  switch (kind) {
    case ArtifactKind::kStepName:
      for (const auto& [name, def] : catalog.steps()) {
        docs.push_back({"step:" + name, kind, name + " " + def.description, name, ""});
      }
      break;
    case ArtifactKind::kTableName:
      for (const auto& [name, table] : catalog.tables()) {
        docs.push_back({"table:" + name, kind, name + " " + table.label, name, ""});
      }
      break;
    case ArtifactKind::kColumnName:
      for (const auto& [name, table] : catalog.tables()) {
        for (const auto& column : table.columns) docs.push_back(column_doc(table, column));
      }
      break;
    case ArtifactKind::kColumnValue:
      for (const auto& [name, table] : catalog.tables()) {
        for (const auto& column : table.columns) {
          for (const auto& value : column.values) docs.push_back(value_doc(table, column, value));
        }
      }
      break;
  }
  sort_docs(docs);
  return docs;
}

std::vector<ArtifactDoc> list_artifacts(const EnvironmentCatalog& catalog, ArtifactKind kind,
                                        const std::optional<std::string>& scope,
                                        const ArtifactFilter& filter) {
  std::vector<ArtifactDoc> docs;
  if (kind == ArtifactKind::kStepName || kind == ArtifactKind::kTableName) {
    docs = all_artifacts(catalog, kind);
  } else {
    if (!scope || scope->empty()) {
      throw UnknownTable(std::string(artifact_kind_name(kind)) + " listing needs a table scope");
    }
    const auto dot = scope->find('.');
    const std::string table_name = scope->substr(0, dot);
    const TableSchema* table = catalog.find_table(table_name);
    if (table == nullptr) throw UnknownTable("unknown table '" + table_name + "'");
    if (kind == ArtifactKind::kColumnName) {
      if (dot != std::string::npos) throw UnknownTable("column listing scope must be a table");
      for (const auto& column : table->columns) docs.push_back(column_doc(*table, column));
    } else {
      const ColumnDef* only = nullptr;
      if (dot != std::string::npos) {
        only = table->find_column(scope->substr(dot + 1));
        if (only == nullptr) throw UnknownTable("unknown column scope '" + *scope + "'");
      }
      for (const auto& column : table->columns) {
        if (only != nullptr && &column != only) continue;
        for (const auto& value : column.values) docs.push_back(value_doc(*table, column, value));
      }
    }
    sort_docs(docs);
  }
  if (filter) std::erase_if(docs, [&](const ArtifactDoc& d) { return !filter(d); });
  return docs;
}

}  // namespace flowforge
