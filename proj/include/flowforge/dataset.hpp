// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "flowforge/catalog.hpp"
#include "flowforge/errors.hpp"
#include "flowforge/generation.hpp"
#include "flowforge/json_io.hpp"
#include "flowforge/retriever.hpp"
#include "flowforge/workflow.hpp"

namespace flowforge {

class InvalidCorpusItem : public Error {
 public:
  InvalidCorpusItem(std::size_t index, const std::string& id, const std::string& reason)
      : Error("InvalidCorpusItem", "corpus item " + std::to_string(index) + " (" + id + "): " + reason),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A complete, annotated workflow; the requirement lives in the workflow.
struct LabeledWorkflow {
  std::string id;
  Workflow workflow;

  friend bool operator==(const LabeledWorkflow&, const LabeledWorkflow&) = default;
};

/// Reads `<dir>/*.flow.yaml` sorted by file name; ids are the file stems.
std::vector<LabeledWorkflow> load_corpus(const std::filesystem::path& dir);

/// Throws InvalidCorpusItem for the first item that fails validation or has
/// a step without an annotation.
void check_corpus(const std::vector<LabeledWorkflow>& corpus, const EnvironmentCatalog& catalog);

struct CreateFlowSample {
  std::string id;
  std::string requirement;  // input
  std::string target;       // outline document

  friend bool operator==(const CreateFlowSample&, const CreateFlowSample&) = default;
};

struct PopulateInputsSample {
  std::string id;
  std::string requirement;
  std::string outline;
  /// Trigger plus the populated steps ordered before the target.
  std::string context;
  int target_order = 0;
  std::string target;  // input list document

  friend bool operator==(const PopulateInputsSample&, const PopulateInputsSample&) = default;
};

std::vector<CreateFlowSample> split_create_flow(const std::vector<LabeledWorkflow>& corpus,
                                                const EnvironmentCatalog& catalog);
std::vector<PopulateInputsSample> split_populate_inputs(const std::vector<LabeledWorkflow>& corpus,
                                                        const EnvironmentCatalog& catalog);

/// Inverse of the two splits. Items come back in create-flow sample order.
std::vector<LabeledWorkflow> reassemble(const std::vector<CreateFlowSample>& create_flow,
                                        const std::vector<PopulateInputsSample>& populate_inputs);

/// Step, table, column and value retrieval samples. Queries are annotations
/// (the requirement for trigger artifacts). Samples sharing kind, query and
/// scope merge their gold sets; golds absent from the catalog are flagged
/// GOLD_NOT_INDEXED.
std::vector<RetrievalSample> derive_retrieval_samples(const std::vector<LabeledWorkflow>& corpus,
                                                      const EnvironmentCatalog& catalog);

// --- teacher forcing ---------------------------------------------------------

struct ForcedSite {
  std::string gold;
  RankedChoices choices;
};

struct TrainingRecord {
  std::string id;
  SubTask sub_task = SubTask::kCreateFlow;
  int target_order = 0;  // 0 for createFlow
  PromptState state;     // emitted = target, with the forced choice lists injected
  std::vector<ForcedSite> sites;
};

using PromptRenderer = std::function<std::string(const PromptState&)>;

/// One record per sample. Every artifact field of each target becomes a
/// choices site holding the top-k retrieval results with the gold forced in.
std::vector<TrainingRecord> inject_teacher_forcing(const std::vector<CreateFlowSample>& create_flow,
                                                   const std::vector<PopulateInputsSample>& populate,
                                                   const EnvironmentCatalog& catalog,
                                                   const Retriever& retriever, int k = kDefaultChoices);

struct GoldAudit {
  std::size_t sites = 0;
  std::size_t present = 0;
  std::size_t forced = 0;
  double presence() const { return sites ? static_cast<double>(present) / static_cast<double>(sites) : 1.0; }
};

GoldAudit audit_gold_presence(const std::vector<TrainingRecord>& records);

// --- sample files ------------------------------------------------------------

Json create_flow_sample_json(const CreateFlowSample& sample);
CreateFlowSample create_flow_sample_from_json(const Json& j);
Json populate_sample_json(const PopulateInputsSample& sample);
PopulateInputsSample populate_sample_from_json(const Json& j);
/// `renderer` defaults to render_prompt.
Json training_record_json(const TrainingRecord& record, const PromptRenderer& renderer = {});

std::string to_jsonl(const std::vector<Json>& records);
std::vector<Json> from_jsonl(std::string_view text);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace flowforge
