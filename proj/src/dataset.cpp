// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "flowforge/validate.hpp"

namespace flowforge {

namespace {

// Offset just past `prefix` on the occurrence-th line starting with it.
std::size_t value_offset(const std::string& text, std::string_view prefix, int occurrence) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line(text.data() + pos, (end == std::string::npos ? text.size() : end) - pos);
    if (line.substr(0, prefix.size()) == prefix && occurrence-- == 0) return pos + prefix.size();
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return text.size();
}

// Offset of the value line of the index-th input in an input list document.
std::size_t input_value_offset(const std::string& text, int index) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line(text.data() + pos, (end == std::string::npos ? text.size() : end) - pos);
    for (const std::string_view key : {"    value: ", "    condition: "}) {
      if (line.substr(0, key.size()) == key && index-- == 0) return pos + key.size();
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return text.size();
}

struct Site {
  std::size_t offset;
  ArtifactField field;
  std::string query;
};

void add_site(TrainingRecord& record, const Site& site, const Retriever& retriever, int k) {
  QueryOptions options;
  options.k = k;
  options.scope = site.field.scope;
  RankedChoices choices = retriever.query(site.field.kind, site.query, options);
  force_gold(choices, site.field.value);
  record.state.injected_choices.push_back(choices);
  record.state.injection_offsets.push_back(site.offset);
  record.sites.push_back({site.field.value, std::move(choices)});
}

void fill_sites(TrainingRecord& record, std::vector<Site> sites, const Retriever& retriever, int k) {
  std::stable_sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) { return a.offset < b.offset; });
  for (const auto& site : sites) add_site(record, site, retriever, k);
}

Json sample_site_json(const ForcedSite& site) {
  Json j = choices_to_json(site.choices);
  j["gold"] = site.gold;
  return j;
}

}  // namespace

std::vector<LabeledWorkflow> load_corpus(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 10 && name.ends_with(".flow.yaml")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LabeledWorkflow> corpus;
  for (const auto& file : files) {
    const std::string name = file.filename().string();
    LabeledWorkflow item;
    item.id = name.substr(0, name.size() - std::string_view(".flow.yaml").size());
    try {
      item.workflow = parse_workflow(read_file(file));
    } catch (const Error& e) {
      throw InvalidCorpusItem(corpus.size(), item.id, e.what());
    }
    corpus.push_back(std::move(item));
  }
  return corpus;
}

void check_corpus(const std::vector<LabeledWorkflow>& corpus, const EnvironmentCatalog& catalog) {
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& item = corpus[i];
    const ValidationReport report = validate_workflow(item.workflow, catalog);
    if (!report.ok()) {
      const auto& v = report.violations.front();
      throw InvalidCorpusItem(i, item.id, std::string(violation_code_name(v.code)) + " at " +
                                              v.location.to_string() + ": " + v.message);
    }
    for (const auto& step : item.workflow.steps) {
      if (step.annotation.find_first_not_of(" \t") == std::string::npos) {
        throw InvalidCorpusItem(i, item.id, "step " + std::to_string(step.order) + " has no annotation");
      }
    }
  }
}

std::vector<CreateFlowSample> split_create_flow(const std::vector<LabeledWorkflow>& corpus,
                                                const EnvironmentCatalog& catalog) {
  check_corpus(corpus, catalog);
  std::vector<CreateFlowSample> samples;
  for (const auto& item : corpus) {
    samples.push_back({item.id, item.workflow.requirement, serialize_outline(extract_outline(item.workflow))});
  }
  return samples;
}

std::vector<PopulateInputsSample> split_populate_inputs(const std::vector<LabeledWorkflow>& corpus,
                                                        const EnvironmentCatalog& catalog) {
  check_corpus(corpus, catalog);
  std::vector<PopulateInputsSample> samples;
  for (const auto& item : corpus) {
    const Outline outline = extract_outline(item.workflow);
    for (const auto& step : item.workflow.steps) {
      const PromptState state = populate_state(item.workflow, outline, step.order, false);
      samples.push_back({item.id, state.requirement, state.outline, state.context, step.order,
                         serialize_input_list(step.inputs)});
    }
  }
  return samples;
}

std::vector<LabeledWorkflow> reassemble(const std::vector<CreateFlowSample>& create_flow,
                                        const std::vector<PopulateInputsSample>& populate_inputs) {
  std::vector<LabeledWorkflow> out;
  std::map<std::string, std::size_t> position;
  for (const auto& sample : create_flow) {
    position[sample.id] = out.size();
    out.push_back({sample.id, workflow_from_outline(parse_outline(sample.target), sample.requirement)});
  }
  for (const auto& sample : populate_inputs) {
    const auto it = position.find(sample.id);
    if (it == position.end()) throw Error("UnknownSample", "no createFlow sample for " + sample.id);
    Workflow& workflow = out[it->second].workflow;
    if (sample.target_order < 1 || sample.target_order > static_cast<int>(workflow.steps.size())) {
      throw Error("UnknownSample", sample.id + " has no step " + std::to_string(sample.target_order));
    }
    workflow.steps[sample.target_order - 1].inputs = parse_input_list(sample.target);
  }
  return out;
}

std::vector<RetrievalSample> derive_retrieval_samples(const std::vector<LabeledWorkflow>& corpus,
                                                      const EnvironmentCatalog& catalog) {
  std::vector<RetrievalSample> samples;
  std::map<std::tuple<ArtifactKind, std::string, std::string>, std::size_t> seen;
  for (const auto& item : corpus) {
    const Workflow& w = item.workflow;
    for (const auto& field : collect_artifact_fields(w, catalog)) {
      const Step* step = field.step_order > 0 ? w.find_step(field.step_order) : nullptr;
      const std::string query = step ? step->annotation : w.requirement;
      const auto key = std::make_tuple(field.kind, query, field.scope);
      auto it = seen.find(key);
      if (it == seen.end()) {
        it = seen.emplace(key, samples.size()).first;
        samples.push_back({field.kind, query, field.scope, {}, {}});
      }
      RetrievalSample& sample = samples[it->second];
      if (std::find(sample.gold.begin(), sample.gold.end(), field.value) == sample.gold.end()) {
        sample.gold.push_back(field.value);
      }
      if (!artifact_exists(field, catalog) &&
          std::find(sample.flags.begin(), sample.flags.end(), "GOLD_NOT_INDEXED") == sample.flags.end()) {
        sample.flags.push_back("GOLD_NOT_INDEXED");
      }
    }
  }
  return samples;
}

std::vector<TrainingRecord> inject_teacher_forcing(const std::vector<CreateFlowSample>& create_flow,
                                                   const std::vector<PopulateInputsSample>& populate,
                                                   const EnvironmentCatalog& catalog,
                                                   const Retriever& retriever, int k) {
  std::vector<TrainingRecord> records;
  for (const auto& sample : create_flow) {
    TrainingRecord record;
    record.id = sample.id;
    record.sub_task = SubTask::kCreateFlow;
    record.state.sub_task = SubTask::kCreateFlow;
    record.state.requirement = sample.requirement;
    record.state.emitted = sample.target;
    const Outline outline = parse_outline(sample.target);
    const Workflow skeleton = workflow_from_outline(outline, sample.requirement);
    std::vector<Site> sites;
    for (const auto& field : collect_artifact_fields(skeleton, catalog)) {
      if (field.kind == ArtifactKind::kStepName) {
        const Step* step = skeleton.find_step(field.step_order);
        sites.push_back({value_offset(sample.target, "    name: ", field.step_order - 1), field,
                         step->annotation});
      } else if (field.step_order == 0) {
        const std::string prefix = "  " + field.input + ": ";
        sites.push_back({value_offset(sample.target, prefix, 0), field,
                         compose_query(field.kind, sample.requirement, sample.requirement, false)});
      }
    }
    fill_sites(record, std::move(sites), retriever, k);
    records.push_back(std::move(record));
  }
  for (const auto& sample : populate) {
    TrainingRecord record;
    record.id = sample.id;
    record.sub_task = SubTask::kPopulateInputs;
    record.target_order = sample.target_order;
    PromptState& state = record.state;
    state.sub_task = SubTask::kPopulateInputs;
    state.requirement = sample.requirement;
    state.outline = sample.outline;
    state.context = sample.context;
    state.target_order = sample.target_order;
    state.emitted = sample.target;
    // Resolve tables against the context plus the target step.
    Workflow workflow = parse_workflow(sample.context);
    const OutlineRow row = target_row(state);
    const std::vector<StepInputValue> inputs = parse_input_list(sample.target);
    workflow.steps.push_back({row.name, row.annotation, row.order, row.block, inputs});
    std::vector<Site> sites;
    for (const auto& field : collect_artifact_fields(workflow, catalog)) {
      if (field.step_order != sample.target_order || field.kind == ArtifactKind::kStepName) continue;
      const auto it = std::find_if(inputs.begin(), inputs.end(),
                                   [&](const StepInputValue& v) { return v.name == field.input; });
      const int index = static_cast<int>(it - inputs.begin());
      sites.push_back({input_value_offset(sample.target, index), field,
                       compose_query(field.kind, row.annotation, sample.requirement, false)});
    }
    fill_sites(record, std::move(sites), retriever, k);
    records.push_back(std::move(record));
  }
  return records;
}

GoldAudit audit_gold_presence(const std::vector<TrainingRecord>& records) {
  GoldAudit audit;
  for (const auto& record : records) {
    for (const auto& site : record.sites) {
      ++audit.sites;
      const auto rank = site.choices.rank_of(site.gold);
      if (rank && static_cast<int>(*rank) <= site.choices.k) ++audit.present;
      if (site.choices.forced) ++audit.forced;
    }
  }
  return audit;
}

Json create_flow_sample_json(const CreateFlowSample& s) {
  return {{"id", s.id}, {"requirement", s.requirement}, {"target", s.target}};
}

CreateFlowSample create_flow_sample_from_json(const Json& j) {
  return {j.at("id").get<std::string>(), j.at("requirement").get<std::string>(),
          j.at("target").get<std::string>()};
}

Json populate_sample_json(const PopulateInputsSample& s) {
  return {{"id", s.id},
          {"requirement", s.requirement},
          {"outline", s.outline},
          {"context", s.context},
          {"target_order", s.target_order},
          {"target", s.target}};
}

PopulateInputsSample populate_sample_from_json(const Json& j) {
  return {j.at("id").get<std::string>(),      j.at("requirement").get<std::string>(),
          j.at("outline").get<std::string>(), j.at("context").get<std::string>(),
          j.at("target_order").get<int>(),    j.at("target").get<std::string>()};
}

Json training_record_json(const TrainingRecord& record, const PromptRenderer& renderer) {
  Json sites = Json::array();
  for (const auto& site : record.sites) sites.push_back(sample_site_json(site));
  return {{"id", record.id},
          {"sub_task", std::string(sub_task_name(record.sub_task))},
          {"target_order", record.target_order},
          {"text", renderer ? renderer(record.state) : render_prompt(record.state)},
          {"sites", sites}};
}

std::string to_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<Json> from_jsonl(std::string_view text) {
  std::vector<Json> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw SyntaxError(std::string("bad record: ") + e.what(), line_no, 1);
    }
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + temp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("IoError", "short write to " + temp.string());
  }
  std::filesystem::rename(temp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace flowforge
