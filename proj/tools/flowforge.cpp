// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

// flowforge command line: index build, generate, evaluate, dataset, serve.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "flowforge/dataset.hpp"
#include "flowforge/evaluator.hpp"
#include "flowforge/json_io.hpp"
#include "flowforge/orchestrator.hpp"
#include "flowforge/service.hpp"
#include "flowforge/validate.hpp"

namespace fs = std::filesystem;
using namespace flowforge;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct Globals {
  std::string config_file;
  std::string catalog_dir;
  std::string generator;
  int k = 0;
  bool json = false;
};

ServiceConfig resolve(const Globals& g) {
  ServiceConfig config =
      load_service_config(g.config_file.empty() ? std::nullopt : std::optional<fs::path>(g.config_file));
  if (!g.catalog_dir.empty()) config.catalog_dir = g.catalog_dir;
  if (!g.generator.empty()) config.generator_name = g.generator;
  if (g.k > 0) config.k = g.k;
  check_service_config(config);
  return config;
}

void print(const Globals& g, const Json& j, const std::string& text) {
  if (g.json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
  }
}

OrchestrationConfig orchestration_for(const ServiceConfig& config, const Engine& engine) {
  GeneratorConfig gen;
  gen.catalog = engine.catalog;
  gen.transcript_path = config.transcript_path;
  gen.endpoint = config.endpoint;
  OrchestrationConfig o;
  o.generator = GeneratorRegistry::instance().create(config.generator_name, gen);
  o.k = config.k;
  o.repair_mode = config.repair_mode;
  o.context_expansion = config.context_expansion;
  return o;
}

std::map<std::string, fs::path> flow_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("IoError", "not a directory: " + dir.string());
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".flow.yaml";
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      files[name.substr(0, name.size() - suffix.size())] = entry.path();
    }
  }
  return files;
}

// --- index build ---------------------------------------------------------------

int cmd_index_build(const Globals& g, const std::string& out, bool force) {
  const ServiceConfig config = resolve(g);
  const EnvironmentCatalog catalog = load_catalog_dir(config.catalog_dir);
  if (!force && fs::exists(out)) {
    try {
      LexicalIndex::load(out, catalog);
      print(g, {{"status", "up-to-date"}, {"index", out}, {"catalog_digest", catalog.version().digest}},
            "index " + out + " is up-to-date");
      return kOk;
    } catch (const StaleIndex&) {
    }
  }
  const LexicalIndex index = build_index(catalog);
  index.save(out);
  Json counts = Json::object();
  for (const ArtifactKind kind : kAllArtifactKinds) {
    counts[std::string(artifact_kind_name(kind))] = index.size(kind);
  }
  print(g, {{"status", "built"}, {"index", out}, {"catalog_digest", catalog.version().digest}, {"documents", counts}},
        "built " + out + " from catalog " + catalog.version().digest);
  return kOk;
}

// --- generate ------------------------------------------------------------------

int cmd_generate(const Globals& g, std::string requirement, const std::string& file, const std::string& out,
                 const std::string& transcript_out, bool no_repair, bool parallel) {
  ServiceConfig config = resolve(g);
  if (no_repair) config.repair_mode = false;
  if (!file.empty()) requirement = read_file(file);
  while (!requirement.empty() && (requirement.back() == '\n' || requirement.back() == '\r')) requirement.pop_back();
  const Engine engine = make_engine(load_catalog_dir(config.catalog_dir));
  const GenerationRun run = generate_workflow(engine, orchestration_for(config, engine), requirement, parallel);
  const std::string text = serialize_workflow(run.workflow);
  const ValidationReport report = validate_workflow(run.workflow, *engine.catalog);
  if (!out.empty()) write_file_atomic(out, text);
  if (!transcript_out.empty()) write_file_atomic(transcript_out, run_transcript_jsonl(run));
  Json sites = Json::array();
  for (const auto& site : run.outline.result.sites) sites.push_back(choices_to_json(site));
  for (const auto& step : run.steps) {
    for (const auto& site : step.result.sites) sites.push_back(choices_to_json(site));
  }
  print(g,
        {{"workflow", text},
         {"outline", serialize_outline(run.outline.outline)},
         {"validation", report_to_json(report)},
         {"choices_offered", sites}},
        text);
  if (!report.ok()) {
    for (const auto& v : report.violations) {
      std::cerr << violation_code_name(v.code) << " at " << v.location.to_string() << ": " << v.message << "\n";
    }
    return kFailed;
  }
  return kOk;
}

// Regenerates every requirement of a corpus directory.
int cmd_generate_batch(const Globals& g, const std::string& corpus_dir, const std::string& out_dir, bool no_repair,
                       bool parallel) {
  ServiceConfig config = resolve(g);
  if (no_repair) config.repair_mode = false;
  const Engine engine = make_engine(load_catalog_dir(config.catalog_dir));
  const OrchestrationConfig orchestration = orchestration_for(config, engine);
  fs::create_directories(out_dir);
  Json results = Json::array();
  int failed = 0;
  std::string text;
  for (const auto& item : load_corpus(corpus_dir)) {
    const fs::path stem = fs::path(out_dir) / item.id;
    try {
      const GenerationRun run = generate_workflow(engine, orchestration, item.workflow.requirement, parallel);
      write_file_atomic(stem.string() + ".flow.yaml", serialize_workflow(run.workflow));
      write_file_atomic(stem.string() + ".transcript.jsonl", run_transcript_jsonl(run));
      const bool ok = validate_workflow(run.workflow, *engine.catalog).ok();
      failed += ok ? 0 : 1;
      results.push_back({{"id", item.id}, {"status", ok ? "ok" : "invalid"}});
      text += item.id + (ok ? " ok\n" : " invalid\n");
    } catch (const Error& e) {
      ++failed;
      results.push_back({{"id", item.id}, {"status", "failed"}, {"code", e.code()}, {"message", e.what()}});
      text += item.id + " failed: " + e.code() + "\n";
    }
  }
  print(g, {{"out_dir", out_dir}, {"results", results}, {"failed", failed}}, text);
  return failed ? kFailed : kOk;
}

// --- evaluate ------------------------------------------------------------------

int cmd_evaluate(const Globals& g, const std::string& expected_dir, const std::string& generated_dir,
                 const std::string& mode, const std::string& retrieval_file, const std::string& out) {
  const TreeOptions options = parse_tree_mode(mode);
  const auto expected = flow_files(expected_dir);
  const auto generated = flow_files(generated_dir);
  std::vector<EvaluationPair> pairs;
  int missing = 0;
  for (const auto& [id, path] : expected) {
    const auto it = generated.find(id);
    if (it == generated.end()) {
      std::cerr << "no generated workflow for " << id << "\n";
      ++missing;
      continue;
    }
    pairs.push_back({id, parse_workflow(read_file(path)), parse_workflow(read_file(it->second))});
  }
  EvaluationReport report = evaluate_corpus(pairs);
  if (!retrieval_file.empty()) {
    const ServiceConfig config = resolve(g);
    const EnvironmentCatalog catalog = load_catalog_dir(config.catalog_dir);
    report.retrieval = evaluate_retrieval(build_index(catalog), read_retrieval_samples(read_file(retrieval_file)));
  }
  Json j = evaluation_to_json(report);
  j["mode"] = mode;
  Json scores = Json::object();
  std::string text = evaluation_table(report);
  text += "\nmode " + mode + "\n";
  for (const auto& p : pairs) {
    const double s = flow_similarity(p.expected, p.generated, options);
    scores[p.id] = s;
    char line[256];
    std::snprintf(line, sizeof line, "  %-40s %.4f\n", p.id.c_str(), s);
    text += line;
  }
  j["mode_scores"] = scores;
  j["missing"] = missing;
  if (!out.empty()) write_file_atomic(out, j.dump(2) + "\n");
  print(g, j, text);
  return missing ? kFailed : kOk;
}

// --- dataset -------------------------------------------------------------------

std::vector<Json> as_json(const auto& items, auto convert) {
  std::vector<Json> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(convert(item));
  return out;
}

int cmd_dataset_split(const Globals& g, const std::string& corpus_dir, const std::string& out_dir) {
  const ServiceConfig config = resolve(g);
  const EnvironmentCatalog catalog = load_catalog_dir(config.catalog_dir);
  const auto corpus = load_corpus(corpus_dir.empty() ? config.corpus_dir : fs::path(corpus_dir));
  const auto create = split_create_flow(corpus, catalog);
  const auto populate = split_populate_inputs(corpus, catalog);
  fs::create_directories(out_dir);
  write_file_atomic(fs::path(out_dir) / "create_flow.jsonl", to_jsonl(as_json(create, create_flow_sample_json)));
  write_file_atomic(fs::path(out_dir) / "populate_inputs.jsonl", to_jsonl(as_json(populate, populate_sample_json)));
  print(g, {{"items", corpus.size()}, {"create_flow", create.size()}, {"populate_inputs", populate.size()}},
        std::to_string(corpus.size()) + " workflows -> " + std::to_string(create.size()) + " createFlow, " +
            std::to_string(populate.size()) + " populateInputs samples in " + out_dir);
  return kOk;
}

int cmd_dataset_retrieval(const Globals& g, const std::string& corpus_dir, const std::string& out) {
  const ServiceConfig config = resolve(g);
  const EnvironmentCatalog catalog = load_catalog_dir(config.catalog_dir);
  const auto corpus = load_corpus(corpus_dir.empty() ? config.corpus_dir : fs::path(corpus_dir));
  const auto samples = derive_retrieval_samples(corpus, catalog);
  write_file_atomic(out, write_retrieval_samples(samples));
  std::size_t unindexed = 0;
  for (const auto& s : samples) {
    if (std::find(s.flags.begin(), s.flags.end(), "GOLD_NOT_INDEXED") != s.flags.end()) ++unindexed;
  }
  print(g, {{"samples", samples.size()}, {"gold_not_indexed", unindexed}, {"out", out}},
        std::to_string(samples.size()) + " retrieval samples written to " + out);
  return kOk;
}

int cmd_dataset_teacher_force(const Globals& g, const std::string& corpus_dir, const std::string& out) {
  const ServiceConfig config = resolve(g);
  const EnvironmentCatalog catalog = load_catalog_dir(config.catalog_dir);
  const auto corpus = load_corpus(corpus_dir.empty() ? config.corpus_dir : fs::path(corpus_dir));
  const LexicalIndex index = build_index(catalog);
  const auto records = inject_teacher_forcing(split_create_flow(corpus, catalog),
                                              split_populate_inputs(corpus, catalog), catalog, index, config.k);
  write_file_atomic(out, to_jsonl(as_json(records, [](const TrainingRecord& r) { return training_record_json(r); })));
  const GoldAudit audit = audit_gold_presence(records);
  print(g,
        {{"records", records.size()},
         {"sites", audit.sites},
         {"present", audit.present},
         {"forced", audit.forced},
         {"presence", audit.presence()}},
        std::to_string(records.size()) + " records, " + std::to_string(audit.sites) + " choice sites, " +
            std::to_string(audit.forced) + " forced, gold presence " + std::to_string(audit.presence()));
  return audit.present == audit.sites ? kOk : kFailed;
}

// --- serve ---------------------------------------------------------------------

Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const Globals& g, const std::string& listen, const std::string& ui_dir) {
  ServiceConfig config = resolve(g);
  if (!listen.empty()) config.listen_address = listen;
  if (!ui_dir.empty()) config.ui_dir = ui_dir;
  const auto [host, port] = split_listen_address(config.listen_address);
  Service service(config);
  const int bound = service.bind(host, port);
  print(g, {{"listening", host + ":" + std::to_string(bound)}}, "listening on " + host + ":" + std::to_string(bound));
  std::cout.flush();
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.run();
  g_service = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowforge: workflow generation with retrieval-grounded choices"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "YAML config file")->check(CLI::ExistingFile);
  app.add_option("--catalog", g.catalog_dir, "catalog directory");
  app.add_option("--generator", g.generator, "generator plug-in name");
  app.add_option("-k", g.k, "choices per retrieval site")->check(CLI::PositiveNumber);
  app.add_flag("--json", g.json, "machine-readable output");

  auto* index = app.add_subcommand("index", "lexical index maintenance");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "build or refresh the persisted index");
  std::string index_out = "build/flowforge.index.json";
  bool force = false;
  index_build->add_option("--out", index_out, "index file");
  index_build->add_flag("--force", force, "rebuild even when up-to-date");

  auto* generate = app.add_subcommand("generate", "generate a workflow from a requirement");
  std::string requirement, requirement_file, generate_out, transcript_out;
  bool no_repair = false, parallel = false;
  auto* req_opt = generate->add_option("--requirement", requirement, "requirement text");
  auto* file_opt = generate->add_option("--file", requirement_file, "file holding the requirement")
                       ->check(CLI::ExistingFile);
  req_opt->excludes(file_opt);
  generate->add_option("--out", generate_out, "write the workflow here");
  generate->add_option("--transcript", transcript_out, "write the JSONL transcript here");
  generate->add_flag("--no-repair", no_repair, "reject instead of repairing out-of-catalog names");
  generate->add_flag("--parallel", parallel, "populate steps with outline-only context in parallel");
  std::string batch_corpus, batch_out;
  auto* batch_opt = generate->add_option("--corpus", batch_corpus, "regenerate every requirement of this corpus")
                        ->check(CLI::ExistingDirectory);
  generate->add_option("--out-dir", batch_out, "directory for <id>.flow.yaml and <id>.transcript.jsonl")
      ->needs(batch_opt);
  batch_opt->excludes(req_opt)->excludes(file_opt);

  auto* evaluate = app.add_subcommand("evaluate", "score generated workflows against expected ones");
  std::string expected_dir, generated_dir, mode = "full", retrieval_file, eval_out;
  evaluate->add_option("--expected", expected_dir, "directory of expected *.flow.yaml")->required();
  evaluate->add_option("--generated", generated_dir, "directory of generated *.flow.yaml")->required();
  evaluate->add_option("--mode", mode, "full, outline or step:<name>");
  evaluate->add_option("--retrieval", retrieval_file, "retrieval samples (JSONL) to score as well");
  evaluate->add_option("--out", eval_out, "write the JSON report here");

  auto* dataset = app.add_subcommand("dataset", "training data tools");
  dataset->require_subcommand(1);
  std::string corpus_dir;
  dataset->add_option("--corpus", corpus_dir, "corpus directory");
  auto* split = dataset->add_subcommand("split", "split the corpus into createFlow and populateInputs samples");
  std::string split_out = "build/dataset";
  split->add_option("--out", split_out, "output directory");
  auto* derive = dataset->add_subcommand("derive-retrieval", "derive retrieval samples");
  std::string derive_out = "build/dataset/retrieval.jsonl";
  derive->add_option("--out", derive_out, "output file");
  auto* teacher = dataset->add_subcommand("teacher-force", "materialize training text with forced choices");
  std::string teacher_out = "build/dataset/training.jsonl";
  teacher->add_option("--out", teacher_out, "output file");

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string listen, ui_dir;
  serve->add_option("--listen", listen, "host:port");
  serve->add_option("--ui", ui_dir, "static files served under /ui");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (index_build->parsed()) return cmd_index_build(g, index_out, force);
    if (generate->parsed()) {
      if (!batch_corpus.empty()) {
        if (batch_out.empty()) {
          std::cerr << "generate --corpus needs --out-dir\n";
          return kUsage;
        }
        return cmd_generate_batch(g, batch_corpus, batch_out, no_repair, parallel);
      }
      if (requirement.empty() && requirement_file.empty()) {
        std::cerr << "generate needs --requirement or --file\n" << generate->help();
        return kUsage;
      }
      return cmd_generate(g, requirement, requirement_file, generate_out, transcript_out, no_repair, parallel);
    }
    if (evaluate->parsed()) return cmd_evaluate(g, expected_dir, generated_dir, mode, retrieval_file, eval_out);
    if (split->parsed()) return cmd_dataset_split(g, corpus_dir, split_out);
    if (derive->parsed()) return cmd_dataset_retrieval(g, corpus_dir, derive_out);
    if (teacher->parsed()) return cmd_dataset_teacher_force(g, corpus_dir, teacher_out);
    if (serve->parsed()) return cmd_serve(g, listen, ui_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    if (g.json) {
      std::cout << Json{{"code", e.code()}, {"message", e.what()}}.dump(2) << "\n";
    }
    std::cerr << e.code() << ": " << e.what() << "\n";
    return e.code() == "InvalidMode" ? kUsage : kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
