// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

// Prints one PASS/FAIL line per acceptance criterion and exits 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <thread>

#include "flowforge/orchestrator.hpp"
#include "support.hpp"

using namespace ff_test;
using namespace std::chrono_literals;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const Engine& demo_engine() {
  static const Engine engine = make_engine(demo_catalog());
  return engine;
}

OrchestrationConfig reference_config() {
  OrchestrationConfig config;
  config.generator = std::make_shared<ReferenceGenerator>(shared_catalog());
  config.repair_mode = true;
  return config;
}

Outcome dsl_round_trip() {
  const auto start = Clock::now();
  int files = 0, idempotent = 0;
  for (const auto& entry : fs::directory_iterator(corpus_dir())) {
    if (!entry.path().string().ends_with(".flow.yaml")) continue;
    ++files;
    const std::string text = read_file(entry.path());
    idempotent += serialize_workflow(parse_workflow(text)) == text ? 1 : 0;
  }
  WorkflowGenerator gen(demo_catalog(), 20260417);
  int random = 0, round_tripped = 0;
  for (; random < 1000; ++random) {
    const Workflow w = gen.generate(0, 8);
    if (!validate_workflow(w, demo_catalog()).ok()) continue;
    const std::string text = serialize_workflow(w);
    const Workflow back = parse_workflow(text);
    round_tripped += back == w && serialize_workflow(back) == text ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  return {files >= 20 && idempotent == files && round_tripped == random && elapsed < 10.0,
          fmt("corpus %d/%d idempotent, random %d/%d round-trip, %.2f s (limit 10 s)", idempotent, files,
              round_tripped, random, elapsed)};
}

Outcome validator_completeness() {
  WorkflowGenerator gen(demo_catalog(), 777);
  std::map<ViolationCode, int> injected, detected;
  for (int i = 0; i < 400; ++i) {
    const Workflow valid = gen.generate(1, 6);
    if (valid.steps.empty()) continue;
    for (const ViolationCode code : kAllViolationCodes) {
      const auto injection = inject_violation(valid, code, gen.rng(), demo_catalog());
      if (!injection) continue;
      ++injected[code];
      for (const auto& v : validate_workflow(injection->workflow, demo_catalog()).violations) {
        if (v.code == code && v.location.step_order == injection->step_order) {
          ++detected[code];
          break;
        }
      }
    }
  }
  int total = 0, found = 0, codes = 0;
  bool pass = true;
  for (const ViolationCode code : kAllViolationCodes) {
    total += injected[code];
    found += detected[code];
    codes += injected[code] > 0 ? 1 : 0;
    pass &= injected[code] > 0 && detected[code] == injected[code];
  }
  return {pass, fmt("%d/%d injected violations detected with the right code, %d/9 codes exercised", found, total, codes)};
}

Outcome ted_oracle() {
  const auto start = Clock::now();
  ExhaustiveForests forests(6, {"a", "b"});
  const auto trees = forests.tree_ids();
  std::size_t pairs = 0, mismatches = 0;
  for (const std::size_t a : trees) {
    for (const std::size_t b : trees) {
      ++pairs;
      mismatches += tree_edit_distance(forests.tree(a), forests.tree(b)) != forests.distance(a, b) ? 1 : 0;
    }
  }
  std::mt19937_64 rng(1618);
  BruteForceTed brute;
  const std::vector<std::string> labels = {"a", "b", "c"};
  std::size_t random_mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    const FlowTree x = random_tree(rng, std::uniform_int_distribution<int>(1, 12)(rng), labels);
    const FlowTree y = random_tree(rng, std::uniform_int_distribution<int>(1, 12)(rng), labels);
    random_mismatches += tree_edit_distance(x, y) != brute.distance(x, y) ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && random_mismatches == 0 && elapsed < 60.0,
          fmt("%zu exhaustive pairs (%zu trees), %zu mismatches; 500 random pairs, %zu mismatches; %.1f s (limit 60 s)",
              pairs, trees.size(), mismatches, random_mismatches, elapsed)};
}

Outcome similarity_axioms() {
  std::mt19937_64 rng(2718);
  const std::vector<std::string> labels = {"a", "b", "c", "d"};
  int violations = 0;
  for (int i = 0; i < 500; ++i) {
    const FlowTree x = random_tree(rng, std::uniform_int_distribution<int>(1, 10)(rng), labels);
    const FlowTree y = random_tree(rng, std::uniform_int_distribution<int>(1, 10)(rng), labels);
    const double fs = tree_similarity(x, y);
    if (tree_similarity(x, x) != 1.0 || fs != tree_similarity(y, x) || fs < 0.0 || fs > 1.0) ++violations;
  }
  const Workflow w = reminder_workflow();
  Workflow cut = w;
  std::erase_if(cut.steps, [](const Step& s) { return s.name == "send_email"; });
  const FlowTree te = workflow_to_tree(w);
  const FlowTree tg = workflow_to_tree(cut);
  // The send_email subtree hangs last under the IF step.
  const std::size_t subtree = te.children.back().children.back().size();
  const double closed = 1.0 - static_cast<double>(subtree) / static_cast<double>(te.size() + tg.size());
  const double got = flow_similarity(w, cut);
  return {violations == 0 && got == closed,
          fmt("500 random pairs, %d axiom violations; deletion FS %.17g vs closed form 1-%zu/(%zu+%zu) = %.17g (exact)",
              violations, got, subtree, te.size(), tg.size(), closed)};
}

Outcome retrieval_sanity() {
  std::size_t total = 0, first = 0;
  for (const ArtifactKind kind : kAllArtifactKinds) {
    for (const auto& doc : all_artifacts(demo_catalog(), kind)) {
      QueryOptions options;
      options.scope = doc.scope;
      const auto r = demo_index().query(kind, doc.payload, options);
      ++total;
      first += !r.choices.empty() && r.choices[0].payload == doc.payload ? 1 : 0;
    }
  }
  const auto samples = derive_retrieval_samples(demo_corpus(), demo_catalog());
  const auto report = evaluate_retrieval(demo_index(), samples);
  const auto brute = brute_force_metrics(demo_index(), samples);
  const double diff = std::max({std::abs(report.overall.recall_at_1 - brute.recall_at_1),
                                std::abs(report.overall.recall_at_4 - brute.recall_at_4),
                                std::abs(report.overall.recall_at_10 - brute.recall_at_10),
                                std::abs(report.overall.hit_rate_at_4 - brute.hit_rate_at_4),
                                std::abs(report.overall.mrr - brute.mrr)});
  const double recall1 = static_cast<double>(first) / static_cast<double>(total);
  return {total > 0 && recall1 == 1.0 && diff <= 1e-12,
          fmt("exact-name Recall@1 %.4f over %zu artifacts; metrics vs brute force max |diff| %.3g (limit 1e-12) over "
              "%zu samples, MRR %.4f",
              recall1, total, diff, samples.size(), report.overall.mrr)};
}

Outcome teacher_forcing() {
  const auto create = split_create_flow(demo_corpus(), demo_catalog());
  const auto populate = split_populate_inputs(demo_corpus(), demo_catalog());
  const auto audit = audit_gold_presence(inject_teacher_forcing(create, populate, demo_catalog(), demo_index()));
  return {audit.sites > 0 && audit.present == audit.sites,
          fmt("gold present at %zu/%zu choice sites (%.1f%%), %zu forced", audit.present, audit.sites,
              100.0 * audit.presence(), audit.forced)};
}

struct CorpusRuns {
  std::vector<std::pair<std::string, GenerationRun>> runs;
  std::vector<std::string> failed;
};

CorpusRuns run_corpus() {
  CorpusRuns out;
  for (const auto& item : demo_corpus()) {
    try {
      out.runs.emplace_back(item.id, generate_workflow(demo_engine(), reference_config(), item.workflow.requirement));
    } catch (const Error& e) {
      out.failed.push_back(item.id + " (" + e.code() + ")");
    }
  }
  return out;
}

Outcome hallucination_guard(const CorpusRuns& corpus) {
  std::size_t names = 0, absent = 0, flagged = 0;
  for (const auto& [id, run] : corpus.runs) {
    for (const auto& f : collect_artifact_fields(run.workflow, demo_catalog())) {
      if (f.kind == ArtifactKind::kColumnValue) continue;
      ++names;
      absent += artifact_exists(f, demo_catalog()) ? 0 : 1;
    }
    const auto report = validate_workflow(run.workflow, demo_catalog());
    flagged += report.count(ViolationCode::kUnknownStep) + report.count(ViolationCode::kUnknownTable) +
               report.count(ViolationCode::kUnknownColumn);
  }
  return {corpus.failed.empty() && names > 0 && absent == 0 && flagged == 0,
          fmt("%zu workflows generated (%zu failed), %zu out-of-catalog of %zu step/table/column names, %zu unknown-name "
              "violations",
              corpus.runs.size(), corpus.failed.size(), absent, names, flagged)};
}

Outcome end_to_end_determinism(const CorpusRuns& first) {
  const CorpusRuns second = run_corpus();
  std::size_t identical = 0;
  for (std::size_t i = 0; i < first.runs.size() && i < second.runs.size(); ++i) {
    const auto& a = first.runs[i].second;
    const auto& b = second.runs[i].second;
    identical += serialize_workflow(a.workflow) == serialize_workflow(b.workflow) &&
                         run_transcript_jsonl(a) == run_transcript_jsonl(b)
                     ? 1
                     : 0;
  }
  std::map<std::string, const Workflow*> expected;
  for (const auto& item : demo_corpus()) expected[item.id] = &item.workflow;
  const auto solvable = solvable_ids();
  std::size_t exact = 0;
  std::vector<EvaluationPair> pairs;
  for (const auto& [id, run] : first.runs) {
    if (solvable.count(id)) exact += flow_similarity(*expected.at(id), run.workflow) == 1.0 ? 1 : 0;
    pairs.push_back({id, *expected.at(id), run.workflow});
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  Json report = evaluation_to_json(evaluate_corpus(pairs));
  report["mode"] = "full";
  Json scores = Json::object();
  for (const auto& p : pairs) scores[p.id] = flow_similarity(p.expected, p.generated);
  report["mode_scores"] = scores;
  report["missing"] = demo_corpus().size() - pairs.size();
  const bool baseline = report == Json::parse(read_file(data_dir() / "baseline" / "report.json"));
  const std::size_t items = demo_corpus().size();
  return {items >= 20 && identical == items && solvable.size() >= 10 && exact == solvable.size() && baseline,
          fmt("%zu/%zu runs byte-identical (workflow and transcript), FS = 1.0 on %zu/%zu solvable items, baseline "
              "report %s",
              identical, items, exact, solvable.size(), baseline ? "matches" : "differs")};
}

Outcome streaming_order() {
  SessionManager manager(demo_engine(), reference_config());
  std::vector<std::shared_ptr<Session>> sessions;
  for (int i = 0; i < 100; ++i) {
    sessions.push_back(manager.start_session_async(i % 2 ? kReminderRequirement : kScheduledRequirement, true));
  }
  int ordered = 0;
  for (const auto& session : sessions) {
    std::vector<SessionEvent> events;
    std::optional<std::uint64_t> last;
    const auto deadline = Clock::now() + 30s;
    while (Clock::now() < deadline) {
      for (auto& e : session->wait_events(last, 200ms)) {
        last = e.seq;
        events.push_back(std::move(e));
      }
      if (session->terminal() && session->events_after(last).empty()) break;
    }
    bool ok = !events.empty() && events.front().type == "outline" && events.back().type == "completed";
    int previous = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      ok &= events[i].seq == i;
      if (events[i].type == "outline") ok &= i == 0;
      if (events[i].type == "step_populated") {
        const int order = events[i].payload["order"].get<int>();
        ok &= order == previous + 1;
        previous = order;
      }
    }
    ok &= previous == static_cast<int>(session->snapshot().workflow.steps.size());
    ordered += ok ? 1 : 0;
  }
  return {ordered == 100, fmt("%d/100 auto-continue sessions: outline first, step events strictly ordered", ordered)};
}

Outcome decomposition() {
  const auto create = split_create_flow(demo_corpus(), demo_catalog());
  const auto populate = split_populate_inputs(demo_corpus(), demo_catalog());
  std::size_t steps = 0;
  for (const auto& item : demo_corpus()) steps += item.workflow.steps.size();
  const auto back = reassemble(create, populate);
  std::size_t same = 0;
  for (std::size_t i = 0; i < back.size() && i < demo_corpus().size(); ++i) same += back[i] == demo_corpus()[i] ? 1 : 0;
  const std::size_t items = demo_corpus().size();
  return {same == items && back.size() == items && create.size() == items && populate.size() == steps,
          fmt("%zu/%zu workflows reassembled exactly; %zu createFlow samples for %zu items, %zu populateInputs samples "
              "for %zu steps",
              same, items, create.size(), items, populate.size(), steps)};
}

Outcome scale_check() {
  const auto start = Clock::now();
  const Workflow big = synthetic_workflow(25);
  const bool valid = validate_workflow(big, demo_catalog()).ok();
  const FlowTree tree = workflow_to_tree(big);
  Workflow mutated = big;
  mutated.steps[7].name = "add_comment";
  mutated.steps.erase(mutated.steps.begin() + 12);
  for (int i = 0; i < static_cast<int>(mutated.steps.size()); ++i) mutated.steps[static_cast<std::size_t>(i)].order = i + 1;
  const double fs = flow_similarity(big, mutated);
  const double elapsed = seconds_since(start);
  return {valid && big.steps.size() == 25 && fs > 0.0 && fs < 1.0 && elapsed < 1.0,
          fmt("25 steps, valid=%s, tree %zu nodes, FS vs mutated copy %.4f, %.3f s (limit 1 s)", valid ? "yes" : "no",
              tree.size(), fs, elapsed)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dsl-round-trip", dsl_round_trip},
      {"validator-completeness", validator_completeness},
      {"ted-oracle-equivalence", ted_oracle},
      {"flow-similarity-axioms", similarity_axioms},
      {"retrieval-sanity", retrieval_sanity},
      {"teacher-forcing", teacher_forcing},
  };
  int failed = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  };
  auto guarded = [&](const std::string& name, const std::function<Outcome()>& check) {
    try {
      report(name, check());
    } catch (const std::exception& e) {
      report(name, {false, std::string("threw: ") + e.what()});
    }
  };
  for (const auto& [name, check] : criteria) guarded(name, check);
  std::optional<CorpusRuns> corpus;
  try {
    corpus = run_corpus();
  } catch (const std::exception& e) {
    std::cerr << "corpus generation threw: " << e.what() << "\n";
  }
  guarded("hallucination-guard", [&] { return corpus ? hallucination_guard(*corpus) : Outcome{false, "no runs"}; });
  guarded("end-to-end-determinism", [&] { return corpus ? end_to_end_determinism(*corpus) : Outcome{false, "no runs"}; });
  guarded("streaming-order", streaming_order);
  guarded("decomposition-losslessness", decomposition);
  guarded("scale-check", scale_check);
  std::cout << (11 - failed) << "/11 criteria passed" << std::endl;
  return failed ? 1 : 0;
}
