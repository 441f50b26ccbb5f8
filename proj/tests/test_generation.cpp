// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "flowforge/generation.hpp"
#include "support.hpp"

using namespace ff_test;

namespace {

const char* kOutlineHead = "trigger:\n  table: ";

// Always answers with the same payloads, none of them right.
class FixedRetriever : public Retriever {
 public:
  explicit FixedRetriever(std::vector<std::string> payloads) : payloads_(std::move(payloads)) {}
  RankedChoices query(ArtifactKind kind, std::string_view text, const QueryOptions& options) const override {
    RankedChoices out{std::string(text), kind, options.scope, options.k, {}, false};
    double score = 0.9;
    for (const auto& p : payloads_) {
      if (static_cast<int>(out.choices.size()) >= options.k) break;
      out.choices.push_back({p, score, "x:" + p});
      score -= 0.1;
    }
    ++calls;
    return out;
  }
  mutable int calls = 0;

 private:
  std::vector<std::string> payloads_;
};

class FailingRetriever : public Retriever {
 public:
  RankedChoices query(ArtifactKind, std::string_view, const QueryOptions&) const override {
    throw RetrievalFailed("index offline");
  }
};

// Emits fragments forever.
class EndlessGenerator : public Generator {
 public:
  std::string name() const override { return "endless"; }
  GenerationEvent next(const PromptState&) const override { return Fragment{"x"}; }
};

class SilentGenerator : public Generator {
 public:
  std::string name() const override { return "silent"; }
  GenerationEvent next(const PromptState&) const override { return Fragment{""}; }
};

// Canned completions keyed by how many injections the prompt shows.
class CannedCompletion : public TextCompletion {
 public:
  explicit CannedCompletion(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const std::string& prompt) const override {
    prompts.push_back(prompt);
    return calls < replies_.size() ? replies_[calls++] : std::string();
  }
  mutable std::size_t calls = 0;
  mutable std::vector<std::string> prompts;

 private:
  std::vector<std::string> replies_;
};

PromptState create_state(const std::string& requirement) {
  PromptState state;
  state.requirement = requirement;
  return state;
}

// createFlow script with two requests: a table and a step name.
std::vector<ScriptOp> two_request_script(const std::string& table) {
  return {Fragment{kOutlineHead},
          ChoicesRequest{ArtifactKind::kTableName, "user", ""},
          Fragment{"\"" + table + "\"\n  event: \"created\"\nsteps:\n  - annotation: \"send an email\"\n    name: "},
          ChoicesRequest{ArtifactKind::kStepName, "send an email", ""},
          Fragment{"\"send_email\"\n    order: 1\n    block: 0\n"}};
}

class ScriptGenerator : public Generator {
 public:
  explicit ScriptGenerator(std::vector<ScriptOp> ops) : ops_(std::move(ops)) {}
  std::string name() const override { return "script"; }
  GenerationEvent next(const PromptState& state) const override { return next_from_script(ops_, state, true); }

 private:
  std::vector<ScriptOp> ops_;
};

}  // namespace

TEST_CASE("scripted replay reproduces the output byte for byte") {
  const ScriptGenerator script(two_request_script("sys_user"));
  const auto first = run_sub_task(script, create_state("When a user is created, send an email"), demo_index());
  CHECK(first.retrieval_call_count == 2);
  CHECK(first.sites.size() == 2);
  CHECK(transcript_well_bracketed(first.transcript));
  CHECK(std::holds_alternative<Done>(first.transcript.back()));

  const ScriptedGenerator replay(transcript_from_jsonl(transcript_to_jsonl(first.transcript)));
  const auto second = run_sub_task(replay, create_state("When a user is created, send an email"), demo_index());
  CHECK(second.text == first.text);
  CHECK(second.retrieval_call_count == 2);
  CHECK(transcript_to_jsonl(second.transcript) == transcript_to_jsonl(first.transcript));
  CHECK(parse_outline(second.text).row_count() == 2);
}

TEST_CASE("replay detects divergence") {
  const std::vector<ScriptOp> ops = {Fragment{"abc"}};
  PromptState state;
  state.emitted = "abd";
  CHECK_THROWS_AS(next_from_script(ops, state, true), GeneratorFault);
  state.emitted = "abcd";
  CHECK_THROWS_AS(next_from_script(ops, state, true), GeneratorFault);
  state.emitted = "ab";
  CHECK(std::get<Fragment>(next_from_script(ops, state, true)).text == "c");
  state.emitted = "abc";
  CHECK(std::holds_alternative<Done>(next_from_script(ops, state, true)));
  CHECK_THROWS_AS(next_from_script(ops, state, false), GeneratorFault);
}

TEST_CASE("teacher forcing puts the gold into a full list") {
  const FixedRetriever wrong({"a", "b", "c", "d", "e"});
  const ScriptGenerator script(two_request_script("sys_user"));
  RunOptions options;
  options.teacher_forcing = {true, {"sys_user", "send_email"}};
  const auto result = run_sub_task(script, create_state("x"), wrong, options);
  REQUIRE(result.sites.size() == 2);
  CHECK(wrong.calls == 2);
  CHECK(result.sites[0].choices.size() == 4);
  CHECK(result.sites[0].rank_of("sys_user") == 4u);
  CHECK(result.sites[0].forced);
  CHECK(result.sites[1].contains("send_email"));
  CHECK(result.sites[1].choices.size() == 4);
  // The engine state saw the forced lists too.
  const auto* injected = std::get_if<RankedChoices>(&result.transcript[2]);
  REQUIRE(injected != nullptr);
  CHECK(injected->contains("sys_user"));

  SUBCASE("gold already present is left alone") {
    RankedChoices rc{"q", ArtifactKind::kTableName, "", 4, {{"sys_user", 0.5, ""}}, false};
    force_gold(rc, "sys_user");
    CHECK_FALSE(rc.forced);
    CHECK(rc.choices.size() == 1);
  }
  SUBCASE("short list gets the gold appended") {
    RankedChoices rc{"q", ArtifactKind::kTableName, "", 4, {{"incident", 0.5, ""}}, false};
    force_gold(rc, "sys_user");
    CHECK(rc.forced);
    REQUIRE(rc.choices.size() == 2);
    CHECK(rc.choices[1].payload == "sys_user");
    CHECK(rc.choices[0].payload == "incident");
  }
}

TEST_CASE("constrained output repairs or rejects names outside the choices") {
  const ScriptGenerator script(two_request_script("userz"));
  const PromptState state = create_state("When a user is created, send an email");
  const auto raw = run_sub_task(script, state, demo_index());
  REQUIRE(raw.sites[0].contains("sys_user"));
  REQUIRE_FALSE(raw.sites[0].contains("userz"));

  const auto repaired = constrain_output(raw, state, demo_catalog());
  REQUIRE(repaired.repairs.size() == 1);
  CHECK(repaired.repairs[0].find("userz") != std::string::npos);
  const Outline outline = parse_outline(repaired.text);
  CHECK(outline.trigger.table == raw.sites[0].choices.front().payload);
  CHECK(outline.rows[0].name == "send_email");

  ConstraintOptions strict;
  strict.repair_mode = false;
  try {
    constrain_output(raw, state, demo_catalog(), strict);
    FAIL("expected ConstraintViolation");
  } catch (const ConstraintViolation& e) {
    REQUIRE(e.offending().size() == 1);
    CHECK(e.offending()[0].find("'userz'") != std::string::npos);
    CHECK(e.code() == "ConstraintViolation");
  }

  const auto clean = run_sub_task(ScriptGenerator(two_request_script("sys_user")), state, demo_index());
  const auto unchanged = constrain_output(clean, state, demo_catalog(), strict);
  CHECK(unchanged.repairs.empty());
  CHECK(unchanged.text == clean.text);
}

TEST_CASE("transcripts round trip through JSON lines") {
  const RankedChoices choices{"user", ArtifactKind::kTableName, "", 4, {{"sys_user", 0.75, "table:sys_user"}}, true};
  const std::vector<TranscriptEntry> transcript = {
      Fragment{"a \"quoted\"\n\ttab é"}, ChoicesRequest{ArtifactKind::kColumnValue, "close", "incident_task.state"},
      choices, Done{}};
  const std::string jsonl = transcript_to_jsonl(transcript);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 4);
  CHECK(transcript_from_jsonl(jsonl) == transcript);
  CHECK(transcript_well_bracketed(transcript));
  CHECK_THROWS_AS(transcript_from_jsonl("{\"event\":\"nope\"}\n"), SyntaxError);
  CHECK_THROWS_AS(transcript_from_jsonl("not json\n"), SyntaxError);

  CHECK_FALSE(transcript_well_bracketed({ChoicesRequest{ArtifactKind::kTableName, "q", ""}}));
  CHECK_FALSE(transcript_well_bracketed({choices}));
  CHECK_FALSE(transcript_well_bracketed({ChoicesRequest{ArtifactKind::kTableName, "q", ""}, Fragment{"x"}, choices}));
  CHECK_FALSE(transcript_well_bracketed({Done{}, Fragment{"x"}}));
  CHECK(transcript_well_bracketed({}));
}

TEST_CASE("engine guards") {
  RunOptions small;
  small.budget = 16;
  CHECK_THROWS_AS(run_sub_task(EndlessGenerator(), create_state("x"), demo_index(), small), BudgetExceeded);
  CHECK_THROWS_AS(run_sub_task(SilentGenerator(), create_state("x"), demo_index()), GeneratorFault);

  std::stop_source stop;
  stop.request_stop();
  RunOptions cancelled;
  cancelled.stop = stop.get_token();
  CHECK_THROWS_AS(run_sub_task(EndlessGenerator(), create_state("x"), demo_index(), cancelled), Cancelled);

  const ScriptGenerator script(two_request_script("sys_user"));
  const auto degraded = run_sub_task(script, create_state("x"), FailingRetriever());
  CHECK(degraded.retrieval_failures == 2);
  CHECK(degraded.retrieval_call_count == 2);
  for (const auto& site : degraded.sites) CHECK(site.choices.empty());
  CHECK(transcript_well_bracketed(degraded.transcript));
}

TEST_CASE("choices stream to the observer in request order") {
  std::vector<ArtifactKind> seen;
  RunOptions options;
  options.on_choices = [&](const RankedChoices& rc) { seen.push_back(rc.kind); };
  run_sub_task(ScriptGenerator(two_request_script("sys_user")), create_state("x"), demo_index(), options);
  CHECK(seen == std::vector<ArtifactKind>{ArtifactKind::kTableName, ArtifactKind::kStepName});
}

TEST_CASE("sentinel kind inference") {
  using flowforge::SubTask;
  auto req = infer_sentinel_request(SubTask::kCreateFlow, "steps:\n  - annotation: \"send an email\"\n    name: ", "r");
  REQUIRE(req);
  CHECK(req->kind == ArtifactKind::kStepName);
  CHECK(req->query == "send an email");

  req = infer_sentinel_request(SubTask::kCreateFlow, kOutlineHead, "When an incident is created");
  REQUIRE(req);
  CHECK(req->kind == ArtifactKind::kTableName);
  CHECK(req->query == "When an incident is created");

  req = infer_sentinel_request(SubTask::kPopulateInputs, "inputs:\n  - name: \"table\"\n    value: ", "users");
  REQUIRE(req);
  CHECK(req->kind == ArtifactKind::kTableName);
  req = infer_sentinel_request(SubTask::kPopulateInputs, "  - name: \"conditions\"\n    condition: ", "users");
  REQUIRE(req);
  CHECK(req->kind == ArtifactKind::kColumnName);

  CHECK_FALSE(infer_sentinel_request(SubTask::kCreateFlow, "  event: ", "r"));
  CHECK_FALSE(infer_sentinel_request(SubTask::kPopulateInputs, "  - name: ", "r"));
  CHECK_FALSE(infer_sentinel_request(SubTask::kCreateFlow, kOutlineHead, ""));
}

TEST_CASE("raw text generator splits on the sentinel") {
  auto completion = std::make_shared<CannedCompletion>(std::vector<std::string>{
      "trigger:\n  table: choices:", "choices:", "\"incident\"\n  event: \"created\"\nsteps: []\n"});
  const SentinelTextGenerator generator(completion);
  const auto result = run_sub_task(generator, create_state("When an incident is created"), demo_index());
  CHECK(result.retrieval_call_count == 1);
  REQUIRE(result.sites.size() == 1);
  CHECK(result.sites[0].kind == ArtifactKind::kTableName);
  CHECK(result.text == "trigger:\n  table: \"incident\"\n  event: \"created\"\nsteps: []\n");
  // The prompt after the injection lists the choices after the sentinel.
  const std::string& last = completion->prompts.back();
  CHECK(last.find("table: choices:\n1. incident\n") != std::string::npos);

  auto confused = std::make_shared<CannedCompletion>(std::vector<std::string>{"choices:"});
  CHECK_THROWS_AS(run_sub_task(SentinelTextGenerator(confused), create_state("x"), demo_index()), GeneratorFault);
}

TEST_CASE("a step without inputs needs no retrieval") {
  const auto catalog = std::make_shared<const EnvironmentCatalog>(
      load_catalog({{"steps", "end.yaml", "name: end_flow\ndescription: Stop the flow\ninputs: []\n"},
                    {"tables", "t.yaml", "name: incident\nlabel: Incident\ncolumns:\n  - name: sys_id\n    label: Sys ID\n"}}));
  const LexicalIndex index = build_index(*catalog);
  Workflow skeleton;
  skeleton.requirement = "When an incident is created, stop the flow";
  skeleton.trigger.table = "incident";
  skeleton.trigger.event = TriggerEvent::kCreated;
  skeleton.steps.push_back({"end_flow", "stop the flow", 1, 0, {}});
  const PromptState state = populate_state(skeleton, extract_outline(skeleton), 1, true);
  const ReferenceGenerator generator(catalog);
  const auto result = run_sub_task(generator, state, index);
  CHECK(result.retrieval_call_count == 0);
  CHECK(result.sites.empty());
  CHECK(parse_input_list(result.text).empty());
}

TEST_CASE("prompt state for a populate call") {
  const Workflow w = reminder_workflow();
  const Outline outline = extract_outline(w);
  const PromptState with_inputs = populate_state(w, outline, 3, false);
  const PromptState outline_only = populate_state(w, outline, 3, true);
  CHECK(target_row(with_inputs).name == "send_email");
  const Workflow ctx = parse_workflow(with_inputs.context);
  REQUIRE(ctx.steps.size() == 2);
  CHECK(ctx.steps[0].inputs == w.steps[0].inputs);
  const Workflow bare = parse_workflow(outline_only.context);
  REQUIRE(bare.steps.size() == 2);
  for (const auto& s : bare.steps) CHECK(s.inputs.empty());
  CHECK(render_prompt(with_inputs).find("target: 3\n") != std::string::npos);

  PromptState bad = with_inputs;
  bad.target_order = 9;
  CHECK_THROWS_AS(target_row(bad), GeneratorFault);
}

TEST_CASE("generator registry") {
  auto& registry = GeneratorRegistry::instance();
  for (const char* name : {"reference", "scripted", "http"}) CHECK(registry.contains(name));
  CHECK_THROWS_AS(registry.create("nope", {}), std::invalid_argument);
  CHECK_THROWS_AS(registry.create("reference", {}), std::invalid_argument);
  CHECK_THROWS_AS(registry.create("http", {}), std::invalid_argument);
  CHECK(registry.create("reference", {shared_catalog(), "", ""})->name() == "reference");
  registry.add("endless", [](const GeneratorConfig&) { return std::make_shared<EndlessGenerator>(); });
  CHECK(registry.contains("endless"));
}
