// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "support.hpp"

using namespace ff_test;

namespace {

std::vector<std::string> payloads(const RankedChoices& r) {
  std::vector<std::string> out;
  for (const auto& c : r.choices) out.push_back(c.payload);
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// Scope under which an artifact's payload is unique.
std::string own_scope(const ArtifactDoc& d) { return d.scope; }

}  // namespace

TEST_CASE("normalization") {
  CHECK(normalize_words("assigned_toISEMPTY") == std::vector<std::string>{"assigned", "to", "isempty"});
  CHECK(normalize_words("lookUpRecord") == std::vector<std::string>{"look", "up", "record"});
  CHECK(normalize_words("Élan naïve") == std::vector<std::string>{"elan", "naive"});
  const auto tf = term_frequencies("incidents tasks");
  CHECK(tf.count("w:incident"));
  CHECK(tf.count("w:task"));
  CHECK(tf.at("n:plural") == doctest::Approx(2.0));
  CHECK(tf.count("t:#in"));
}

TEST_CASE("step vocabulary covers every step name and description") {
  for (const auto& doc : all_artifacts(demo_catalog(), ArtifactKind::kStepName)) {
    for (const auto& [term, count] : term_frequencies(doc.text)) {
      CHECK_MESSAGE(demo_index().has_term(ArtifactKind::kStepName, term), term);
    }
    for (const auto& [term, count] : term_frequencies(doc.payload)) {
      CHECK(demo_index().has_term(ArtifactKind::kStepName, term));
    }
  }
}

TEST_CASE("catalog without tables") {
  const auto catalog = load_catalog({{"steps", "s.yaml",
                                      "name: log_message\ndescription: Write a message\ninputs:\n  - name: message\n"
                                      "    kind: text\n    required: true\n"}});
  const LexicalIndex index = build_index(catalog);
  CHECK(index.size(ArtifactKind::kColumnName) == 0);
  CHECK(index.sub_index(ArtifactKind::kColumnName).entries.empty());
  const auto r = index.query(ArtifactKind::kColumnName, "assigned to", {});
  CHECK(r.choices.empty());
  CHECK(index.query(ArtifactKind::kTableName, "incident", {}).choices.empty());
}

TEST_CASE("rebuilt index carries the new catalog version") {
  const auto first = load_catalog_dir(catalog_dir());
  const auto second = load_catalog_dir(catalog_dir());
  const LexicalIndex a = build_index(first);
  const LexicalIndex b = build_index(second);
  CHECK(a.catalog_version() == first.version());
  CHECK(b.catalog_version() == second.version());
  CHECK_FALSE(a.catalog_version() == b.catalog_version());
  QueryOptions options;
  options.require_fresh = &second.version();
  CHECK_THROWS_AS(a.query(ArtifactKind::kStepName, "send email", options), StaleIndex);
  CHECK_NOTHROW(b.query(ArtifactKind::kStepName, "send email", options));
}

TEST_CASE("exact names rank first with the top score for every artifact") {
  std::size_t total = 0, first = 0;
  for (const ArtifactKind kind : kAllArtifactKinds) {
    for (const auto& doc : all_artifacts(demo_catalog(), kind)) {
      QueryOptions options;
      options.scope = own_scope(doc);
      const auto r = demo_index().query(kind, doc.payload, options);
      ++total;
      REQUIRE_FALSE(r.choices.empty());
      if (r.choices[0].payload == doc.payload) ++first;
      CHECK_MESSAGE(r.choices[0].payload == doc.payload, doc.id);
      CHECK(r.choices[0].score == 1.0);
      for (std::size_t i = 1; i < r.choices.size(); ++i) CHECK(r.choices[i].score < 1.0);
    }
  }
  CHECK(total > 100);
  CHECK(first == total);
}

TEST_CASE("query examples") {
  QueryOptions options;
  const auto steps = demo_index().query(ArtifactKind::kStepName, "send an email reminding them of the incident", options);
  CHECK(steps.choices.size() <= 4);
  CHECK(contains(payloads(steps), "send_email"));

  options.scope = "incident_task";
  const auto columns = demo_index().query(ArtifactKind::kColumnName, "do not have any assignees", options);
  CHECK(contains(payloads(columns), "assigned_to"));
  for (const auto& c : columns.choices) CHECK(c.id.rfind("column:incident_task.", 0) == 0);

  options.scope = "incident_task.state";
  const auto values = demo_index().query(ArtifactKind::kColumnValue, "close them", options);
  REQUIRE_FALSE(values.choices.empty());
  CHECK(values.choices[0].payload == "3");
}

TEST_CASE("ranking properties over many queries") {
  WorkflowGenerator gen(demo_catalog(), 99);
  for (int i = 0; i < 300; ++i) {
    const ArtifactKind kind = kAllArtifactKinds[static_cast<std::size_t>(gen.uniform(0, 3))];
    QueryOptions options;
    options.k = gen.uniform(1, 12);
    if (kind == ArtifactKind::kColumnName || kind == ArtifactKind::kColumnValue) {
      options.scope = gen.pick(std::vector<std::string>{"incident", "sys_user", "problem", "change_request"});
    }
    const std::string q = gen.text(1, 5) + " " +
                          gen.pick(std::vector<std::string>{"assigned", "state", "user", "email", "closed", "record"});
    const auto r = demo_index().query(kind, q, options);
    CHECK(static_cast<int>(r.choices.size()) <= options.k);
    std::set<std::string> seen;
    for (std::size_t j = 0; j < r.choices.size(); ++j) {
      CHECK(r.choices[j].score > 0.0);
      CHECK(r.choices[j].score <= 1.0);
      CHECK(seen.insert(r.choices[j].payload).second);
      if (j > 0) {
        CHECK(r.choices[j - 1].score >= r.choices[j].score);
        if (r.choices[j - 1].score == r.choices[j].score) CHECK(r.choices[j - 1].payload < r.choices[j].payload);
      }
    }
  }
  CHECK_THROWS_AS(demo_index().query(ArtifactKind::kStepName, "x", QueryOptions{0, {}, {}, nullptr}), std::invalid_argument);
}

TEST_CASE("scores equal a from-scratch cosine") {
  const std::vector<std::string> queries = {"look up incident tasks that do not have assignees", "close them",
                                            "send an email to the manager", "P1 critical", "approval of a request",
                                            "wait one day before continuing"};
  for (const ArtifactKind kind : kAllArtifactKinds) {
    const auto docs = all_artifacts(demo_catalog(), kind);
    for (const auto& q : queries) {
      QueryOptions options;
      options.k = 100000;
      const auto r = demo_index().query(kind, q, options);
      std::map<std::string, double> by_id;
      for (const auto& c : r.choices) by_id[c.id] = c.score;
      std::set<std::string> payload_seen;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        const double expected = std::min(brute_force_cosine(docs, i, q), 0.999999);
        const auto it = by_id.find(docs[i].id);
        if (it != by_id.end()) {
          CHECK(it->second == doctest::Approx(expected).epsilon(1e-12));
        } else if (expected > 0.0) {
          // Only hidden when a same-payload document already ranked.
          bool shadowed = false;
          for (const auto& c : r.choices) shadowed |= c.payload == docs[i].payload;
          CHECK_MESSAGE(shadowed, docs[i].id);
        }
      }
    }
  }
}

TEST_CASE("filter callback hides artifacts") {
  QueryOptions options;
  options.filter = [](const ArtifactDoc& d) { return d.payload != "send_email"; };
  const auto r = demo_index().query(ArtifactKind::kStepName, "send_email", options);
  CHECK_FALSE(contains(payloads(r), "send_email"));
}

TEST_CASE("retrieval evaluation matches brute-force metrics") {
  const auto samples = derive_retrieval_samples(demo_corpus(), demo_catalog());
  const auto report = evaluate_retrieval(demo_index(), samples);
  const auto serial = evaluate_retrieval_serial(demo_index(), samples);
  const auto brute = brute_force_metrics(demo_index(), samples);
  CHECK(std::abs(report.overall.recall_at_1 - brute.recall_at_1) <= 1e-12);
  CHECK(std::abs(report.overall.recall_at_4 - brute.recall_at_4) <= 1e-12);
  CHECK(std::abs(report.overall.recall_at_10 - brute.recall_at_10) <= 1e-12);
  CHECK(std::abs(report.overall.hit_rate_at_4 - brute.hit_rate_at_4) <= 1e-12);
  CHECK(std::abs(report.overall.mrr - brute.mrr) <= 1e-12);
  CHECK(report.overall.mrr == serial.overall.mrr);
  CHECK(report.failures == serial.failures);
  CHECK(report.per_kind.size() == 4);
  for (const ArtifactKind kind : kAllArtifactKinds) {
    std::vector<RetrievalSample> subset;
    for (const auto& s : samples) {
      if (s.kind == kind) subset.push_back(s);
    }
    REQUIRE_FALSE(subset.empty());
    const auto b = brute_force_metrics(demo_index(), subset);
    CHECK(std::abs(report.per_kind.at(kind).mrr - b.mrr) <= 1e-12);
    CHECK(std::abs(report.per_kind.at(kind).recall_at_1 - b.recall_at_1) <= 1e-12);
    CHECK(report.per_kind.at(kind).count == subset.size());
  }
}

TEST_CASE("verbatim gold queries") {
  std::vector<RetrievalSample> samples;
  for (const ArtifactKind kind : kAllArtifactKinds) {
    for (const auto& doc : all_artifacts(demo_catalog(), kind)) samples.push_back({kind, doc.payload, doc.scope, {doc.payload}, {}});
  }
  const auto report = evaluate_retrieval(demo_index(), samples);
  CHECK(report.overall.recall_at_1 == 1.0);
  CHECK(report.overall.mrr == 1.0);
  CHECK(report.failures.empty());
}

TEST_CASE("gold missing from the catalog") {
  const std::vector<RetrievalSample> samples = {{ArtifactKind::kTableName, "user table", "", {"userz"}, {}}};
  const auto report = evaluate_retrieval(demo_index(), samples);
  CHECK(report.overall.recall_at_1 == 0.0);
  CHECK(report.overall.mrr == 0.0);
  REQUIRE(report.failures == std::vector<std::size_t>{0});
  CHECK(contains(report.outcomes[0].flags, "GOLD_NOT_INDEXED"));
  CHECK_THROWS_AS(evaluate_retrieval(demo_index(), {}), EmptySampleSet);
}

TEST_CASE("sample file round trip") {
  const auto samples = derive_retrieval_samples(demo_corpus(), demo_catalog());
  const auto back = read_retrieval_samples(write_retrieval_samples(samples));
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].kind == samples[i].kind);
    CHECK(back[i].query == samples[i].query);
    CHECK(back[i].scope == samples[i].scope);
    CHECK(back[i].gold == samples[i].gold);
  }
}

TEST_CASE("persisted index") {
  const fs::path file = fs::temp_directory_path() / "flowforge_test_index.json";
  demo_index().save(file);
  const LexicalIndex loaded = LexicalIndex::load(file, demo_catalog());
  for (const ArtifactKind kind : kAllArtifactKinds) {
    const auto a = demo_index().query(kind, "assigned user state closed", {});
    const auto b = loaded.query(kind, "assigned user state closed", {});
    CHECK(a == b);
  }
  const auto other = load_catalog({{"steps", "s.yaml",
                                    "name: log_message\ndescription: Write\ninputs:\n  - name: message\n    kind: text\n"}});
  CHECK_THROWS_AS(LexicalIndex::load(file, other), StaleIndex);
  CHECK_THROWS_AS(LexicalIndex::load(file.string() + ".missing", demo_catalog()), StaleIndex);
  fs::remove(file);
}
