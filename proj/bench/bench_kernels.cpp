// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP versions of the parallel kernels.

#include <benchmark/benchmark.h>

#include "flowforge/dataset.hpp"
#include "flowforge/evaluator.hpp"
#include "flowforge/orchestrator.hpp"

using namespace flowforge;

namespace {

const std::filesystem::path kData = FLOWFORGE_DATA_DIR;

const EnvironmentCatalog& catalog() {
  static const EnvironmentCatalog c = load_catalog_dir(kData / "catalog");
  return c;
}

const std::vector<LabeledWorkflow>& corpus() {
  static const auto c = load_corpus(kData / "corpus");
  return c;
}

// Every ordered pair of corpus workflows.
const std::vector<EvaluationPair>& all_pairs() {
  static const auto pairs = [] {
    std::vector<EvaluationPair> out;
    for (const auto& a : corpus()) {
      for (const auto& b : corpus()) out.push_back({a.id + "/" + b.id, a.workflow, b.workflow});
    }
    return out;
  }();
  return pairs;
}

void BM_EvaluateCorpusSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_corpus_serial(all_pairs()));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(all_pairs().size()));
}
void BM_EvaluateCorpusParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_corpus(all_pairs()));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(all_pairs().size()));
}

const LexicalIndex& index() {
  static const LexicalIndex i = build_index(catalog());
  return i;
}

const std::vector<RetrievalSample>& samples() {
  static const auto s = [] {
    const auto base = derive_retrieval_samples(corpus(), catalog());
    std::vector<RetrievalSample> out;
    for (int i = 0; i < 20; ++i) out.insert(out.end(), base.begin(), base.end());
    return out;
  }();
  return s;
}

void BM_EvaluateRetrievalSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_retrieval_serial(index(), samples()));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(samples().size()));
}
void BM_EvaluateRetrievalParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_retrieval(index(), samples()));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(samples().size()));
}

struct Prepared {
  Engine engine;
  OrchestrationConfig config;
  Outline outline;
  Workflow skeleton;
};

const Prepared& prepared() {
  static const Prepared p = [] {
    Prepared out{make_engine(catalog()), {}, {}, {}};
    out.config.generator = std::make_shared<ReferenceGenerator>(out.engine.catalog);
    const std::string requirement =
        "When a P1 incident is created, look up the user assigned to the incident and if the user has a "
        "manager, send an email reminding them of the incident";
    out.outline = create_flow(out.engine, out.config, requirement).outline;
    out.skeleton = workflow_from_outline(out.outline, requirement);
    return out;
  }();
  return p;
}

void populate(benchmark::State& state, bool parallel) {
  const Prepared& p = prepared();
  for (auto _ : state) {
    benchmark::DoNotOptimize(populate_all_outline_only(p.engine, p.config, p.skeleton, p.outline, parallel));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(p.outline.rows.size()));
}
void BM_PopulateOutlineOnlySerial(benchmark::State& state) { populate(state, false); }
void BM_PopulateOutlineOnlyParallel(benchmark::State& state) { populate(state, true); }

}  // namespace

BENCHMARK(BM_EvaluateCorpusSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateCorpusParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluateRetrievalSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateRetrievalParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PopulateOutlineOnlySerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PopulateOutlineOnlyParallel)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
