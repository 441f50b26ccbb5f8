// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowforge/catalog.hpp"
#include "flowforge/errors.hpp"

namespace flowforge {

class StaleIndex : public Error {
 public:
  explicit StaleIndex(const std::string& message) : Error("StaleIndex", message) {}
};

class EmptySampleSet : public Error {
 public:
  EmptySampleSet() : Error("EmptySampleSet", "retrieval evaluation needs at least one sample") {}
};

inline constexpr int kDefaultChoices = 4;

/// Lowercased, ASCII-folded word tokens with underscore and camel-case splits.
std::vector<std::string> normalize_words(std::string_view text);

struct Choice {
  std::string payload;
  double score = 0.0;
  std::string id;

  friend bool operator==(const Choice&, const Choice&) = default;
};

/// Ranked retrieval result. Scores are in [0,1] and non-increasing; ties are
/// ordered by payload.
struct RankedChoices {
  std::string query;
  ArtifactKind kind = ArtifactKind::kStepName;
  std::string scope;
  int k = kDefaultChoices;
  std::vector<Choice> choices;
  bool forced = false;  // teacher forcing inserted the gold payload

  bool contains(std::string_view payload) const;
  std::optional<std::size_t> rank_of(std::string_view payload) const;  // 1-based

  friend bool operator==(const RankedChoices&, const RankedChoices&) = default;
};

struct QueryOptions {
  int k = kDefaultChoices;
  std::string scope;  // table for COLUMN_NAME; table or table.column for COLUMN_VALUE
  ArtifactFilter filter;
  /// When set, a query against an index built from another catalog version
  /// raises StaleIndex.
  const CatalogVersion* require_fresh = nullptr;
};

/// Narrow retrieval seam; the lexical index is one implementation.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual RankedChoices query(ArtifactKind kind, std::string_view query_text,
                              const QueryOptions& options) const = 0;
};

/// Token + character-trigram TF-IDF index with one sub-index per artifact kind.
class LexicalIndex : public Retriever {
 public:
  struct Entry {
    ArtifactDoc doc;
    std::vector<std::string> name_words;  // normalized payload, for name matches
    double norm = 0.0;
  };

  struct SubIndex {
    std::vector<Entry> entries;
    std::map<std::string, double> idf;
    std::map<std::string, std::vector<std::pair<std::uint32_t, double>>> postings;
  };

  LexicalIndex() = default;

  RankedChoices query(ArtifactKind kind, std::string_view query_text,
                      const QueryOptions& options) const override;

  const CatalogVersion& catalog_version() const { return version_; }
  const SubIndex& sub_index(ArtifactKind kind) const;
  /// Number of documents matching `scope` for `kind`.
  std::size_t size(ArtifactKind kind, std::string_view scope = {}) const;
  bool has_term(ArtifactKind kind, std::string_view term) const;

  void save(const std::filesystem::path& file) const;
  /// Loads a persisted index; `catalog` must have the digest it was built from.
  static LexicalIndex load(const std::filesystem::path& file, const EnvironmentCatalog& catalog);

  friend LexicalIndex build_index(const EnvironmentCatalog& catalog);

 private:
  std::map<ArtifactKind, SubIndex> subs_;
  CatalogVersion version_;
};

LexicalIndex build_index(const EnvironmentCatalog& catalog);

/// Term weights for a piece of text: `w:<word>` tokens (plural-folded), an
/// `n:plural` count of folded words, and `t:<trigram>`
/// character trigrams over `#word#`.
std::map<std::string, double> term_frequencies(std::string_view text);

/// COLUMN_NAME queries optionally append the requirement to the annotation.
std::string compose_query(ArtifactKind kind, std::string_view annotation,
                          std::string_view requirement, bool context_expansion);

// --- retrieval evaluation ----------------------------------------------------

struct RetrievalSample {
  ArtifactKind kind = ArtifactKind::kStepName;
  std::string query;
  std::string scope;
  std::vector<std::string> gold;
  std::vector<std::string> flags;  // e.g. GOLD_NOT_INDEXED (set by producers)
};

struct RetrievalMetrics {
  std::size_t count = 0;
  double recall_at_1 = 0.0;
  double recall_at_4 = 0.0;
  double recall_at_10 = 0.0;
  double hit_rate_at_4 = 0.0;
  double mrr = 0.0;
};

struct SampleOutcome {
  std::size_t sample_index = 0;
  std::vector<std::string> ranking;  // full payload ranking
  std::size_t first_gold_rank = 0;   // 1-based; 0 = gold never retrieved
  std::vector<std::string> flags;
};

struct RetrievalReport {
  RetrievalMetrics overall;
  std::map<ArtifactKind, RetrievalMetrics> per_kind;
  std::vector<SampleOutcome> outcomes;  // one per sample, sample order
  std::vector<std::size_t> failures;    // samples whose gold is not at rank 1
};

/// Ranks every in-scope document per sample (parallel over samples).
RetrievalReport evaluate_retrieval(const LexicalIndex& index,
                                   const std::vector<RetrievalSample>& samples);
/// Single-threaded reference of evaluate_retrieval.
RetrievalReport evaluate_retrieval_serial(const LexicalIndex& index,
                                          const std::vector<RetrievalSample>& samples);

/// Line-delimited JSON records with fields kind, query, scope, gold.
std::vector<RetrievalSample> read_retrieval_samples(std::string_view jsonl);
std::string write_retrieval_samples(const std::vector<RetrievalSample>& samples);

}  // namespace flowforge
