// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/retriever.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace flowforge {

namespace {

using json = nlohmann::json;

// Trigrams outnumber word tokens several to one; keep them from dominating.
constexpr double kTrigramWeight = 0.35;
constexpr double kNumberWeight = 2.0;
// Only a literal name match may reach a score of 1; a match on normalized
// words alone gets the cap.
constexpr double kNonExactCap = 0.999999;

const std::set<std::string, std::less<>> kStopwords = {
    "a",    "an",   "the", "of",   "to",   "and",  "or",   "is",    "are",  "be",
    "been", "it",   "its", "them", "they", "their", "that", "this", "these", "those",
    "in",   "on",   "at",  "for",  "with", "any",  "do",   "does",  "have", "has",
    "from", "by",   "as",  "was",  "were", "then", "so",   "all"};

// Latin-1 supplement (U+00C0..U+00FF) folded to ASCII; '?' drops the char.
constexpr std::string_view kLatin1Fold =
    "AAAAAAACEEEEIIIIDNOOOOO?OUUUUYTsaaaaaaaceeeeiiiidnooooo?ouuuuyty";

std::string ascii_fold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      continue;
    }
    if (c == 0xC3 && i + 1 < text.size()) {
      const auto next = static_cast<unsigned char>(text[i + 1]);
      if (next >= 0x80 && next <= 0xBF) {
        const char folded = kLatin1Fold[next - 0x80];
        out.push_back(folded == '?' ? ' ' : folded);
        ++i;
        continue;
      }
    }
    // Skip the rest of any other multi-byte sequence.
    while (i + 1 < text.size() && (static_cast<unsigned char>(text[i + 1]) & 0xC0) == 0x80) ++i;
    out.push_back(' ');
  }
  return out;
}

// Plural folding for word terms; trigrams keep the surface form.
std::string fold_plural(const std::string& word) {
  if (word.size() <= 3 || word.back() != 's') return word;
  if (word.ends_with("ss") || word.ends_with("us") || word.ends_with("is")) return word;
  if (word.ends_with("ies")) return word.substr(0, word.size() - 3) + "y";
  return word.substr(0, word.size() - 1);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

// Literal name equality, ignoring ASCII case.
bool same_name(std::string_view query, std::string_view payload) {
  return !query.empty() && query.size() == payload.size() &&
         std::equal(query.begin(), query.end(), payload.begin(), [](char a, char b) {
           return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
         });
}

bool scope_matches(const ArtifactDoc& doc, std::string_view scope) {
  if (scope.empty() || doc.kind == ArtifactKind::kStepName || doc.kind == ArtifactKind::kTableName) {
    return true;
  }
  if (doc.scope == scope) return true;
  return doc.scope.size() > scope.size() && doc.scope.starts_with(scope) &&
         doc.scope[scope.size()] == '.';
}

std::map<std::string, double> weigh(const std::map<std::string, double>& tf,
                                    const std::map<std::string, double>& idf) {
  std::map<std::string, double> weights;
  for (const auto& [term, count] : tf) {
    const auto it = idf.find(term);
    if (it == idf.end()) continue;
    const double scale = term.starts_with("t:") ? kTrigramWeight : term.starts_with("n:") ? kNumberWeight : 1.0;
    weights.emplace(term, (1.0 + std::log(count)) * it->second * scale);
  }
  return weights;
}

double norm_of(const std::map<std::string, double>& weights) {
  double sum = 0.0;
  for (const auto& [term, w] : weights) sum += w * w;
  return std::sqrt(sum);
}

LexicalIndex::SubIndex build_sub_index(std::vector<ArtifactDoc> docs) {
  LexicalIndex::SubIndex sub;
  std::vector<std::map<std::string, double>> tfs;
  std::map<std::string, std::size_t> df;
  for (auto& doc : docs) {
    auto tf = term_frequencies(doc.text);
    for (const auto& [term, count] : tf) ++df[term];
    tfs.push_back(std::move(tf));
    LexicalIndex::Entry entry;
    entry.name_words = normalize_words(doc.payload);
    entry.doc = std::move(doc);
    sub.entries.push_back(std::move(entry));
  }
  const double n = static_cast<double>(sub.entries.size());
  for (const auto& [term, count] : df) sub.idf.emplace(term, std::log(1.0 + n / static_cast<double>(count)));
  for (std::uint32_t i = 0; i < sub.entries.size(); ++i) {
    const auto weights = weigh(tfs[i], sub.idf);
    sub.entries[i].norm = norm_of(weights);
    for (const auto& [term, w] : weights) sub.postings[term].emplace_back(i, w);
  }
  return sub;
}

const LexicalIndex::SubIndex& empty_sub() {
  static const LexicalIndex::SubIndex sub;
  return sub;
}

SampleOutcome score_sample(const LexicalIndex& index, const RetrievalSample& sample,
                           std::size_t sample_index) {
  SampleOutcome outcome;
  outcome.sample_index = sample_index;
  outcome.flags = sample.flags;
  std::set<std::string> indexed;
  for (const auto& entry : index.sub_index(sample.kind).entries) {
    if (scope_matches(entry.doc, sample.scope)) indexed.insert(entry.doc.payload);
  }
  for (const auto& gold : sample.gold) {
    if (!indexed.count(gold)) {
      if (std::find(outcome.flags.begin(), outcome.flags.end(), "GOLD_NOT_INDEXED") ==
          outcome.flags.end()) {
        outcome.flags.emplace_back("GOLD_NOT_INDEXED");
      }
    }
  }
  QueryOptions options;
  options.k = static_cast<int>(std::max<std::size_t>(1, index.size(sample.kind, sample.scope)));
  options.scope = sample.scope;
  const auto ranked = index.query(sample.kind, sample.query, options);
  for (const auto& choice : ranked.choices) outcome.ranking.push_back(choice.payload);
  for (std::size_t r = 0; r < outcome.ranking.size(); ++r) {
    if (std::find(sample.gold.begin(), sample.gold.end(), outcome.ranking[r]) != sample.gold.end()) {
      outcome.first_gold_rank = r + 1;
      break;
    }
  }
  return outcome;
}

double recall_at(const SampleOutcome& outcome, const RetrievalSample& sample, std::size_t k) {
  std::set<std::string> gold(sample.gold.begin(), sample.gold.end());
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, outcome.ranking.size()); ++r) {
    hits += gold.count(outcome.ranking[r]);
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

RetrievalReport aggregate(const std::vector<RetrievalSample>& samples,
                          std::vector<SampleOutcome> outcomes) {
  RetrievalReport report;
  struct Sums {
    std::size_t n = 0;
    double r1 = 0, r4 = 0, r10 = 0, hit4 = 0, mrr = 0;
  };
  Sums overall;
  std::map<ArtifactKind, Sums> per_kind;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& outcome = outcomes[i];
    const double r1 = recall_at(outcome, samples[i], 1);
    const double r4 = recall_at(outcome, samples[i], 4);
    const double r10 = recall_at(outcome, samples[i], 10);
    const double hit4 = outcome.first_gold_rank >= 1 && outcome.first_gold_rank <= 4 ? 1.0 : 0.0;
    const double rr = outcome.first_gold_rank ? 1.0 / static_cast<double>(outcome.first_gold_rank) : 0.0;
    for (Sums* s : {&overall, &per_kind[samples[i].kind]}) {
      ++s->n;
      s->r1 += r1;
      s->r4 += r4;
      s->r10 += r10;
      s->hit4 += hit4;
      s->mrr += rr;
    }
    if (outcome.first_gold_rank != 1) report.failures.push_back(i);
  }
  auto finish = [](const Sums& s) {
    RetrievalMetrics m;
    m.count = s.n;
    if (s.n == 0) return m;
    const double n = static_cast<double>(s.n);
    m.recall_at_1 = s.r1 / n;
    m.recall_at_4 = s.r4 / n;
    m.recall_at_10 = s.r10 / n;
    m.hit_rate_at_4 = s.hit4 / n;
    m.mrr = s.mrr / n;
    return m;
  };
  report.overall = finish(overall);
  for (const auto& [kind, sums] : per_kind) report.per_kind[kind] = finish(sums);
  report.outcomes = std::move(outcomes);
  return report;
}

}  // namespace

std::vector<std::string> normalize_words(std::string_view text) {
  const std::string folded = ascii_fold(text);
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < folded.size(); ++i) {
    const auto c = static_cast<unsigned char>(folded[i]);
    if (!std::isalnum(c)) {
      flush();
      continue;
    }
    if (std::isupper(c) && !current.empty()) {
      const auto prev = static_cast<unsigned char>(folded[i - 1]);
      const bool next_lower =
          i + 1 < folded.size() && std::islower(static_cast<unsigned char>(folded[i + 1]));
      if (std::islower(prev) || (std::isupper(prev) && next_lower)) flush();
    }
    current.push_back(static_cast<char>(std::tolower(c)));
  }
  flush();
  return words;
}

std::map<std::string, double> term_frequencies(std::string_view text) {
  std::map<std::string, double> tf;
  for (const auto& word : normalize_words(text)) {
    if (kStopwords.count(word)) continue;
    const std::string folded = fold_plural(word);
    tf["w:" + folded] += 1.0;
    if (folded != word) tf["n:plural"] += 1.0;
    const std::string padded = "#" + word + "#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) tf["t:" + padded.substr(i, 3)] += 1.0;
  }
  return tf;
}

std::string compose_query(ArtifactKind kind, std::string_view annotation,
                          std::string_view requirement, bool context_expansion) {
  std::string query(annotation);
  if (context_expansion && kind == ArtifactKind::kColumnName && !requirement.empty()) {
    query += ' ';
    query += requirement;
  }
  return query;
}

bool RankedChoices::contains(std::string_view payload) const { return rank_of(payload).has_value(); }

std::optional<std::size_t> RankedChoices::rank_of(std::string_view payload) const {
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (choices[i].payload == payload) return i + 1;
  }
  return std::nullopt;
}

LexicalIndex build_index(const EnvironmentCatalog& catalog) {
  LexicalIndex index;
  for (const auto kind : kAllArtifactKinds) {
    index.subs_.emplace(kind, build_sub_index(all_artifacts(catalog, kind)));
  }
  index.version_ = catalog.version();
  return index;
}

const LexicalIndex::SubIndex& LexicalIndex::sub_index(ArtifactKind kind) const {
  const auto it = subs_.find(kind);
  return it == subs_.end() ? empty_sub() : it->second;
}

std::size_t LexicalIndex::size(ArtifactKind kind, std::string_view scope) const {
  std::size_t n = 0;
  for (const auto& entry : sub_index(kind).entries) n += scope_matches(entry.doc, scope) ? 1 : 0;
  return n;
}

bool LexicalIndex::has_term(ArtifactKind kind, std::string_view term) const {
  return sub_index(kind).idf.count(std::string(term)) > 0;
}

RankedChoices LexicalIndex::query(ArtifactKind kind, std::string_view query_text,
                                  const QueryOptions& options) const {
  if (options.k < 1) throw std::invalid_argument("k must be at least 1");
  if (options.require_fresh != nullptr && !(*options.require_fresh == version_)) {
    throw StaleIndex("index was built from catalog " + version_.digest + "#" +
                     std::to_string(version_.sequence) + ", current is " +
                     options.require_fresh->digest + "#" +
                     std::to_string(options.require_fresh->sequence));
  }
  RankedChoices result;
  result.query = std::string(query_text);
  result.kind = kind;
  result.scope = options.scope;
  result.k = options.k;

  const SubIndex& sub = sub_index(kind);
  const auto query_weights = weigh(term_frequencies(query_text), sub.idf);
  const double query_norm = norm_of(query_weights);
  const auto query_words = normalize_words(query_text);
  const std::string_view query_name = trim(query_text);

  std::vector<double> dot(sub.entries.size(), 0.0);
  for (const auto& [term, qw] : query_weights) {
    for (const auto& [doc, w] : sub.postings.at(term)) dot[doc] += qw * w;
  }

  std::vector<Choice> scored;
  for (std::uint32_t i = 0; i < sub.entries.size(); ++i) {
    const Entry& entry = sub.entries[i];
    if (!scope_matches(entry.doc, options.scope)) continue;
    if (options.filter && !options.filter(entry.doc)) continue;
    double score = 0.0;
    if (same_name(query_name, entry.doc.payload)) {
      score = 1.0;
    } else if (!query_words.empty() && query_words == entry.name_words) {
      score = kNonExactCap;
    } else if (query_norm > 0.0 && entry.norm > 0.0) {
      score = std::clamp(dot[i] / (query_norm * entry.norm), 0.0, kNonExactCap);
    }
    if (score > 0.0) scored.push_back({entry.doc.payload, score, entry.doc.id});
  }
  std::sort(scored.begin(), scored.end(), [](const Choice& a, const Choice& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.payload, a.id) < std::tie(b.payload, b.id);
  });
  std::set<std::string> seen;
  for (auto& choice : scored) {
    if (static_cast<int>(result.choices.size()) >= options.k) break;
    if (!seen.insert(choice.payload).second) continue;
    result.choices.push_back(std::move(choice));
  }
  return result;
}

void LexicalIndex::save(const std::filesystem::path& file) const {
  json root;
  root["format"] = "flowforge-lexical-index/1";
  root["catalog_digest"] = version_.digest;
  for (const auto& [kind, sub] : subs_) {
    json entries = json::array();
    for (const auto& e : sub.entries) {
      entries.push_back({{"id", e.doc.id},
                         {"text", e.doc.text},
                         {"payload", e.doc.payload},
                         {"scope", e.doc.scope},
                         {"name_words", e.name_words},
                         {"norm", e.norm}});
    }
    json postings = json::object();
    for (const auto& [term, list] : sub.postings) {
      json plist = json::array();
      for (const auto& [doc, w] : list) plist.push_back({doc, w});
      postings[term] = std::move(plist);
    }
    root["kinds"][std::string(artifact_kind_name(kind))] = {
        {"entries", std::move(entries)}, {"idf", sub.idf}, {"postings", std::move(postings)}};
  }
  std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << root.dump(1) << "\n";
  }
  std::filesystem::rename(tmp, file);
}

LexicalIndex LexicalIndex::load(const std::filesystem::path& file, const EnvironmentCatalog& catalog) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw StaleIndex("index file not found: " + file.string());
  const json root = json::parse(in);
  if (root.at("catalog_digest").get<std::string>() != catalog.version().digest) {
    throw StaleIndex("index " + file.string() + " was built from another catalog");
  }
  LexicalIndex index;
  for (const auto& [name, body] : root.at("kinds").items()) {
    const auto kind = parse_artifact_kind(name);
    if (!kind) throw StaleIndex("unknown artifact kind in index: " + name);
    SubIndex sub;
    for (const auto& e : body.at("entries")) {
      Entry entry;
      entry.doc = {e.at("id"), *kind, e.at("text"), e.at("payload"), e.at("scope")};
      entry.name_words = e.at("name_words").get<std::vector<std::string>>();
      entry.norm = e.at("norm").get<double>();
      sub.entries.push_back(std::move(entry));
    }
    sub.idf = body.at("idf").get<std::map<std::string, double>>();
    for (const auto& [term, list] : body.at("postings").items()) {
      auto& plist = sub.postings[term];
      for (const auto& p : list) plist.emplace_back(p.at(0).get<std::uint32_t>(), p.at(1).get<double>());
    }
    index.subs_.emplace(*kind, std::move(sub));
  }
  index.version_ = catalog.version();
  return index;
}

RetrievalReport evaluate_retrieval(const LexicalIndex& index,
                                   const std::vector<RetrievalSample>& samples) {
  if (samples.empty()) throw EmptySampleSet();
  std::vector<SampleOutcome> outcomes(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    outcomes[idx] = score_sample(index, samples[idx], idx);
  }
  return aggregate(samples, std::move(outcomes));
}

RetrievalReport evaluate_retrieval_serial(const LexicalIndex& index,
                                          const std::vector<RetrievalSample>& samples) {
  if (samples.empty()) throw EmptySampleSet();
  std::vector<SampleOutcome> outcomes;
  outcomes.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) outcomes.push_back(score_sample(index, samples[i], i));
  return aggregate(samples, std::move(outcomes));
}

std::vector<RetrievalSample> read_retrieval_samples(std::string_view jsonl) {
  std::vector<RetrievalSample> samples;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json record = json::parse(line);
    RetrievalSample sample;
    const auto kind = parse_artifact_kind(record.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown artifact kind in sample: " + record.at("kind").dump());
    sample.kind = *kind;
    sample.query = record.at("query").get<std::string>();
    sample.scope = record.value("scope", std::string());
    sample.gold = record.at("gold").get<std::vector<std::string>>();
    sample.flags = record.value("flags", std::vector<std::string>{});
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::string write_retrieval_samples(const std::vector<RetrievalSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    json record = {{"kind", artifact_kind_name(s.kind)},
                   {"query", s.query},
                   {"scope", s.scope},
                   {"gold", s.gold}};
    if (!s.flags.empty()) record["flags"] = s.flags;
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace flowforge
