#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cohkit/corpus.hpp"
#include "cohkit/errors.hpp"
#include "cohkit/text.hpp"

namespace cohkit {

/// Maps a discourse to a coherence score in [0, 1], higher meaning more
/// coherent. Implementations must be deterministic for a fixed state.
class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;

  virtual double score(const Discourse& d) = 0;

  // Backends with a cheaper bulk path (remote batching) override this.
  virtual std::vector<double> score_batch(std::span<const Discourse> ds) {
    std::vector<double> out;
    out.reserve(ds.size());
    for (const auto& d : ds) out.push_back(score(d));
    return out;
  }

  virtual std::string identity() const = 0;

  // False means callers must serialize calls into this backend.
  virtual bool concurrent_safe() const { return true; }
};

// Out-of-range output is a backend bug; it is never clamped.
inline double checked_score(double v, const ScorerBackend& backend) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw BackendError("backend '" + backend.identity() + "' returned " + std::to_string(v) +
                       ", outside [0, 1]");
  }
  return v;
}

class ConstantScorer final : public ScorerBackend {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(const Discourse&) override { return value_; }
  std::string identity() const override { return "constant(" + std::to_string(value_) + ")"; }

 private:
  double value_;
};

// ---------------------------------------------------------------------------
// Heuristic baseline

namespace detail {

inline const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> kWords = {
      "a",     "about", "above", "after",  "again", "against", "all",   "am",    "an",    "and",   "any",
      "are",   "as",    "at",    "be",     "been",  "before",  "being", "below", "between", "both", "but",
      "by",    "can",   "could", "did",    "do",    "does",    "doing", "down",  "during", "each", "few",
      "for",   "from",  "further", "had",  "has",   "have",    "having", "he",   "her",   "here",  "hers",
      "herself", "him", "himself", "his",  "how",   "i",       "if",    "in",    "into",  "is",    "it",
      "its",   "itself", "just", "me",     "more",  "most",    "my",    "myself", "no",   "nor",   "not",
      "now",   "of",    "off",   "on",     "once",  "only",    "or",    "other", "our",   "ours",  "ourselves",
      "out",   "over",  "own",   "same",   "she",   "should",  "so",    "some",  "such",  "than",  "that",
      "the",   "their", "theirs", "them",  "themselves", "then", "there", "these", "they", "this", "those",
      "through", "to",  "too",   "under",  "until", "up",      "very",  "was",   "we",    "were",  "what",
      "when",  "where", "which", "while",  "who",   "whom",    "why",   "will",  "with",  "would", "you",
      "your",  "yours", "yourself", "yourselves", "also", "said", "says", "s",  "t"};
  return kWords;
}

inline std::unordered_set<std::string> content_words(std::string_view sentence) {
  std::unordered_set<std::string> out;
  for (auto& w : text::words(sentence)) {
    if (!stop_words().count(w)) out.insert(std::move(w));
  }
  return out;
}

}  // namespace detail

/// Mean Jaccard overlap of content words between adjacent sentences.
/// A single sentence, or an adjacent pair with no content words at all,
/// scores 0.5.
inline double heuristic_score(const Discourse& d) {
  if (d.empty()) throw InvalidInput("heuristic_score: empty discourse");
  if (d.size() == 1) return 0.5;
  double total = 0.0;
  auto prev = detail::content_words(d.sentences[0]);
  for (std::size_t i = 1; i < d.size(); ++i) {
    auto cur = detail::content_words(d.sentences[i]);
    std::size_t shared = 0;
    for (const auto& w : prev) shared += cur.count(w);
    const auto uni = prev.size() + cur.size() - shared;
    total += uni == 0 ? 0.5 : static_cast<double>(shared) / static_cast<double>(uni);
    prev = std::move(cur);
  }
  return total / static_cast<double>(d.size() - 1);
}

class HeuristicScorer final : public ScorerBackend {
 public:
  double score(const Discourse& d) override { return heuristic_score(d); }
  std::string identity() const override { return "heuristic"; }
};

// ---------------------------------------------------------------------------
// Oracle

inline std::string content_key(const Discourse& d) { return text::join(d.sentences, "\x1f"); }

/// Known labels keyed by sentence content.
class LabelTable {
 public:
  // A conflicting label is an IntegrityError, or ignored (first label
  // wins) when conflict_is_error is false.
  void add(const Discourse& d, Label label, bool conflict_is_error = true) {
    auto [it, inserted] = labels_.emplace(content_key(d), label);
    if (!inserted && it->second != label && conflict_is_error) {
      throw IntegrityError("discourse labeled both coherent and incoherent: '" + text::join(d.sentences, " ") +
                           "'");
    }
  }

  std::optional<Label> find(const Discourse& d) const {
    auto it = labels_.find(content_key(d));
    if (it == labels_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return labels_.size(); }

  /// Labels every sample of a dataset. With adjacent pairs, each
  /// two-sentence window of a coherent sample is labeled coherent, and
  /// windows seen only in incoherent samples are labeled incoherent, so
  /// the table also answers the pair queries of unified scoring.
  static LabelTable from_dataset(const std::vector<LabeledSample>& samples, bool include_adjacent_pairs = true) {
    LabelTable t;
    for (const auto& s : samples) t.add(s.discourse, s.label);
    if (include_adjacent_pairs) {
      for (Label pass : {Label::coherent, Label::incoherent}) {
        for (const auto& s : samples) {
          if (s.label != pass) continue;
          const auto& ss = s.discourse.sentences;
          for (std::size_t i = 0; i + 1 < ss.size(); ++i) {
            Discourse pair{{ss[i], ss[i + 1]}, s.discourse.origin_id};
            if (pass == Label::coherent || !t.find(pair)) t.add(pair, pass, false);
          }
        }
      }
    }
    return t;
  }

 private:
  std::unordered_map<std::string, Label> labels_;
};

inline double oracle_score(const Discourse& d, const LabelTable& table) {
  auto label = table.find(d);
  if (!label) throw LookupError("oracle has no label for discourse '" + text::join(d.sentences, " ") + "'");
  return *label == Label::coherent ? 1.0 : 0.0;
}

class OracleScorer final : public ScorerBackend {
 public:
  explicit OracleScorer(LabelTable table, bool inverted = false) : table_(std::move(table)), inverted_(inverted) {}
  double score(const Discourse& d) override {
    const double v = oracle_score(d, table_);
    return inverted_ ? 1.0 - v : v;
  }
  std::string identity() const override { return inverted_ ? "oracle-inverted" : "oracle"; }

 private:
  LabelTable table_;
  bool inverted_;
};

// ---------------------------------------------------------------------------
// Unified scoring

struct UnifiedScoringConfig {
  double lambda = 0.5;
  double tie_epsilon = 1e-9;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda must lie in [0, 1]");
    if (!(tie_epsilon >= 0.0)) throw InvalidInput("tie_epsilon must be >= 0");
  }
};

struct ScoreBreakdown {
  double global = 0.0;              // S_g
  std::vector<double> pair_scores;  // S_l^i, one per adjacent pair
  std::optional<double> local;      // S_l, absent for one-sentence input
  double lambda = 0.5;
  double final_score = 0.0;
};

inline json to_json(const ScoreBreakdown& b) {
  json j;
  j["global"] = b.global;
  j["pair_scores"] = b.pair_scores;
  j["local"] = b.local ? json(*b.local) : json(nullptr);
  j["lambda"] = b.lambda;
  j["final"] = b.final_score;
  return j;
}

inline std::vector<Discourse> adjacent_pairs(const Discourse& d) {
  std::vector<Discourse> pairs;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) pairs.push_back(Discourse{{d.sentences[i], d.sentences[i + 1]}, d.origin_id});
  return pairs;
}

inline double global_score(ScorerBackend& f, const Discourse& d) {
  if (d.empty()) throw InvalidInput("global_score: empty discourse");
  return checked_score(f.score(d), f);
}

inline std::vector<double> local_scores(ScorerBackend& f, const Discourse& d) {
  const auto pairs = adjacent_pairs(d);
  if (pairs.empty()) return {};
  auto scores = f.score_batch(pairs);
  if (scores.size() != pairs.size()) throw BackendError("backend '" + f.identity() + "' returned wrong batch size");
  for (double v : scores) checked_score(v, f);
  return scores;
}

inline double interpolate(double global, double local, double lambda) { return (1.0 - lambda) * global + lambda * local; }

/// Whole-discourse score interpolated with the mean adjacent-pair score.
/// The global call and all pair calls go to the backend as one batch.
inline ScoreBreakdown unified_score(ScorerBackend& f, const Discourse& d, const UnifiedScoringConfig& cfg = {}) {
  cfg.validate();
  if (d.empty()) throw InvalidInput("unified_score: empty discourse");
  std::vector<Discourse> batch{d};
  for (auto& p : adjacent_pairs(d)) batch.push_back(std::move(p));
  auto scores = f.score_batch(batch);
  if (scores.size() != batch.size()) throw BackendError("backend '" + f.identity() + "' returned wrong batch size");
  for (double v : scores) checked_score(v, f);

  ScoreBreakdown b;
  b.lambda = cfg.lambda;
  b.global = scores[0];
  b.pair_scores.assign(scores.begin() + 1, scores.end());
  if (b.pair_scores.empty()) {
    b.final_score = b.global;
    return b;
  }
  double sum = 0.0;
  for (double v : b.pair_scores) sum += v;
  b.local = sum / static_cast<double>(b.pair_scores.size());
  b.final_score = interpolate(b.global, *b.local, cfg.lambda);
  return b;
}

enum class Preference { a, b, tie };

inline std::string_view to_string(Preference p) {
  switch (p) {
    case Preference::a: return "A";
    case Preference::b: return "B";
    case Preference::tie: return "tie";
  }
  return "tie";
}

inline Preference compare_scores(double a, double b, double tie_epsilon) {
  if (a > b + tie_epsilon) return Preference::a;
  if (b > a + tie_epsilon) return Preference::b;
  return Preference::tie;
}

inline Preference pairwise_rank(ScorerBackend& f, const Discourse& a, const Discourse& b,
                                const UnifiedScoringConfig& cfg = {}) {
  const auto sa = unified_score(f, a, cfg).final_score;
  const auto sb = unified_score(f, b, cfg).final_score;
  return compare_scores(sa, sb, cfg.tie_epsilon);
}

}  // namespace cohkit
