#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cohkit/corpus.hpp"
#include "cohkit/errors.hpp"
#include "cohkit/scoring.hpp"

namespace cohkit {

enum class Measure { spearman, pearson, kendall };

inline std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::spearman: return "spearman";
    case Measure::pearson: return "pearson";
    case Measure::kendall: return "kendall";
  }
  return "spearman";
}

inline constexpr Measure kAllMeasures[] = {Measure::spearman, Measure::pearson, Measure::kendall};

// ---------------------------------------------------------------------------
// Coefficients

namespace detail {

inline void check_pair(std::span<const double> x, std::span<const double> y, const char* who) {
  if (x.size() != y.size()) throw InvalidInput(std::string(who) + ": vectors differ in length");
  if (x.size() < 2) throw InvalidInput(std::string(who) + ": need at least 2 observations");
}

}  // namespace detail

/// Product-moment correlation, computed from mean-centered sums.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y, "pearson");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Undefined("pearson: constant input vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y, "spearman");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  try {
    return pearson(rx, ry);
  } catch (const Undefined&) {
    throw Undefined("spearman: constant input vector");
  }
}

namespace detail {

// Counts inversions (pairs i<j with v[i] > v[j]) by merge sort.
inline std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

inline std::int64_t tied_pairs(const std::vector<double>& sorted) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

}  // namespace detail

/// Kendall tau-b in O(n log n) (Knight's algorithm).
inline double kendall(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y, "kendall");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  std::int64_t ties_x = 0, ties_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    ties_x += t * (t - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[idx[b]] == y[idx[a]]) ++b;
      const auto u = static_cast<std::int64_t>(b - a);
      ties_xy += u * (u - 1) / 2;
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const std::int64_t swaps = detail::count_inversions(ys, buf, 0, n);
  const std::int64_t ties_y = detail::tied_pairs(ys);  // ys is now sorted

  if (ties_x == n0 || ties_y == n0) throw Undefined("kendall: every pair is tied in one input");
  const std::int64_t numerator = n0 - ties_x - ties_y + ties_xy - 2 * swaps;
  const double tau = static_cast<double>(numerator) /
                     std::sqrt(static_cast<double>(n0 - ties_x) * static_cast<double>(n0 - ties_y));
  return std::clamp(tau, -1.0, 1.0);
}

inline double correlation(Measure m, std::span<const double> x, std::span<const double> y) {
  switch (m) {
    case Measure::spearman: return spearman(x, y);
    case Measure::pearson: return pearson(x, y);
    case Measure::kendall: return kendall(x, y);
  }
  throw InvalidInput("unknown measure");
}

// ---------------------------------------------------------------------------
// Rating matrices

struct RatingCell {
  Discourse output;
  double human = 0.0;
};

/// n documents x J systems, every document rated for the same systems.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(std::vector<std::string> doc_ids, std::vector<std::string> system_ids,
               std::vector<std::vector<RatingCell>> cells)
      : doc_ids_(std::move(doc_ids)), system_ids_(std::move(system_ids)), cells_(std::move(cells)) {
    if (cells_.size() != doc_ids_.size()) throw InvalidInput("rating matrix: row count differs from document count");
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (cells_[i].size() != system_ids_.size()) {
        throw InvalidInput("rating matrix: document '" + doc_ids_[i] + "' has " + std::to_string(cells_[i].size()) +
                           " system outputs, expected " + std::to_string(system_ids_.size()));
      }
    }
  }

  std::size_t documents() const noexcept { return doc_ids_.size(); }
  std::size_t systems() const noexcept { return system_ids_.size(); }
  bool empty() const noexcept { return doc_ids_.empty() || system_ids_.empty(); }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::vector<std::string>& system_ids() const noexcept { return system_ids_; }
  const RatingCell& cell(std::size_t doc, std::size_t sys) const { return cells_.at(doc).at(sys); }

  std::vector<double> human_row(std::size_t doc) const {
    std::vector<double> out;
    for (const auto& c : cells_.at(doc)) out.push_back(c.human);
    return out;
  }

 private:
  std::vector<std::string> doc_ids_;
  std::vector<std::string> system_ids_;
  std::vector<std::vector<RatingCell>> cells_;
};

// Model scores aligned with a RatingMatrix: scores[doc][system].
using ScoreGrid = std::vector<std::vector<double>>;

inline void check_shape(const RatingMatrix& m, const ScoreGrid& scores) {
  if (m.empty()) throw InvalidInput("rating matrix is empty");
  if (scores.size() != m.documents()) {
    throw InvalidInput("scores cover " + std::to_string(scores.size()) + " documents, ratings have " +
                       std::to_string(m.documents()));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != m.systems()) {
      throw InvalidInput("document '" + m.doc_ids()[i] + "': " + std::to_string(scores[i].size()) +
                         " scores for " + std::to_string(m.systems()) + " systems");
    }
  }
}

/// Scores every cell with the unified strategy.
inline ScoreGrid score_matrix(const RatingMatrix& m, ScorerBackend& f, const UnifiedScoringConfig& cfg = {}) {
  ScoreGrid out(m.documents());
  for (std::size_t i = 0; i < m.documents(); ++i) {
    for (std::size_t j = 0; j < m.systems(); ++j) out[i].push_back(unified_score(f, m.cell(i, j).output, cfg).final_score);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

enum class Level { sample, dataset };

inline std::string_view to_string(Level l) { return l == Level::sample ? "sample" : "dataset"; }

struct Coefficient {
  std::optional<double> value;
  std::string reason;  // set when value is absent
};

struct SkippedDocument {
  std::string doc_id;
  Measure measure = Measure::spearman;
  std::string reason;
};

struct CorrelationReport {
  Level level = Level::dataset;
  std::string label;
  Coefficient rho, r, tau;
  std::vector<SkippedDocument> skipped;
  std::size_t n_documents = 0;
  std::size_t n_cells = 0;

  Coefficient& get(Measure m) { return m == Measure::spearman ? rho : m == Measure::pearson ? r : tau; }
  const Coefficient& get(Measure m) const { return m == Measure::spearman ? rho : m == Measure::pearson ? r : tau; }
};

struct SampleLevelResult {
  Coefficient value;
  std::vector<SkippedDocument> skipped;
};

/// Mean over documents of K(model scores, human scores) across systems.
/// Documents where K is undefined are skipped and listed.
inline SampleLevelResult sample_level(Measure k, const RatingMatrix& m, const ScoreGrid& scores) {
  check_shape(m, scores);
  SampleLevelResult out;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < m.documents(); ++i) {
    const auto human = m.human_row(i);
    try {
      sum += correlation(k, scores[i], human);
      ++used;
    } catch (const Error& e) {
      out.skipped.push_back({m.doc_ids()[i], k, e.what()});
    }
  }
  if (used == 0) {
    out.value.reason = "correlation undefined for every document";
  } else {
    out.value.value = sum / static_cast<double>(used);
  }
  return out;
}

/// K over all n*J cells flattened into one pair of vectors.
inline Coefficient dataset_level(Measure k, const RatingMatrix& m, const ScoreGrid& scores) {
  check_shape(m, scores);
  std::vector<double> model, human;
  for (std::size_t i = 0; i < m.documents(); ++i) {
    for (std::size_t j = 0; j < m.systems(); ++j) {
      model.push_back(scores[i][j]);
      human.push_back(m.cell(i, j).human);
    }
  }
  Coefficient c;
  try {
    c.value = correlation(k, model, human);
  } catch (const Error& e) {
    c.reason = e.what();
  }
  return c;
}

inline CorrelationReport sample_level_report(const RatingMatrix& m, const ScoreGrid& scores) {
  CorrelationReport rep;
  rep.level = Level::sample;
  rep.n_documents = m.documents();
  rep.n_cells = m.documents() * m.systems();
  for (auto k : kAllMeasures) {
    auto res = sample_level(k, m, scores);
    rep.get(k) = res.value;
    rep.skipped.insert(rep.skipped.end(), res.skipped.begin(), res.skipped.end());
  }
  return rep;
}

inline CorrelationReport dataset_level_report(const RatingMatrix& m, const ScoreGrid& scores) {
  CorrelationReport rep;
  rep.level = Level::dataset;
  rep.n_documents = m.documents();
  rep.n_cells = m.documents() * m.systems();
  for (auto k : kAllMeasures) rep.get(k) = dataset_level(k, m, scores);
  return rep;
}

struct BucketReport {
  std::size_t sentences = 0;
  CorrelationReport report;  // dataset-level within the bucket
  std::optional<double> mean;  // mean of rho, r, tau when all three are defined
};

/// Groups cells by sentence count and computes dataset-level rho/r/tau
/// per group. Groups with fewer than 2 cells are reported as undefined.
inline std::vector<BucketReport> length_bucket_report(const RatingMatrix& m, const ScoreGrid& scores) {
  check_shape(m, scores);
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::map<std::size_t, std::vector<std::string>> docs_in;
  for (std::size_t i = 0; i < m.documents(); ++i) {
    for (std::size_t j = 0; j < m.systems(); ++j) {
      auto& g = groups[m.cell(i, j).output.size()];
      g.first.push_back(scores[i][j]);
      g.second.push_back(m.cell(i, j).human);
      auto& d = docs_in[m.cell(i, j).output.size()];
      if (d.empty() || d.back() != m.doc_ids()[i]) d.push_back(m.doc_ids()[i]);
    }
  }
  std::vector<BucketReport> out;
  for (auto& [len, vecs] : groups) {
    BucketReport b;
    b.sentences = len;
    b.report.level = Level::dataset;
    b.report.label = std::to_string(len) + " sentences";
    b.report.n_cells = vecs.first.size();
    b.report.n_documents = docs_in[len].size();
    for (auto k : kAllMeasures) {
      auto& c = b.report.get(k);
      if (vecs.first.size() < 2) {
        c.reason = "bucket has fewer than 2 outputs";
        continue;
      }
      try {
        c.value = correlation(k, vecs.first, vecs.second);
      } catch (const Error& e) {
        c.reason = e.what();
      }
    }
    if (b.report.rho.value && b.report.r.value && b.report.tau.value) {
      b.mean = (*b.report.rho.value + *b.report.r.value + *b.report.tau.value) / 3.0;
    }
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise ranking

struct RankingPair {
  std::string id;
  Discourse a;
  Discourse b;
  Preference gold = Preference::a;
};

inline double verdict_credit(Preference verdict, Preference gold) {
  if (verdict == Preference::tie) return 0.5;
  return verdict == gold ? 1.0 : 0.0;
}

/// Fraction of pairs where the scorer's preference matches gold; a tie
/// earns half credit.
inline double ranking_accuracy(const std::vector<RankingPair>& pairs, ScorerBackend& f,
                               const UnifiedScoringConfig& cfg = {}) {
  if (pairs.empty()) throw InvalidInput("ranking_accuracy: no pairs");
  double credit = 0.0;
  for (const auto& p : pairs) {
    if (p.gold == Preference::tie) throw InvalidInput("ranking pair '" + p.id + "' has no gold winner");
    credit += verdict_credit(pairwise_rank(f, p.a, p.b, cfg), p.gold);
  }
  return credit / static_cast<double>(pairs.size());
}

/// (positive, negative) pairs from a labeled dataset, gold = positive.
inline std::vector<RankingPair> pairs_from_dataset(const std::vector<LabeledSample>& samples) {
  std::unordered_map<std::string, const LabeledSample*> positives;
  for (const auto& s : samples) {
    if (s.label == Label::coherent) positives[s.pair_id] = &s;
  }
  std::vector<RankingPair> out;
  for (const auto& s : samples) {
    if (s.label != Label::incoherent) continue;
    auto it = positives.find(s.pair_id);
    if (it == positives.end()) throw IntegrityError("negative '" + s.id + "' has no positive");
    out.push_back({s.pair_id, it->second->discourse, s.discourse, Preference::a});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const Coefficient& c) {
  if (c.value) return json(*c.value);
  return json{{"value", nullptr}, {"reason", c.reason}};
}

inline json to_json(const CorrelationReport& r) {
  json j;
  j["level"] = to_string(r.level);
  if (!r.label.empty()) j["label"] = r.label;
  j["rho"] = to_json(r.rho);
  j["r"] = to_json(r.r);
  j["tau"] = to_json(r.tau);
  j["n_documents"] = r.n_documents;
  j["n_cells"] = r.n_cells;
  json skipped = json::array();
  for (const auto& s : r.skipped) {
    skipped.push_back({{"doc_id", s.doc_id}, {"measure", to_string(s.measure)}, {"reason", s.reason}});
  }
  j["skipped_documents"] = skipped;
  return j;
}

inline json to_json(const BucketReport& b) {
  json j = to_json(b.report);
  j["sentences"] = b.sentences;
  j["mean"] = b.mean ? json(*b.mean) : json(nullptr);
  return j;
}

inline std::string format_coefficient(const Coefficient& c) {
  if (!c.value) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *c.value;
  return os.str();
}

/// Aligned plain-text table, one row per report.
inline std::string format_table(const std::vector<CorrelationReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "level" << std::right << std::setw(10) << "rho" << std::setw(10) << "r"
     << std::setw(10) << "tau" << std::setw(8) << "cells" << std::setw(9) << "skipped" << '\n';
  for (const auto& r : reports) {
    std::string name(to_string(r.level));
    if (!r.label.empty()) name += " [" + r.label + "]";
    os << std::left << std::setw(22) << name << std::right << std::setw(10) << format_coefficient(r.rho)
       << std::setw(10) << format_coefficient(r.r) << std::setw(10) << format_coefficient(r.tau) << std::setw(8)
       << r.n_cells << std::setw(9) << r.skipped.size() << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Input adapters

namespace detail {

inline std::string first_string(const json& j, std::initializer_list<const char*> keys, std::size_t line) {
  for (const char* k : keys) {
    if (auto it = j.find(k); it != j.end()) {
      if (!it->is_string()) throw ParseError(line, std::string("field '") + k + "' must be a string");
      return it->get<std::string>();
    }
  }
  std::string names;
  for (const char* k : keys) names += std::string(names.empty() ? "" : "/") + k;
  throw ParseError(line, "missing field " + names);
}

inline Discourse output_from_json(const json& j, std::size_t line) {
  if (j.contains("sentences") || j.contains("text")) return discourse_from_json(j, line);
  if (auto it = j.find("decoded"); it != j.end() && it->is_string()) {
    try {
      return Discourse{segment_sentences(it->get<std::string>()), ""};
    } catch (const InvalidInput& e) {
      throw ParseError(line, e.what());
    }
  }
  throw ParseError(line, "record needs 'sentences', 'text' or 'decoded'");
}

// Expert coherence ratings are averaged across annotators.
inline double human_from_json(const json& j, std::size_t line) {
  if (auto it = j.find("human"); it != j.end()) {
    if (!it->is_number()) throw ParseError(line, "field 'human' must be a number");
    return it->get<double>();
  }
  if (auto it = j.find("expert_annotations"); it != j.end() && it->is_array() && !it->empty()) {
    double sum = 0.0;
    for (const auto& a : *it) {
      if (!a.is_object() || !a.contains("coherence") || !a["coherence"].is_number()) {
        throw ParseError(line, "expert annotation without numeric 'coherence'");
      }
      sum += a["coherence"].get<double>();
    }
    return sum / static_cast<double>(it->size());
  }
  throw ParseError(line, "record needs 'human' or 'expert_annotations'");
}

}  // namespace detail

/// Reads line-delimited ratings. Accepts the SummEval annotation layout
/// ({id, model_id, decoded, expert_annotations[{coherence}]}) and a plain
/// layout ({doc_id, system_id, sentences|text, human}).
inline RatingMatrix read_ratings(std::istream& in) {
  std::vector<std::string> doc_order;
  std::vector<std::string> system_order;
  std::unordered_map<std::string, std::map<std::string, RatingCell>> rows;
  detail::for_each_json_line(in, [&](std::size_t line, const json& j) {
    const auto doc = detail::first_string(j, {"doc_id", "id"}, line);
    const auto sys = detail::first_string(j, {"system_id", "model_id"}, line);
    RatingCell cell{detail::output_from_json(j, line), detail::human_from_json(j, line)};
    cell.output.origin_id = doc + "/" + sys;
    auto [it, fresh_doc] = rows.try_emplace(doc);
    if (fresh_doc) doc_order.push_back(doc);
    if (!it->second.emplace(sys, std::move(cell)).second) {
      throw ParseError(line, "duplicate rating for document '" + doc + "', system '" + sys + "'");
    }
    if (std::find(system_order.begin(), system_order.end(), sys) == system_order.end()) system_order.push_back(sys);
  });
  std::vector<std::vector<RatingCell>> cells;
  for (const auto& doc : doc_order) {
    const auto& row = rows[doc];
    std::vector<RatingCell> out;
    for (const auto& sys : system_order) {
      auto it = row.find(sys);
      if (it == row.end()) throw InvalidInput("document '" + doc + "' has no rating for system '" + sys + "'");
      out.push_back(it->second);
    }
    cells.push_back(std::move(out));
  }
  return RatingMatrix(std::move(doc_order), std::move(system_order), std::move(cells));
}

inline RatingMatrix read_ratings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open ratings file '" + path.string() + "'");
  return read_ratings(in);
}

/// Reads {doc_id, system_id, score} lines aligned to the matrix layout.
inline ScoreGrid read_scores(std::istream& in, const RatingMatrix& m) {
  std::unordered_map<std::string, std::size_t> doc_index, sys_index;
  for (std::size_t i = 0; i < m.documents(); ++i) doc_index[m.doc_ids()[i]] = i;
  for (std::size_t j = 0; j < m.systems(); ++j) sys_index[m.system_ids()[j]] = j;
  std::vector<std::vector<std::optional<double>>> grid(m.documents(), std::vector<std::optional<double>>(m.systems()));
  detail::for_each_json_line(in, [&](std::size_t line, const json& j) {
    const auto doc = detail::first_string(j, {"doc_id", "id"}, line);
    const auto sys = detail::first_string(j, {"system_id", "model_id"}, line);
    auto di = doc_index.find(doc);
    if (di == doc_index.end()) throw InvalidInput("scores mention document '" + doc + "' absent from ratings");
    auto si = sys_index.find(sys);
    if (si == sys_index.end()) {
      throw InvalidInput("document '" + doc + "': system '" + sys + "' absent from ratings");
    }
    auto it = j.find("score");
    if (it == j.end() || !it->is_number()) throw ParseError(line, "missing numeric 'score'");
    auto& slot = grid[di->second][si->second];
    if (slot) throw InvalidInput("document '" + doc + "': duplicate score for system '" + sys + "'");
    slot = it->get<double>();
  });
  ScoreGrid out(m.documents());
  for (std::size_t i = 0; i < m.documents(); ++i) {
    for (std::size_t j = 0; j < m.systems(); ++j) {
      if (!grid[i][j]) {
        throw InvalidInput("document '" + m.doc_ids()[i] + "': missing score for system '" + m.system_ids()[j] + "'");
      }
      out[i].push_back(*grid[i][j]);
    }
  }
  return out;
}

inline ScoreGrid read_scores(const std::filesystem::path& path, const RatingMatrix& m) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open scores file '" + path.string() + "'");
  return read_scores(in, m);
}

namespace detail {

inline Discourse candidate_from_json(const json& v, const char* name, std::size_t line) {
  if (v.is_string()) {
    try {
      return Discourse{segment_sentences(v.get<std::string>()), ""};
    } catch (const InvalidInput& e) {
      throw ParseError(line, std::string("candidate '") + name + "': " + e.what());
    }
  }
  if (v.is_array()) return discourse_from_json(json{{"sentences", v}}, line);
  if (v.is_object()) return discourse_from_json(v, line);
  throw ParseError(line, std::string("candidate '") + name + "' must be text, a sentence array or an object");
}

}  // namespace detail

/// One pair record: {id?, a, b, gold}, where a and b are raw text, a
/// sentence array or a {sentences|text} object and gold is "A" or "B".
inline RankingPair pair_from_json(const json& j, std::size_t line) {
  RankingPair p;
  p.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(line);
  if (!j.contains("a") || !j.contains("b")) throw ParseError(line, "pair needs fields 'a' and 'b'");
  p.a = detail::candidate_from_json(j["a"], "a", line);
  p.b = detail::candidate_from_json(j["b"], "b", line);
  const auto gold = text::to_lower(detail::require_string(j, "gold", line));
  if (gold == "a") {
    p.gold = Preference::a;
  } else if (gold == "b") {
    p.gold = Preference::b;
  } else {
    throw ParseError(line, "gold must be 'A' or 'B'");
  }
  return p;
}

inline std::vector<RankingPair> read_pairs(std::istream& in) {
  std::vector<RankingPair> out;
  detail::for_each_json_line(in, [&](std::size_t line, const json& j) { out.push_back(pair_from_json(j, line)); });
  return out;
}

inline json to_json(const RankingPair& p) {
  json j;
  j["id"] = p.id;
  j["a"] = p.a.sentences;
  j["b"] = p.b.sentences;
  j["gold"] = p.gold == Preference::a ? "A" : "B";
  return j;
}

}  // namespace cohkit
