#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cohkit/corpus.hpp"
#include "cohkit/errors.hpp"
#include "cohkit/parallel.hpp"
#include "cohkit/rng.hpp"
#include "cohkit/scoring.hpp"
#include "cohkit/text.hpp"
#include "cohkit/version.hpp"

namespace cohkit {

enum class LocalStrategy { generative, rule };

inline std::string_view to_string(LocalStrategy s) { return s == LocalStrategy::generative ? "generative" : "rule"; }

struct RetryPolicy {
  unsigned max_attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  double backoff_multiplier = 2.0;
};

struct AugmentationConfig {
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 5;
  double filter_threshold = 0.5;  // delta; candidates scoring below it are dropped
  double global_fraction = 0.25;
  std::uint64_t seed = 0;
  std::size_t ngram_order = 2;
  LocalStrategy local_strategy = LocalStrategy::generative;
  std::size_t target_positives = 0;  // 0 uses every source
  std::size_t workers = 1;
  std::size_t max_new_tokens = 64;
  double temperature = 0.8;
  RetryPolicy retry;

  void validate() const {
    if (!(filter_threshold >= 0.0 && filter_threshold <= 1.0)) throw InvalidInput("filter threshold must lie in [0, 1]");
    if (min_sentences < 2 || min_sentences > max_sentences) {
      throw InvalidInput("need 2 <= min_sentences <= max_sentences");
    }
    if (!(global_fraction >= 0.0 && global_fraction <= 1.0)) throw InvalidInput("global_fraction must lie in [0, 1]");
    if (ngram_order < 1) throw InvalidInput("ngram_order must be >= 1");
    if (retry.max_attempts < 1) throw InvalidInput("retry.max_attempts must be >= 1");
  }
};

inline json to_json(const AugmentationConfig& c) {
  json j;
  j["min_sentences"] = c.min_sentences;
  j["max_sentences"] = c.max_sentences;
  j["delta"] = c.filter_threshold;
  j["global_fraction"] = c.global_fraction;
  j["seed"] = c.seed;
  j["ngram_order"] = c.ngram_order;
  j["local_strategy"] = to_string(c.local_strategy);
  j["target_positives"] = c.target_positives;
  j["workers"] = c.workers;
  j["max_new_tokens"] = c.max_new_tokens;
  j["temperature"] = c.temperature;
  j["retry"] = {{"max_attempts", c.retry.max_attempts},
                {"initial_backoff_ms", c.retry.initial_backoff.count()},
                {"backoff_multiplier", c.retry.backoff_multiplier}};
  return j;
}

// ---------------------------------------------------------------------------
// Global augmentation

/// A random reordering of the sentences that differs from the input.
/// Identity draws are rejected and resampled.
inline Discourse global_shuffle(const Discourse& d, Rng& rng) {
  if (d.size() < 2) throw TooShort("global_shuffle: need at least 2 sentences");
  const bool all_equal = std::all_of(d.sentences.begin(), d.sentences.end(),
                                     [&](const std::string& s) { return s == d.sentences.front(); });
  if (all_equal) throw InvalidInput("global_shuffle: every sentence is identical, no distinct order exists");
  Discourse out = d;
  do {
    out.sentences = d.sentences;
    rng.shuffle(std::span<std::string>(out.sentences));
  } while (out == d);
  return out;
}

// ---------------------------------------------------------------------------
// Local augmentation: mask selection and context truncation

enum class ContextSide { prefix, suffix, both };

inline std::string_view to_string(ContextSide s) {
  switch (s) {
    case ContextSide::prefix: return "prefix";
    case ContextSide::suffix: return "suffix";
    case ContextSide::both: return "both";
  }
  return "both";
}

struct MaskedContext {
  std::vector<std::string> before;  // s_1 .. s_{k-1}
  std::vector<std::string> after;   // s_{k+1} .. s_n
  ContextSide side = ContextSide::both;
  std::size_t mask_index = 0;  // 1-based k

  // Context length counting the mask slot.
  std::size_t length() const noexcept { return before.size() + after.size() + 1; }
};

/// Uniform 1-based k over the interior positions {2, ..., n-1}.
inline std::size_t select_mask_index(const Discourse& d, Rng& rng) {
  if (d.size() < 3) throw NoInterior("select_mask_index: need at least 3 sentences, have " + std::to_string(d.size()));
  return 2 + static_cast<std::size_t>(rng.uniform_index(d.size() - 2));
}

inline MaskedContext make_context(const Discourse& d, std::size_t k, ContextSide side) {
  if (!(k > 1 && k < d.size())) {
    throw InvalidInput("mask index " + std::to_string(k) + " is not interior to a " + std::to_string(d.size()) +
                       "-sentence discourse");
  }
  MaskedContext ctx;
  ctx.side = side;
  ctx.mask_index = k;
  if (side != ContextSide::suffix) ctx.before.assign(d.sentences.begin(), d.sentences.begin() + (k - 1));
  if (side != ContextSide::prefix) ctx.after.assign(d.sentences.begin() + k, d.sentences.end());
  return ctx;
}

/// Keeps either the sentences before the mask or the ones after it, each
/// with probability 1/2.
inline MaskedContext truncate_context(const Discourse& d, std::size_t k, Rng& rng) {
  if (!(k > 1 && k < d.size())) {
    throw InvalidInput("mask index " + std::to_string(k) + " is not interior to a " + std::to_string(d.size()) +
                       "-sentence discourse");
  }
  return make_context(d, k, rng.coin() ? ContextSide::prefix : ContextSide::suffix);
}

inline Discourse substitute_sentence(const Discourse& d, std::size_t k, std::string substitute) {
  Discourse out = d;
  out.sentences.at(k - 1) = std::move(substitute);
  return out;
}

// ---------------------------------------------------------------------------
// Generator contract

struct GenerationRequest {
  std::vector<std::string> context_sentences;
  ContextSide side = ContextSide::prefix;  // which side was kept
  std::size_t max_new_tokens = 64;
  double temperature = 0.8;
};

struct GenerationResult {
  std::string substitute;
  std::string model_id;
};

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
  virtual std::string identity() const = 0;
  virtual bool concurrent_safe() const { return true; }
};

/// Test double: always returns the same sentence.
class EchoGenerator final : public GeneratorBackend {
 public:
  explicit EchoGenerator(std::string sentence = "This sentence was written by the echo generator.")
      : sentence_(std::move(sentence)) {}
  GenerationResult generate(const GenerationRequest&) override { return {sentence_, "echo"}; }
  std::string identity() const override { return "echo"; }

 private:
  std::string sentence_;
};

/// Audit record for one generator call.
struct GenerationExchange {
  std::string origin_id;
  std::size_t mask_index = 0;
  ContextSide side = ContextSide::prefix;
  std::string context_hash;
  std::string substitute;
  std::string model_id;
  std::optional<double> filter_score;
  unsigned attempts = 0;
  std::string status;  // ok, empty, backend_error
};

inline json to_json(const GenerationExchange& e) {
  json j;
  j["origin_id"] = e.origin_id;
  j["mask_index"] = e.mask_index;
  j["side"] = to_string(e.side);
  j["context_hash"] = e.context_hash;
  j["substitute"] = e.substitute;
  j["model_id"] = e.model_id;
  j["filter_score"] = e.filter_score ? json(*e.filter_score) : json(nullptr);
  j["attempts"] = e.attempts;
  j["status"] = e.status;
  return j;
}

inline std::string context_hash(const MaskedContext& ctx) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(std::string(to_string(ctx.side)) + "\x1e" +
                                                        text::join(ctx.before, "\x1f") + "\x1e" +
                                                        text::join(ctx.after, "\x1f"))));
  return buf;
}

inline GenerationRequest make_request(const MaskedContext& ctx, std::size_t max_new_tokens, double temperature) {
  if (ctx.side == ContextSide::both) throw InvalidInput("generation requests carry exactly one context side");
  GenerationRequest req;
  req.side = ctx.side;
  req.context_sentences = ctx.side == ContextSide::prefix ? ctx.before : ctx.after;
  req.max_new_tokens = max_new_tokens;
  req.temperature = temperature;
  return req;
}

/// Asks the generator for s_k'. Backend failures are retried with
/// exponential backoff; after the last attempt a BackendError escapes.
/// An empty generation yields nullopt. When record is non-null it is
/// filled with the exchange whatever the outcome.
inline std::optional<std::string> generate_substitute(const MaskedContext& ctx, GeneratorBackend& backend,
                                                      const RetryPolicy& retry = {},
                                                      GenerationExchange* record = nullptr,
                                                      std::size_t max_new_tokens = 64, double temperature = 0.8) {
  const auto request = make_request(ctx, max_new_tokens, temperature);
  GenerationExchange ex;
  ex.mask_index = ctx.mask_index;
  ex.side = ctx.side;
  ex.context_hash = context_hash(ctx);
  auto backoff = retry.initial_backoff;
  std::string last_error;
  for (unsigned attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    ex.attempts = attempt;
    try {
      auto result = backend.generate(request);
      ex.model_id = result.model_id;
      ex.substitute = text::normalize_space(result.substitute);
      ex.status = ex.substitute.empty() ? "empty" : "ok";
      if (record) *record = ex;
      if (ex.substitute.empty()) return std::nullopt;
      return ex.substitute;
    } catch (const BackendError& e) {
      last_error = e.what();
    }
    if (attempt < retry.max_attempts && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::chrono::milliseconds::rep>(static_cast<double>(backoff.count()) * retry.backoff_multiplier));
    }
  }
  ex.status = "backend_error";
  if (record) *record = ex;
  throw BackendError("generator '" + backend.identity() + "' failed after " + std::to_string(retry.max_attempts) +
                     " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Candidates and coherence filtering

struct CandidatePair {
  Discourse positive;
  Discourse negative;
  std::string substitute;
  std::size_t mask_index = 0;
  std::optional<double> filter_score;
  LocalStrategy strategy = LocalStrategy::generative;
};

/// Keeps a pair iff its negative scores >= delta. Pairs without a
/// recorded score are scored first; a pair whose scoring fails is dropped
/// and noted in warnings.
inline std::vector<CandidatePair> coherence_filter(std::vector<CandidatePair> pairs, ScorerBackend& scorer, double delta,
                                                   std::vector<std::string>* warnings = nullptr) {
  std::vector<CandidatePair> kept;
  for (auto& p : pairs) {
    if (!p.filter_score) {
      try {
        p.filter_score = checked_score(scorer.score(p.negative), scorer);
      } catch (const Error& e) {
        if (warnings) warnings->push_back("filter dropped candidate from '" + p.positive.origin_id + "': " + e.what());
        continue;
      }
    }
    if (*p.filter_score >= delta) kept.push_back(std::move(p));
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Rule-based local baseline

using NgramCounts = std::unordered_map<std::string, std::size_t>;

/// n-gram counts over lowercased, punctuation-stripped word tokens.
inline NgramCounts ngram_counts(std::string_view sentence, std::size_t order) {
  if (order < 1) throw InvalidInput("ngram order must be >= 1");
  const auto toks = text::words(sentence);
  NgramCounts out;
  for (std::size_t i = 0; i + order <= toks.size(); ++i) {
    std::string key = toks[i];
    for (std::size_t j = 1; j < order; ++j) key += ' ' + toks[i + j];
    ++out[key];
  }
  return out;
}

// Clipped overlap: sum over shared n-grams of the smaller count.
inline std::size_t ngram_overlap(const NgramCounts& a, const NgramCounts& b) {
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  std::size_t total = 0;
  for (const auto& [g, c] : small) {
    if (auto it = large.find(g); it != large.end()) total += std::min(c, it->second);
  }
  return total;
}

/// Pre-tokenized sentence pool for repeated rule-based queries.
class RulePool {
 public:
  RulePool(const std::vector<Discourse>& pool, std::size_t order) : order_(order) {
    for (const auto& d : pool) {
      for (const auto& s : d.sentences) entries_.push_back({s, d.origin_id, ngram_counts(s, order)});
    }
  }

  std::size_t order() const noexcept { return order_; }
  bool empty() const noexcept { return entries_.empty(); }

  // Highest-overlap sentence not originating from exclude_origin; the
  // first such sentence in pool order wins ties.
  std::optional<std::string> best_match(std::string_view query, const std::string& exclude_origin) const {
    const auto q = ngram_counts(query, order_);
    const Entry* best = nullptr;
    std::size_t best_overlap = 0;
    for (const auto& e : entries_) {
      if (!exclude_origin.empty() && e.origin == exclude_origin) continue;
      const auto ov = ngram_overlap(q, e.counts);
      if (!best || ov > best_overlap) {
        best = &e;
        best_overlap = ov;
      }
    }
    if (!best) return std::nullopt;
    return best->sentence;
  }

 private:
  struct Entry {
    std::string sentence;
    std::string origin;
    NgramCounts counts;
  };
  std::size_t order_;
  std::vector<Entry> entries_;
};

/// The pool sentence with the highest n-gram overlap with s_k.
inline std::string rule_based_substitute(const Discourse& d, std::size_t k, const std::vector<Discourse>& pool,
                                         std::size_t ngram_order = 2) {
  if (k < 1 || k > d.size()) throw InvalidInput("rule_based_substitute: mask index out of range");
  for (const auto& p : pool) {
    if (!d.origin_id.empty() && p.origin_id == d.origin_id) {
      throw InvalidInput("rule_based_substitute: pool contains the discourse's own origin '" + d.origin_id + "'");
    }
  }
  RulePool index(pool, ngram_order);
  auto best = index.best_match(d.sentences[k - 1], "");
  if (!best) throw InvalidInput("rule_based_substitute: empty pool");
  return *best;
}

// ---------------------------------------------------------------------------
// Dataset assembly

struct BuildCounts {
  std::size_t n_pos_global = 0;
  std::size_t n_neg_global = 0;
  std::size_t n_local_candidates = 0;
  std::size_t n_local_kept = 0;
  std::size_t total = 0;
  // Why local candidates did not survive.
  std::size_t n_generation_failed = 0;
  std::size_t n_generation_empty = 0;
  std::size_t n_identity_dropped = 0;
  std::size_t n_filter_failed = 0;
  std::size_t n_filtered_out = 0;
  std::size_t n_global_failed = 0;
};

struct BuildReport {
  BuildCounts counts;
  double delta = 0.5;
  std::uint64_t seed = 0;
  std::string generator_id;
  std::string filter_id;
  double wall_time_seconds = 0.0;
  AugmentationConfig config;
  std::vector<std::string> warnings;
};

inline json to_json(const BuildReport& r) {
  const auto& c = r.counts;
  json j;
  j["tool"] = "cohkit";
  j["version"] = kVersion;
  j["counts"] = {{"n_pos_global", c.n_pos_global},
                 {"n_neg_global", c.n_neg_global},
                 {"n_local_candidates", c.n_local_candidates},
                 {"n_local_kept", c.n_local_kept},
                 {"total", c.total},
                 {"n_generation_failed", c.n_generation_failed},
                 {"n_generation_empty", c.n_generation_empty},
                 {"n_identity_dropped", c.n_identity_dropped},
                 {"n_filter_failed", c.n_filter_failed},
                 {"n_filtered_out", c.n_filtered_out},
                 {"n_global_failed", c.n_global_failed}};
  j["delta"] = r.delta;
  j["seed"] = r.seed;
  j["backends"] = {{"generator", r.generator_id}, {"filter", r.filter_id}};
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["config"] = to_json(r.config);
  j["warnings"] = r.warnings;
  return j;
}

struct BuildResult {
  std::vector<LabeledSample> samples;
  BuildReport report;
  std::vector<GenerationExchange> exchanges;
};

inline std::size_t expected_total(std::size_t n_neg_global, std::size_t n_local_kept) {
  return 2 * (n_neg_global + n_local_kept);
}

namespace detail {

enum class SourceOutcome {
  global_ok,
  global_failed,
  local_kept,
  generation_failed,
  generation_empty,
  identity,
  filter_failed,
  filtered_out,
};

struct SourceResult {
  SourceOutcome outcome = SourceOutcome::global_failed;
  Discourse negative;
  Provenance provenance = Provenance::global_shuffle;
  std::optional<GenerationExchange> exchange;
  std::string warning;
};

// Serializes calls when the backend says it is not reentrant.
class CallGate {
 public:
  explicit CallGate(bool serialize) : serialize_(serialize) {}
  template <typename Fn>
  auto operator()(Fn&& fn) {
    if (!serialize_) return fn();
    std::lock_guard lock(mu_);
    return fn();
  }

 private:
  bool serialize_;
  std::mutex mu_;
};

}  // namespace detail

/// Builds the labeled dataset. A seeded share (global_fraction) of the
/// sources is shuffled; two-sentence sources always go there since they
/// have no interior sentence. Every other source yields one local
/// candidate, kept with its positive only if it passes the coherence
/// filter (when a filter scorer is given). Randomness for a source depends
/// only on (seed, origin_id, k), so worker count does not change output.
inline BuildResult build_dataset(const AugmentationConfig& config, const std::vector<Discourse>& sources_in,
                                 GeneratorBackend* generator, ScorerBackend* filter_scorer) {
  using detail::SourceOutcome;
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (config.local_strategy == LocalStrategy::generative && !generator) {
    throw InvalidInput("generative local strategy needs a generator backend");
  }

  std::vector<Discourse> sources = sources_in;
  if (config.target_positives > 0) {
    if (sources.size() < config.target_positives) {
      throw InsufficientData(config.target_positives, sources.size(), "not enough source discourses");
    }
    sources.resize(config.target_positives);
  }
  if (sources.empty()) throw InsufficientData(1, 0, "no source discourses");
  {
    std::unordered_set<std::string> seen;
    for (const auto& d : sources) {
      if (d.origin_id.empty()) throw InvalidInput("source discourse without origin_id");
      if (!seen.insert(d.origin_id).second) throw InvalidInput("duplicate source origin_id '" + d.origin_id + "'");
      if (d.size() < 2) throw TooShort("source '" + d.origin_id + "' has fewer than 2 sentences");
    }
  }

  BuildResult result;
  auto& report = result.report;
  report.config = config;
  report.delta = config.filter_threshold;
  report.seed = config.seed;
  report.generator_id = config.local_strategy == LocalStrategy::rule ? "rule-ngram" + std::to_string(config.ngram_order)
                                                                     : generator->identity();
  report.filter_id = filter_scorer ? filter_scorer->identity() : "none";

  // Route sources to global or local augmentation.
  const std::size_t n = sources.size();
  const auto global_quota = static_cast<std::size_t>(std::llround(config.global_fraction * static_cast<double>(n)));
  std::vector<bool> is_global(n, false);
  std::size_t n_global = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sources[i].size() == 2) {
      is_global[i] = true;
      ++n_global;
    }
  }
  if (n_global > global_quota) {
    report.warnings.push_back(std::to_string(n_global) + " two-sentence sources exceed the global quota of " +
                              std::to_string(global_quota));
  }
  {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(config.seed, "route"));
    rng.shuffle(std::span<std::size_t>(order));
    for (auto i : order) {
      if (n_global >= global_quota) break;
      if (!is_global[i]) {
        is_global[i] = true;
        ++n_global;
      }
    }
  }

  std::optional<RulePool> rule_pool;
  if (config.local_strategy == LocalStrategy::rule) rule_pool.emplace(sources, config.ngram_order);

  detail::CallGate gen_gate(generator && !generator->concurrent_safe());
  detail::CallGate filter_gate(filter_scorer && !filter_scorer->concurrent_safe());

  auto process = [&](std::size_t i) -> detail::SourceResult {
    const auto& d = sources[i];
    detail::SourceResult r;
    if (is_global[i]) {
      Rng rng(derive_seed(config.seed, d.origin_id, 0));
      try {
        r.negative = global_shuffle(d, rng);
        r.provenance = Provenance::global_shuffle;
        r.outcome = SourceOutcome::global_ok;
      } catch (const Error& e) {
        r.outcome = SourceOutcome::global_failed;
        r.warning = "global shuffle skipped '" + d.origin_id + "': " + e.what();
      }
      return r;
    }

    Rng pick(derive_seed(config.seed, d.origin_id, 1));
    const auto k = select_mask_index(d, pick);
    Rng rng(derive_seed(config.seed, d.origin_id, 0x100 + k));
    std::string substitute;
    if (config.local_strategy == LocalStrategy::rule) {
      auto best = rule_pool->best_match(d.sentences[k - 1], d.origin_id);
      if (!best) {
        r.outcome = SourceOutcome::generation_empty;
        r.warning = "rule pool has no sentence for '" + d.origin_id + "'";
        return r;
      }
      substitute = *best;
      r.provenance = Provenance::local_rule;
    } else {
      const auto ctx = truncate_context(d, k, rng);
      GenerationExchange ex;
      try {
        auto s = gen_gate([&] {
          return generate_substitute(ctx, *generator, config.retry, &ex, config.max_new_tokens, config.temperature);
        });
        ex.origin_id = d.origin_id;
        r.exchange = ex;
        if (!s) {
          r.outcome = SourceOutcome::generation_empty;
          r.warning = "empty generation for '" + d.origin_id + "', candidate skipped";
          return r;
        }
        substitute = std::move(*s);
      } catch (const BackendError& e) {
        ex.origin_id = d.origin_id;
        r.exchange = ex;
        r.outcome = SourceOutcome::generation_failed;
        r.warning = std::string("generation failed for '") + d.origin_id + "': " + e.what();
        return r;
      }
      r.provenance = Provenance::local_generative;
    }

    r.negative = substitute_sentence(d, k, std::move(substitute));
    if (r.negative == d) {
      r.outcome = SourceOutcome::identity;
      r.warning = "substitute for '" + d.origin_id + "' equals the original sentence, candidate dropped";
      return r;
    }
    if (filter_scorer) {
      double score = 0.0;
      try {
        score = filter_gate([&] { return checked_score(filter_scorer->score(r.negative), *filter_scorer); });
      } catch (const Error& e) {
        r.outcome = SourceOutcome::filter_failed;
        r.warning = "filter failed for '" + d.origin_id + "': " + e.what();
        return r;
      }
      if (r.exchange) r.exchange->filter_score = score;
      if (score < config.filter_threshold) {
        r.outcome = SourceOutcome::filtered_out;
        return r;
      }
    }
    r.outcome = SourceOutcome::local_kept;
    return r;
  };

  auto results = parallel_map<detail::SourceResult>(n, config.workers, process);

  auto& c = report.counts;
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = results[i];
    const auto& d = sources[i];
    if (!is_global[i]) ++c.n_local_candidates;
    if (r.exchange) result.exchanges.push_back(*r.exchange);
    if (!r.warning.empty()) report.warnings.push_back(r.warning);
    switch (r.outcome) {
      case SourceOutcome::global_ok: ++c.n_pos_global; ++c.n_neg_global; break;
      case SourceOutcome::global_failed: ++c.n_global_failed; break;
      case SourceOutcome::local_kept: ++c.n_local_kept; break;
      case SourceOutcome::generation_failed: ++c.n_generation_failed; break;
      case SourceOutcome::generation_empty: ++c.n_generation_empty; break;
      case SourceOutcome::identity: ++c.n_identity_dropped; break;
      case SourceOutcome::filter_failed: ++c.n_filter_failed; break;
      case SourceOutcome::filtered_out: ++c.n_filtered_out; break;
    }
    if (r.outcome != SourceOutcome::global_ok && r.outcome != SourceOutcome::local_kept) continue;
    Discourse positive = d;
    r.negative.origin_id = d.origin_id;
    result.samples.push_back(LabeledSample{d.origin_id + "#pos", positive, Label::coherent, Provenance::original, d.origin_id});
    result.samples.push_back(LabeledSample{d.origin_id + "#neg", std::move(r.negative), Label::incoherent, r.provenance, d.origin_id});
  }
  c.total = result.samples.size();
  if (c.n_local_candidates > 0 && c.n_local_kept == 0) {
    report.warnings.push_back("no local candidate survived; dataset holds global pairs only");
  }
  if (c.total != expected_total(c.n_neg_global, c.n_local_kept)) {
    throw IntegrityError("dataset size " + std::to_string(c.total) + " breaks the pair counting identity");
  }
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Leading-sentence discourses for a document collection; documents that
/// are too short are skipped and listed in skipped.
inline std::vector<Discourse> sample_sources(const std::vector<Document>& docs, std::uint64_t seed, std::size_t min_n,
                                             std::size_t max_n, std::vector<std::string>* skipped = nullptr) {
  std::vector<Discourse> out;
  for (const auto& doc : docs) {
    Rng rng(derive_seed(seed, doc.id, 2));
    try {
      out.push_back(sample_leading(doc, rng, min_n, max_n));
    } catch (const TooShort& e) {
      if (skipped) skipped->push_back(e.what());
    }
  }
  return out;
}

}  // namespace cohkit
