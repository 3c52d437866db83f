// cohkit: build augmented coherence datasets, score and rank discourses,
// and meta-evaluate scorers against human ratings.
//
// Exit status: 0 success, 1 partial failure, 2 usage or configuration error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cohkit/cohkit.hpp"

namespace fs = std::filesystem;
using namespace cohkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::uint64_t seed = 0;
  std::string backend = "heuristic";
  double lambda = 0.5;
  double delta = 0.5;
  std::size_t workers = 1;
  std::string out;
  std::string url;
  std::string labels;
};

void add_common(CLI::App* sub, CommonArgs& c) {
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--backend", c.backend,
                  "Scorer backend: heuristic, oracle, oracle-inverted, constant:<v>, remote, none");
  sub->add_option("--lambda", c.lambda, "Weight of the local score in unified scoring")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--delta", c.delta, "Coherence filter threshold")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "Output path");
  sub->add_option("--url", c.url, std::string("Model service base URL (falls back to $") + kServiceUrlEnv + ")");
  sub->add_option("--labels", c.labels, "Labeled dataset for the oracle backends");
}

// Every option of the subcommand with its effective value.
json effective_config(const CLI::App& sub) {
  json cfg;
  cfg["command"] = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      cfg[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const BackendError*>(&e)) return "BackendError";
  if (dynamic_cast<const LookupError*>(&e)) return "LookupError";
  if (dynamic_cast<const IntegrityError*>(&e)) return "IntegrityError";
  if (dynamic_cast<const InsufficientData*>(&e)) return "InsufficientData";
  if (dynamic_cast<const TooShort*>(&e)) return "TooShort";
  if (dynamic_cast<const InvalidInput*>(&e)) return "InvalidInput";
  return "Error";
}

ServiceOptions service_options(const CommonArgs& c) { return ServiceOptions{resolve_service_url(c.url)}; }

std::unique_ptr<ScorerBackend> make_scorer(const CommonArgs& c) {
  const auto& name = c.backend;
  if (name == "heuristic") return std::make_unique<HeuristicScorer>();
  if (name == "oracle" || name == "oracle-inverted") {
    if (c.labels.empty()) throw InvalidInput("backend '" + name + "' needs --labels <dataset>");
    return std::make_unique<OracleScorer>(LabelTable::from_dataset(read_dataset(fs::path(c.labels))),
                                          name == "oracle-inverted");
  }
  if (name.rfind("constant:", 0) == 0) {
    double v = 0.0;
    try {
      v = std::stod(name.substr(9));
    } catch (const std::exception&) {
      throw InvalidInput("bad constant backend '" + name + "'");
    }
    return std::make_unique<ConstantScorer>(v);
  }
  if (name == "remote") return std::make_unique<RemoteScorer>(service_options(c));
  if (name == "none") return nullptr;
  throw InvalidInput("unknown backend '" + name + "'");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_json_file(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
  auto p = base;
  p += suffix;
  return p;
}

// Output stream for --out, or stdout when empty / "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") file_ = open_out(path);
  }
  std::ostream& get() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  std::string sources;
  std::string report;
  std::string audit;
  std::string generator = "echo";
  std::string echo_text = "This sentence was written by the echo generator.";
  std::string strategy = "generative";
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 5;
  double global_fraction = 0.25;
  std::size_t ngram_order = 2;
  std::size_t target_positives = 0;
  double valid_fraction = 0.0;
  unsigned retries = 3;
  long backoff_ms = 100;
  double temperature = 0.8;
  std::size_t max_new_tokens = 64;
};

int cmd_augment(const CLI::App& sub, const CommonArgs& c, const AugmentArgs& a) {
  if (c.out.empty()) throw InvalidInput("augment needs --out <dataset path>");
  AugmentationConfig cfg;
  cfg.min_sentences = a.min_sentences;
  cfg.max_sentences = a.max_sentences;
  cfg.filter_threshold = c.delta;
  cfg.global_fraction = a.global_fraction;
  cfg.seed = c.seed;
  cfg.ngram_order = a.ngram_order;
  cfg.target_positives = a.target_positives;
  cfg.workers = c.workers;
  cfg.temperature = a.temperature;
  cfg.max_new_tokens = a.max_new_tokens;
  cfg.retry.max_attempts = a.retries;
  cfg.retry.initial_backoff = std::chrono::milliseconds(a.backoff_ms);
  if (a.strategy == "generative") {
    cfg.local_strategy = LocalStrategy::generative;
  } else if (a.strategy == "rule") {
    cfg.local_strategy = LocalStrategy::rule;
  } else {
    throw InvalidInput("unknown strategy '" + a.strategy + "'");
  }
  cfg.validate();

  const auto docs = load_documents(fs::path(a.sources));
  std::vector<std::string> skipped;
  const auto sources = sample_sources(docs, cfg.seed, cfg.min_sentences, cfg.max_sentences, &skipped);

  std::unique_ptr<GeneratorBackend> generator;
  if (cfg.local_strategy == LocalStrategy::generative) {
    if (a.generator == "echo") {
      generator = std::make_unique<EchoGenerator>(a.echo_text);
    } else if (a.generator == "remote") {
      generator = std::make_unique<RemoteGenerator>(service_options(c));
    } else {
      throw InvalidInput("unknown generator '" + a.generator + "'");
    }
  }
  if (c.backend == "oracle" || c.backend == "oracle-inverted") {
    throw InvalidInput("the coherence filter cannot use an oracle backend");
  }
  auto filter = make_scorer(c);

  auto result = build_dataset(cfg, sources, generator.get(), filter.get());

  const fs::path out_path(c.out);
  write_dataset(result.samples, out_path);
  json splits = nullptr;
  if (a.valid_fraction > 0.0) {
    Rng rng(derive_seed(cfg.seed, "split"));
    auto [train, valid] = split_dataset(result.samples, a.valid_fraction, rng);
    const auto train_path = with_suffix(out_path, ".train");
    const auto valid_path = with_suffix(out_path, ".valid");
    write_dataset(train, train_path);
    write_dataset(valid, valid_path);
    splits = {{"train", {{"path", train_path.string()}, {"size", train.size()}}},
              {"valid", {{"path", valid_path.string()}, {"size", valid.size()}}}};
  }
  if (!result.exchanges.empty() || generator) {
    auto audit = open_out(a.audit.empty() ? with_suffix(out_path, ".exchanges.jsonl") : fs::path(a.audit));
    for (const auto& ex : result.exchanges) audit << to_json(ex).dump() << '\n';
  }

  json report = to_json(result.report);
  report["effective_config"] = effective_config(sub);
  report["documents"] = {{"loaded", docs.size()}, {"sampled", sources.size()}, {"skipped", skipped}};
  report["splits"] = splits;
  write_json_file(a.report.empty() ? with_suffix(out_path, ".report.json") : fs::path(a.report), report);

  const auto& n = result.report.counts;
  std::fprintf(stderr, "cohkit augment: %zu samples (%zu global pairs, %zu of %zu local candidates kept)\n", n.total,
               n.n_neg_global, n.n_local_kept, n.n_local_candidates);
  for (const auto& w : result.report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return (n.n_generation_failed + n.n_filter_failed) > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string input;
  std::string summary;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (path != "-") {
    file.open(path, std::ios::binary);
    if (!file) throw InvalidInput("cannot open input '" + path + "'");
    in = &file;
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(*in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

json error_record(std::size_t line, const std::string& id, const std::exception& e) {
  json j;
  j["line"] = line;
  j["id"] = id;
  j["error"] = e.what();
  j["error_type"] = error_type(e);
  return j;
}

int cmd_score(const CLI::App& sub, const CommonArgs& c, const ScoreArgs& a) {
  UnifiedScoringConfig cfg;
  cfg.lambda = c.lambda;
  cfg.validate();
  auto scorer = make_scorer(c);
  if (!scorer) throw InvalidInput("score needs a scorer backend");
  const auto lines = read_lines(a.input);

  auto records = parallel_map<json>(lines.size(), scorer->concurrent_safe() ? c.workers : 1, [&](std::size_t i) {
    const std::size_t lineno = i + 1;
    if (text::trim(lines[i]).empty()) return json(nullptr);
    std::string id;
    try {
      json j;
      try {
        j = json::parse(lines[i]);
      } catch (const json::parse_error& e) {
        throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
      }
      if (!j.is_object()) throw ParseError(lineno, "record must be a JSON object");
      if (j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
      const auto d = discourse_from_json(j, lineno);
      json rec;
      rec["line"] = lineno;
      rec["id"] = id;
      rec.update(to_json(unified_score(*scorer, d, cfg)));
      return rec;
    } catch (const std::exception& e) {
      return error_record(lineno, id, e);
    }
  });

  Sink sink(c.out);
  std::size_t scored = 0, failed = 0;
  for (const auto& r : records) {
    if (r.is_null()) continue;
    sink.get() << r.dump() << '\n';
    (r.contains("error") ? failed : scored)++;
  }
  json summary = {{"tool", "cohkit"}, {"version", kVersion}, {"backend", scorer->identity()},
                  {"scored", scored},  {"failed", failed},   {"effective_config", effective_config(sub)}};
  if (!a.summary.empty()) write_json_file(a.summary, summary);
  std::fprintf(stderr, "cohkit score: %zu scored, %zu failed\n", scored, failed);
  return failed > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// rank

struct RankArgs {
  std::string pairs;
  std::string summary;
};

int cmd_rank(const CLI::App& sub, const CommonArgs& c, const RankArgs& a) {
  UnifiedScoringConfig cfg;
  cfg.lambda = c.lambda;
  cfg.validate();
  auto scorer = make_scorer(c);
  if (!scorer) throw InvalidInput("rank needs a scorer backend");
  const auto lines = read_lines(a.pairs);
  std::size_t records_present = 0;
  for (const auto& l : lines) records_present += !text::trim(l).empty();
  if (records_present == 0) throw InvalidInput("pair file '" + a.pairs + "' holds no pairs");

  auto verdicts = parallel_map<json>(lines.size(), scorer->concurrent_safe() ? c.workers : 1, [&](std::size_t i) {
    const std::size_t lineno = i + 1;
    if (text::trim(lines[i]).empty()) return json(nullptr);
    std::string id;
    try {
      json j;
      try {
        j = json::parse(lines[i]);
      } catch (const json::parse_error& e) {
        throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
      }
      if (!j.is_object()) throw ParseError(lineno, "record must be a JSON object");
      const auto p = pair_from_json(j, lineno);
      id = p.id;
      const double sa = unified_score(*scorer, p.a, cfg).final_score;
      const double sb = unified_score(*scorer, p.b, cfg).final_score;
      const auto v = compare_scores(sa, sb, cfg.tie_epsilon);
      json rec;
      rec["line"] = lineno;
      rec["id"] = p.id;
      rec["verdict"] = to_string(v);
      rec["gold"] = to_string(p.gold);
      rec["score_a"] = sa;
      rec["score_b"] = sb;
      rec["credit"] = verdict_credit(v, p.gold);
      return rec;
    } catch (const std::exception& e) {
      return error_record(lineno, id, e);
    }
  });

  Sink sink(c.out);
  std::size_t ranked = 0, failed = 0, ties = 0;
  double credit = 0.0;
  for (const auto& r : verdicts) {
    if (r.is_null()) continue;
    sink.get() << r.dump() << '\n';
    if (r.contains("error")) {
      ++failed;
      continue;
    }
    ++ranked;
    credit += r["credit"].get<double>();
    ties += r["verdict"] == "tie";
  }
  json summary = {{"tool", "cohkit"},
                  {"version", kVersion},
                  {"backend", scorer->identity()},
                  {"pairs", ranked + failed},
                  {"ranked", ranked},
                  {"failed", failed},
                  {"ties", ties},
                  {"accuracy", ranked ? json(credit / static_cast<double>(ranked)) : json(nullptr)},
                  {"effective_config", effective_config(sub)}};
  if (!a.summary.empty()) write_json_file(a.summary, summary);
  std::cerr << summary.dump(2) << '\n';
  return failed > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// meta-eval

struct MetaArgs {
  std::string ratings;
  std::string scores;
  bool length_buckets = false;
};

int cmd_metaeval(const CLI::App& sub, const CommonArgs& c, const MetaArgs& a) {
  const auto matrix = read_ratings(fs::path(a.ratings));
  if (matrix.empty()) throw InvalidInput("ratings file '" + a.ratings + "' is empty");
  ScoreGrid scores;
  std::string scorer_id;
  if (!a.scores.empty()) {
    scores = read_scores(fs::path(a.scores), matrix);
    scorer_id = "file:" + a.scores;
  } else {
    UnifiedScoringConfig cfg;
    cfg.lambda = c.lambda;
    auto scorer = make_scorer(c);
    if (!scorer) throw InvalidInput("meta-eval needs --scores or a scorer backend");
    scores = score_matrix(matrix, *scorer, cfg);
    scorer_id = scorer->identity();
  }

  std::vector<CorrelationReport> table{sample_level_report(matrix, scores), dataset_level_report(matrix, scores)};
  json report;
  report["tool"] = "cohkit";
  report["version"] = kVersion;
  report["scorer"] = scorer_id;
  report["documents"] = matrix.documents();
  report["systems"] = matrix.systems();
  report["sample"] = to_json(table[0]);
  report["dataset"] = to_json(table[1]);
  if (a.length_buckets) {
    json buckets = json::array();
    for (auto& b : length_bucket_report(matrix, scores)) {
      buckets.push_back(to_json(b));
      table.push_back(b.report);
    }
    report["length_buckets"] = buckets;
  }
  report["effective_config"] = effective_config(sub);
  if (!c.out.empty()) write_json_file(c.out, report);
  std::cout << format_table(table);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dataset-stats

int cmd_dataset_stats(const std::string& path, const std::string& out) {
  const auto samples = read_dataset(fs::path(path));
  std::map<std::string, std::size_t> by_label, by_provenance, by_length;
  std::set<std::string> pairs;
  for (const auto& s : samples) {
    ++by_label[std::string(to_string(s.label))];
    ++by_provenance[std::string(to_string(s.provenance))];
    ++by_length[std::to_string(s.discourse.size())];
    pairs.insert(s.pair_id);
  }
  json stats;
  stats["dataset"] = path;
  stats["total"] = samples.size();
  stats["pair_groups"] = pairs.size();
  stats["labels"] = by_label;
  stats["provenance"] = by_provenance;
  stats["sentences"] = by_length;
  stats["integrity"] = "ok";
  Sink sink(out);
  sink.get() << stats.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cohkit: discourse coherence augmentation, scoring and meta-evaluation", "cohkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML/INI config file; command-line flags override it");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  CommonArgs common;

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "Build an augmented coherent/incoherent dataset");
  add_common(augment, common);
  augment->add_option("--sources", aug.sources, "Directory of .txt files or JSONL of {id, text, source}")->required();
  augment->add_option("--report", aug.report, "Build report path (default <out>.report.json)");
  augment->add_option("--audit", aug.audit, "Generation audit log (default <out>.exchanges.jsonl)");
  augment->add_option("--generator", aug.generator, "Generator backend: echo or remote");
  augment->add_option("--echo-text", aug.echo_text, "Sentence returned by the echo generator");
  augment->add_option("--strategy", aug.strategy, "Local strategy: generative or rule");
  augment->add_option("--min-sentences", aug.min_sentences);
  augment->add_option("--max-sentences", aug.max_sentences);
  augment->add_option("--global-fraction", aug.global_fraction)->check(CLI::Range(0.0, 1.0));
  augment->add_option("--ngram-order", aug.ngram_order)->check(CLI::PositiveNumber);
  augment->add_option("--target-positives", aug.target_positives, "Use exactly this many sources (0 = all)");
  augment->add_option("--valid-fraction", aug.valid_fraction, "Also write .train/.valid splits")
      ->check(CLI::Range(0.0, 1.0));
  augment->add_option("--retries", aug.retries, "Generator attempts per candidate")->check(CLI::PositiveNumber);
  augment->add_option("--backoff-ms", aug.backoff_ms, "Initial retry backoff");
  augment->add_option("--temperature", aug.temperature);
  augment->add_option("--max-new-tokens", aug.max_new_tokens);

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Unified global+local scores for JSONL discourses");
  add_common(score, common);
  score->add_option("--input", sc.input, "JSONL of {id?, sentences|text}, or - for stdin")->required();
  score->add_option("--summary", sc.summary, "Write a run summary JSON here");

  RankArgs rk;
  auto* rank = app.add_subcommand("rank", "Pairwise ranking with accuracy summary");
  add_common(rank, common);
  rank->add_option("--pairs", rk.pairs, "JSONL of {id?, a, b, gold}")->required();
  rank->add_option("--summary", rk.summary, "Write the accuracy summary JSON here");

  MetaArgs me;
  auto* meta = app.add_subcommand("meta-eval", "Correlate scores with human ratings");
  add_common(meta, common);
  meta->add_option("--ratings", me.ratings, "Ratings JSONL (SummEval layout or {doc_id, system_id, text, human})")
      ->required();
  meta->add_option("--scores", me.scores, "Precomputed {doc_id, system_id, score} JSONL");
  meta->add_flag("--length-buckets", me.length_buckets, "Add per-sentence-count breakdowns");

  std::string stats_path;
  auto* stats = app.add_subcommand("dataset-stats", "Counts and integrity check for a dataset file");
  add_common(stats, common);
  stats->add_option("--dataset", stats_path)->required();

  // --config is accepted after the subcommand name too; CLI11 only reads it
  // on the top-level app, so hoist it there.
  std::vector<std::string> args(argv + 1, argv + argc);
  const auto hoist = [&](std::size_t i, std::size_t len) {
    const auto first = args.begin() + static_cast<std::ptrdiff_t>(i);
    std::rotate(args.begin(), first, first + static_cast<std::ptrdiff_t>(len));
  };
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i].rfind("--config=", 0) == 0) {
      hoist(i, 1);
    } else if (args[i] == "--config" && i + 1 < args.size()) {
      hoist(i, 2);
      ++i;
    }
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes from the back

  try {
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const CLI::App* active = app.get_subcommands().front();
  try {
    if (active == augment) return cmd_augment(*augment, common, aug);
    if (active == score) return cmd_score(*score, common, sc);
    if (active == rank) return cmd_rank(*rank, common, rk);
    if (active == meta) return cmd_metaeval(*meta, common, me);
    if (active == stats) return cmd_dataset_stats(stats_path, common.out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cohkit %s: %s: %s\n", active->get_name().c_str(), error_type(e).c_str(), e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
