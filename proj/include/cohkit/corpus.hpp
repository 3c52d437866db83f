#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cohkit/errors.hpp"
#include "cohkit/rng.hpp"
#include "cohkit/text.hpp"
#include "json.hpp"

namespace cohkit {

using json = nlohmann::ordered_json;

enum class Source { news, encyclopedia, other };

struct Document {
  std::string id;
  std::string text;
  Source source = Source::other;
};

/// An ordered run of sentences. Equality compares the sentence sequence
/// only; origin_id records where the sentences came from.
struct Discourse {
  std::vector<std::string> sentences;
  std::string origin_id;

  std::size_t size() const noexcept { return sentences.size(); }
  bool empty() const noexcept { return sentences.empty(); }

  friend bool operator==(const Discourse& a, const Discourse& b) { return a.sentences == b.sentences; }
};

enum class Label { coherent, incoherent };
enum class Provenance { original, global_shuffle, local_generative, local_rule };

struct LabeledSample {
  std::string id;
  Discourse discourse;
  Label label = Label::coherent;
  Provenance provenance = Provenance::original;
  std::string pair_id;

  friend bool operator==(const LabeledSample& a, const LabeledSample& b) {
    return a.id == b.id && a.discourse == b.discourse && a.label == b.label && a.provenance == b.provenance &&
           a.pair_id == b.pair_id;
  }
};

// ---------------------------------------------------------------------------
// Enum names

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::news: return "news";
    case Source::encyclopedia: return "encyclopedia";
    case Source::other: return "other";
  }
  return "other";
}

inline std::string_view to_string(Label l) { return l == Label::coherent ? "coherent" : "incoherent"; }

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::global_shuffle: return "global_shuffle";
    case Provenance::local_generative: return "local_generative";
    case Provenance::local_rule: return "local_rule";
  }
  return "original";
}

namespace detail {

template <typename E, std::size_t N>
bool parse_enum(std::string_view name, const std::array<E, N>& values, E& out) {
  for (auto v : values) {
    if (to_string(v) == name) {
      out = v;
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline bool parse_source(std::string_view s, Source& out) {
  return detail::parse_enum(s, std::array{Source::news, Source::encyclopedia, Source::other}, out);
}
inline bool parse_label(std::string_view s, Label& out) {
  return detail::parse_enum(s, std::array{Label::coherent, Label::incoherent}, out);
}
inline bool parse_provenance(std::string_view s, Provenance& out) {
  return detail::parse_enum(s,
                            std::array{Provenance::original, Provenance::global_shuffle,
                                       Provenance::local_generative, Provenance::local_rule},
                            out);
}

// ---------------------------------------------------------------------------
// Sentence segmentation

namespace detail {

inline bool is_terminal(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

// Length of a closing quote/bracket at pos, or 0.
inline std::size_t closer_len(std::string_view t, std::size_t pos) noexcept {
  if (pos >= t.size()) return 0;
  const char c = t[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  // U+201D right double quote, U+2019 right single quote
  if (t.substr(pos, 3) == "\xE2\x80\x9D" || t.substr(pos, 3) == "\xE2\x80\x99") return 3;
  return 0;
}

inline bool opens_sentence(std::string_view t, std::size_t pos) noexcept {
  const auto c = static_cast<unsigned char>(t[pos]);
  if (std::isupper(c) || c == '"' || c == '\'' || c == '(' || c == '[') return true;
  // Latin-1 capitals U+00C0..U+00DE (C3 80..C3 9E), except U+00D7
  if (c == 0xC3 && pos + 1 < t.size()) {
    const auto c2 = static_cast<unsigned char>(t[pos + 1]);
    if (c2 >= 0x80 && c2 <= 0x9E && c2 != 0x97) return true;
  }
  // U+201C left double quote, U+2018 left single quote
  return t.substr(pos, 3) == "\xE2\x80\x9C" || t.substr(pos, 3) == "\xE2\x80\x98";
}

inline bool is_initial(std::string_view token) {
  return token.size() == 1 && std::isupper(static_cast<unsigned char>(token[0]));
}

// True when the text from pos on is nothing but "X." initials, as in the
// tail of "A. B. C.". Such a run is a list of one-letter sentences.
inline bool only_initials_follow(std::string_view t, std::size_t pos) {
  while (pos < t.size()) {
    if (text::is_space(t[pos])) {
      ++pos;
      continue;
    }
    if (pos + 1 >= t.size() || !is_initial(t.substr(pos, 1)) || t[pos + 1] != '.') return false;
    pos += 2;
  }
  return true;
}

// followed_by_initials: see only_initials_follow.
inline bool is_abbreviation(std::string_view token, bool followed_by_initials) {
  static const std::unordered_set<std::string> kStoplist = {
      "mr", "mrs", "ms", "dr", "prof", "st", "mt", "ft", "gen", "gov", "sen", "rep", "col", "lt",
      "sgt", "capt", "cmdr", "adm", "pres", "rev", "hon", "messrs", "vs", "cf", "approx"};
  while (!token.empty() && (token.front() == '(' || token.front() == '"' || token.front() == '\'' ||
                            token.front() == '[')) {
    token.remove_prefix(1);
  }
  if (token.empty()) return false;
  // Initials such as the "J" in "J. Smith".
  if (is_initial(token)) return !followed_by_initials;
  // Dotted forms: "U.S", "e.g", "a.m". Numbers like "3.14" are not.
  if (token.find('.') != std::string_view::npos) {
    return std::all_of(token.begin(), token.end(),
                       [](char c) { return c == '.' || std::isalpha(static_cast<unsigned char>(c)); });
  }
  return kStoplist.count(text::to_lower(token)) > 0;
}

}  // namespace detail

/// Splits prose into sentences at . ! ? (optionally followed by closing
/// quotes or brackets) when whitespace and then an uppercase letter or an
/// opening quote/bracket follow. A single period after a known
/// abbreviation, an initial or a dotted token does not end a sentence.
/// Whitespace inside each sentence is collapsed to single spaces.
inline std::vector<std::string> segment_sentences(std::string_view t) {
  if (text::trim(t).empty()) throw InvalidInput("segment_sentences: empty input");
  std::vector<std::string> out;
  const std::size_t n = t.size();
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    if (!detail::is_terminal(t[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < n && detail::is_terminal(t[end])) ++end;
    const bool single_period = (t[i] == '.' && end == i + 1);
    while (std::size_t len = detail::closer_len(t, end)) end += len;
    if (end >= n || !text::is_space(t[end])) {
      i = end;
      continue;
    }
    std::size_t next = end;
    while (next < n && text::is_space(t[next])) ++next;
    if (next >= n || !detail::opens_sentence(t, next)) {
      i = end;
      continue;
    }
    if (single_period) {
      std::size_t tok_begin = i;
      while (tok_begin > start && !text::is_space(t[tok_begin - 1])) --tok_begin;
      if (detail::is_abbreviation(t.substr(tok_begin, i - tok_begin), detail::only_initials_follow(t, next))) {
        i = end;
        continue;
      }
    }
    out.push_back(text::normalize_space(t.substr(start, end - start)));
    start = next;
    i = next;
  }
  auto tail = text::normalize_space(t.substr(start));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

/// The first k sentences of the document, k uniform over
/// [min_n, min(max_n, available)].
inline Discourse sample_leading(const Document& doc, Rng& rng, std::size_t min_n, std::size_t max_n) {
  if (min_n < 1 || min_n > max_n) throw InvalidInput("sample_leading: need 1 <= min_n <= max_n");
  auto sentences = segment_sentences(doc.text);
  if (sentences.size() < min_n) {
    throw TooShort("document '" + doc.id + "' has " + std::to_string(sentences.size()) +
                   " sentences, need at least " + std::to_string(min_n));
  }
  const auto hi = std::min(max_n, sentences.size());
  const auto k = static_cast<std::size_t>(rng.uniform_between(min_n, hi));
  sentences.resize(k);
  return Discourse{std::move(sentences), doc.id};
}

// ---------------------------------------------------------------------------
// Dataset files: one JSON object per line with a fixed field order.

inline void validate_sample(const LabeledSample& s) {
  if (s.id.empty()) throw IntegrityError("sample with empty id");
  if (s.discourse.empty()) throw IntegrityError("sample '" + s.id + "' has no sentences");
  for (const auto& sent : s.discourse.sentences) {
    if (text::trim(sent).empty()) throw IntegrityError("sample '" + s.id + "' has an empty sentence");
  }
  if ((s.provenance == Provenance::original) != (s.label == Label::coherent)) {
    throw IntegrityError("sample '" + s.id + "': provenance 'original' must coincide with label 'coherent'");
  }
  if (s.pair_id.empty()) throw IntegrityError("sample '" + s.id + "' has empty pair_id");
}

/// Checks per-sample invariants, id uniqueness and that every incoherent
/// sample's pair_id names exactly one coherent sample.
inline void validate_dataset(const std::vector<LabeledSample>& samples) {
  std::unordered_set<std::string> ids;
  std::unordered_map<std::string, std::size_t> positives;
  for (const auto& s : samples) {
    validate_sample(s);
    if (!ids.insert(s.id).second) throw IntegrityError("duplicate sample id '" + s.id + "'");
    if (s.label == Label::coherent) ++positives[s.pair_id];
  }
  for (const auto& s : samples) {
    if (s.label != Label::incoherent) continue;
    auto it = positives.find(s.pair_id);
    if (it == positives.end()) {
      throw IntegrityError("sample '" + s.id + "': pair_id '" + s.pair_id + "' matches no coherent sample");
    }
    if (it->second != 1) {
      throw IntegrityError("sample '" + s.id + "': pair_id '" + s.pair_id + "' matches " +
                           std::to_string(it->second) + " coherent samples");
    }
  }
}

inline json to_json(const LabeledSample& s) {
  json j;
  j["id"] = s.id;
  j["sentences"] = s.discourse.sentences;
  j["label"] = to_string(s.label);
  j["provenance"] = to_string(s.provenance);
  j["pair_id"] = s.pair_id;
  return j;
}

namespace detail {

inline const json& require(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  return *it;
}

inline std::string require_string(const json& j, const char* key, std::size_t line) {
  const auto& v = require(j, key, line);
  if (!v.is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::vector<std::string> require_strings(const json& j, const char* key, std::size_t line) {
  const auto& v = require(j, key, line);
  if (!v.is_array()) throw ParseError(line, std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw ParseError(line, std::string("field '") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// Calls fn(line_number, parsed_object) for every non-blank line.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "record must be a JSON object");
    fn(lineno, j);
  }
}

}  // namespace detail

inline LabeledSample sample_from_json(const json& j, std::size_t line) {
  LabeledSample s;
  s.id = detail::require_string(j, "id", line);
  s.discourse.sentences = detail::require_strings(j, "sentences", line);
  const auto label = detail::require_string(j, "label", line);
  if (!parse_label(label, s.label)) throw ParseError(line, "unknown label '" + label + "'");
  const auto prov = detail::require_string(j, "provenance", line);
  if (!parse_provenance(prov, s.provenance)) throw ParseError(line, "unknown provenance '" + prov + "'");
  s.pair_id = detail::require_string(j, "pair_id", line);
  s.discourse.origin_id = s.pair_id;
  return s;
}

inline void write_dataset(const std::vector<LabeledSample>& samples, std::ostream& out) {
  validate_dataset(samples);
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

inline void write_dataset(const std::vector<LabeledSample>& samples, const std::filesystem::path& path) {
  validate_dataset(samples);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
  write_dataset(samples, out);
}

inline std::vector<LabeledSample> read_dataset(std::istream& in) {
  std::vector<LabeledSample> samples;
  detail::for_each_json_line(in, [&](std::size_t line, const json& j) {
    samples.push_back(sample_from_json(j, line));
    try {
      validate_sample(samples.back());
    } catch (const IntegrityError& e) {
      throw ParseError(line, e.what());
    }
  });
  validate_dataset(samples);
  return samples;
}

inline std::vector<LabeledSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

/// Splits by pair group so a positive and its negatives land on the same
/// side. The validation side receives whole groups, in seeded random
/// order, until adding another would overshoot round(valid_fraction * N).
inline std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split_dataset(
    const std::vector<LabeledSample>& samples, double valid_fraction, Rng& rng) {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw InvalidInput("split_dataset: valid_fraction must lie in (0, 1)");
  }
  std::vector<std::string> group_order;
  std::unordered_map<std::string, std::size_t> group_size;
  for (const auto& s : samples) {
    if (group_size[s.pair_id]++ == 0) group_order.push_back(s.pair_id);
  }
  std::vector<std::size_t> perm(group_order.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(std::span<std::size_t>(perm));

  const auto target = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(samples.size())));
  std::unordered_set<std::string> valid_groups;
  std::size_t valid_count = 0;
  for (auto g : perm) {
    if (valid_count == target) break;
    const auto sz = group_size[group_order[g]];
    if (valid_count + sz <= target) {
      valid_groups.insert(group_order[g]);
      valid_count += sz;
    }
  }
  std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> out;
  for (const auto& s : samples) (valid_groups.count(s.pair_id) ? out.second : out.first).push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// Raw documents and discourse records

/// Loads raw documents from a directory of .txt files (id = file stem,
/// sorted by file name) or from a line-delimited file of {id, text, source}.
inline std::vector<Document> load_documents(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw InvalidInput("source path '" + path.string() + "' does not exist");
  std::vector<Document> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      docs.push_back(Document{f.stem().string(), buf.str(), Source::other});
    }
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open source file '" + path.string() + "'");
    detail::for_each_json_line(in, [&](std::size_t line, const json& j) {
      Document d;
      d.id = detail::require_string(j, "id", line);
      d.text = detail::require_string(j, "text", line);
      if (auto it = j.find("source"); it != j.end()) {
        if (!it->is_string() || !parse_source(it->get<std::string>(), d.source)) {
          throw ParseError(line, "field 'source' must be one of news, encyclopedia, other");
        }
      }
      docs.push_back(std::move(d));
    });
  }
  std::unordered_set<std::string> ids;
  for (const auto& d : docs) {
    if (d.id.empty()) throw InvalidInput("document with empty id in '" + path.string() + "'");
    if (!ids.insert(d.id).second) throw InvalidInput("duplicate document id '" + d.id + "'");
    if (text::trim(d.text).empty()) throw InvalidInput("document '" + d.id + "' has empty text");
  }
  return docs;
}

/// Reads a discourse from {"sentences": [...]} or {"text": "..."}; "id" is
/// optional and becomes origin_id.
inline Discourse discourse_from_json(const json& j, std::size_t line) {
  Discourse d;
  if (auto it = j.find("id"); it != j.end() && it->is_string()) d.origin_id = it->get<std::string>();
  if (j.contains("sentences")) {
    d.sentences = detail::require_strings(j, "sentences", line);
  } else if (j.contains("text")) {
    try {
      d.sentences = segment_sentences(detail::require_string(j, "text", line));
    } catch (const InvalidInput& e) {
      throw ParseError(line, e.what());
    }
  } else {
    throw ParseError(line, "record needs 'sentences' or 'text'");
  }
  if (d.sentences.empty()) throw ParseError(line, "discourse has no sentences");
  for (const auto& s : d.sentences) {
    if (text::trim(s).empty()) throw ParseError(line, "discourse has an empty sentence");
  }
  return d;
}

}  // namespace cohkit
