#pragma once

#include <chrono>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cohkit/augment.hpp"
#include "cohkit/corpus.hpp"
#include "cohkit/errors.hpp"
#include "cohkit/scoring.hpp"
#include "httplib.h"

namespace cohkit {

// Environment variable consulted when no service URL is given explicitly.
inline constexpr const char* kServiceUrlEnv = "COHKIT_SERVICE_URL";
inline constexpr std::size_t kMaxBatchItems = 64;

// ---------------------------------------------------------------------------
// Wire format. Field names are fixed by schema/model_service.json.

inline std::string_view mask_side_name(ContextSide side) {
  switch (side) {
    case ContextSide::prefix: return "prefix_kept";
    case ContextSide::suffix: return "suffix_kept";
    case ContextSide::both: break;
  }
  throw InvalidInput("mask_side has no wire name for a two-sided context");
}

inline json to_wire(const GenerationRequest& r) {
  json j;
  j["context_sentences"] = r.context_sentences;
  j["mask_side"] = mask_side_name(r.side);
  j["max_new_tokens"] = r.max_new_tokens;
  j["temperature"] = r.temperature;
  return j;
}

inline json score_request(const Discourse& d) { return json{{"sentences", d.sentences}}; }

inline GenerationResult generation_from_wire(const json& j) {
  if (!j.is_object() || !j.contains("substitute") || !j["substitute"].is_string() || !j.contains("model_id") ||
      !j["model_id"].is_string()) {
    throw BackendError("generate response must carry string fields 'substitute' and 'model_id'");
  }
  return {j["substitute"].get<std::string>(), j["model_id"].get<std::string>()};
}

inline double coherence_from_wire(const json& j) {
  if (!j.is_object() || !j.contains("coherence") || !j["coherence"].is_number() || !j.contains("model_id") ||
      !j["model_id"].is_string()) {
    throw BackendError("score response must carry numeric 'coherence' and string 'model_id'");
  }
  const double v = j["coherence"].get<double>();
  if (!(v >= 0.0 && v <= 1.0)) throw BackendError("score response coherence " + std::to_string(v) + " outside [0, 1]");
  return v;
}

// ---------------------------------------------------------------------------
// HTTP transport

struct ServiceOptions {
  std::string base_url;
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{30000};
};

/// Resolves the base URL from an explicit value or the environment.
inline std::string resolve_service_url(const std::string& explicit_url) {
  if (!explicit_url.empty()) return explicit_url;
  if (const char* env = std::getenv(kServiceUrlEnv); env && *env) return env;
  throw InvalidInput(std::string("remote backend needs a service URL (--url or ") + kServiceUrlEnv + ")");
}

/// JSON-over-HTTP client. A fresh connection per call keeps it safe to
/// share across worker threads.
class ServiceClient {
 public:
  explicit ServiceClient(ServiceOptions opts) : opts_(std::move(opts)) {
    if (opts_.base_url.empty()) throw InvalidInput("service URL is empty");
  }

  const std::string& base_url() const noexcept { return opts_.base_url; }

  json post(const std::string& path, const json& body) const {
    auto cli = make_client();
    auto res = cli.Post(path, body.dump(), "application/json");
    return unwrap(res, "POST " + path);
  }

  json get(const std::string& path) const {
    auto cli = make_client();
    auto res = cli.Get(path);
    return unwrap(res, "GET " + path);
  }

 private:
  httplib::Client make_client() const {
    httplib::Client cli(opts_.base_url);
    cli.set_connection_timeout(opts_.connect_timeout);
    cli.set_read_timeout(opts_.read_timeout);
    cli.set_write_timeout(opts_.read_timeout);
    return cli;
  }

  json unwrap(const httplib::Result& res, const std::string& what) const {
    if (!res) {
      throw BackendError(what + " to " + opts_.base_url + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw BackendError(what + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw BackendError(what + " returned invalid JSON: " + e.what());
    }
  }

  ServiceOptions opts_;
};

class RemoteScorer final : public ScorerBackend {
 public:
  explicit RemoteScorer(ServiceOptions opts) : client_(std::move(opts)) {}

  double score(const Discourse& d) override { return coherence_from_wire(client_.post("/score", score_request(d))); }

  // Sent to /score_batch in chunks of at most 64 items.
  std::vector<double> score_batch(std::span<const Discourse> ds) override {
    if (ds.size() == 1) return {score(ds[0])};
    std::vector<double> out;
    out.reserve(ds.size());
    for (std::size_t lo = 0; lo < ds.size(); lo += kMaxBatchItems) {
      const auto hi = std::min(ds.size(), lo + kMaxBatchItems);
      json items = json::array();
      for (std::size_t i = lo; i < hi; ++i) items.push_back(score_request(ds[i]));
      const auto res = client_.post("/score_batch", json{{"items", items}});
      if (!res.contains("items") || !res["items"].is_array() || res["items"].size() != hi - lo) {
        throw BackendError("score_batch response must hold one item per request");
      }
      for (const auto& item : res["items"]) out.push_back(coherence_from_wire(item));
    }
    return out;
  }

  std::string identity() const override { return "remote:" + client_.base_url(); }

  json health() const { return client_.get("/health"); }

 private:
  ServiceClient client_;
};

class RemoteGenerator final : public GeneratorBackend {
 public:
  explicit RemoteGenerator(ServiceOptions opts) : client_(std::move(opts)) {}

  GenerationResult generate(const GenerationRequest& request) override {
    return generation_from_wire(client_.post("/generate", to_wire(request)));
  }

  std::vector<GenerationResult> generate_batch(std::span<const GenerationRequest> requests) {
    std::vector<GenerationResult> out;
    for (std::size_t lo = 0; lo < requests.size(); lo += kMaxBatchItems) {
      const auto hi = std::min(requests.size(), lo + kMaxBatchItems);
      json items = json::array();
      for (std::size_t i = lo; i < hi; ++i) items.push_back(to_wire(requests[i]));
      const auto res = client_.post("/generate_batch", json{{"items", items}});
      if (!res.contains("items") || !res["items"].is_array() || res["items"].size() != hi - lo) {
        throw BackendError("generate_batch response must hold one item per request");
      }
      for (const auto& item : res["items"]) out.push_back(generation_from_wire(item));
    }
    return out;
  }

  std::string identity() const override { return "remote:" + client_.base_url(); }

 private:
  ServiceClient client_;
};

}  // namespace cohkit
