#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include "test_util.hpp"

using namespace cohkit;

namespace {

json load_schema() {
  return json::parse(testutil::slurp(std::filesystem::path(COHKIT_SOURCE_DIR) / "schema/model_service.json"));
}

std::set<std::string> keys_of(const json& j) {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) out.insert(k);
  return out;
}

std::set<std::string> schema_fields(const json& schema, const std::string& endpoint, const std::string& part) {
  return keys_of(schema["endpoints"][endpoint][part]["fields"]);
}

// Model service stand-in. Requests whose field set differs from the
// schema get a 400, as the real service would.
class StubService {
 public:
  StubService() : schema_(load_schema()) {
    const auto gen_fields = schema_fields(schema_, "generate", "request");
    const auto score_fields = schema_fields(schema_, "score", "request");

    server_.Post("/generate", [this, gen_fields](const httplib::Request& req, httplib::Response& res) {
      record("/generate");
      const auto body = json::parse(req.body);
      if (keys_of(body) != gen_fields) return reject(res, "generate request fields");
      reply(res, generation(body));
    });
    server_.Post("/generate_batch", [this, gen_fields](const httplib::Request& req, httplib::Response& res) {
      record("/generate_batch");
      const auto body = json::parse(req.body);
      if (keys_of(body) != std::set<std::string>{"items"} || body["items"].size() > kMaxBatchItems) {
        return reject(res, "items");
      }
      json items = json::array();
      for (const auto& item : body["items"]) {
        if (keys_of(item) != gen_fields) return reject(res, "generate request fields");
        items.push_back(generation(item));
      }
      note_batch(body["items"].size());
      reply(res, json{{"items", items}});
    });
    server_.Post("/score", [this, score_fields](const httplib::Request& req, httplib::Response& res) {
      record("/score");
      const auto body = json::parse(req.body);
      if (keys_of(body) != score_fields) return reject(res, "sentences");
      if (fail_scores_) {
        res.status = 500;
        res.set_content(R"({"error":"model failure","id":"e-1"})", "application/json");
        return;
      }
      reply(res, scored(body));
    });
    server_.Post("/score_batch", [this, score_fields](const httplib::Request& req, httplib::Response& res) {
      record("/score_batch");
      const auto body = json::parse(req.body);
      if (keys_of(body) != std::set<std::string>{"items"} || body["items"].size() > kMaxBatchItems) {
        return reject(res, "items");
      }
      json items = json::array();
      for (const auto& item : body["items"]) {
        if (keys_of(item) != score_fields) return reject(res, "sentences");
        items.push_back(scored(item));
      }
      note_batch(body["items"].size());
      reply(res, json{{"items", items}});
    });
    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      record("/health");
      reply(res, schema_["endpoints"]["health"]["response"]["example"]);
    });

    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  ServiceOptions options() const { return ServiceOptions{url()}; }

  std::vector<std::string> calls() {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::vector<std::size_t> batch_sizes() {
    std::lock_guard lock(mu_);
    return batch_sizes_;
  }
  json last_generate() {
    std::lock_guard lock(mu_);
    return last_generate_;
  }

  std::atomic<double> coherence_override{-1.0};  // any other value is returned for every score
  std::atomic<bool> fail_scores_{false};

 private:
  void record(const std::string& path) {
    std::lock_guard lock(mu_);
    calls_.push_back(path);
  }
  void note_batch(std::size_t n) {
    std::lock_guard lock(mu_);
    batch_sizes_.push_back(n);
  }
  static void reply(httplib::Response& res, const json& j) { res.set_content(j.dump(), "application/json"); }
  static void reject(httplib::Response& res, const std::string& field) {
    res.status = 400;
    res.set_content(json{{"error", "schema violation"}, {"field", field}}.dump(), "application/json");
  }

  json generation(const json& req) {
    {
      std::lock_guard lock(mu_);
      last_generate_ = req;
    }
    const auto side = req["mask_side"].get<std::string>();
    return json{{"substitute", "Generated for " + side + "."}, {"model_id", "stub-gen"}};
  }

  json scored(const json& req) {
    double v = coherence_override;
    if (v == -1.0) v = 1.0 / static_cast<double>(req["sentences"].size());
    return json{{"coherence", v}, {"model_id", "stub-score"}};
  }

  json schema_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::string> calls_;
  std::vector<std::size_t> batch_sizes_;
  json last_generate_;
};

}  // namespace

TEST(Wire, RequestsCarryExactlyTheSchemaFields) {
  const auto schema = load_schema();
  GenerationRequest req{{"It rained all week."}, ContextSide::prefix, 32, 0.8};
  const auto wire = to_wire(req);
  EXPECT_EQ(keys_of(wire), schema_fields(schema, "generate", "request"));
  EXPECT_EQ(wire["mask_side"], "prefix_kept");
  req.side = ContextSide::suffix;
  EXPECT_EQ(to_wire(req)["mask_side"], "suffix_kept");
  EXPECT_EQ(keys_of(score_request(testutil::make_discourse(2))), schema_fields(schema, "score", "request"));
  // The schema's own example request has the same shape as ours.
  EXPECT_EQ(keys_of(schema["endpoints"]["generate"]["request"]["example"]), keys_of(wire));
  EXPECT_EQ(schema["max_batch_items"].get<std::size_t>(), kMaxBatchItems);
}

TEST(Wire, SchemaExampleResponsesParse) {
  const auto schema = load_schema();
  const auto& ep = schema["endpoints"];
  const auto g = generation_from_wire(ep["generate"]["response"]["example"]);
  EXPECT_FALSE(g.substitute.empty());
  EXPECT_EQ(g.model_id, ep["generate"]["response"]["example"]["model_id"]);
  EXPECT_DOUBLE_EQ(coherence_from_wire(ep["score"]["response"]["example"]), 0.73);
  for (const auto& item : ep["score_batch"]["response"]["example"]["items"]) EXPECT_NO_THROW(coherence_from_wire(item));
  for (const auto& item : ep["generate_batch"]["response"]["example"]["items"]) {
    EXPECT_NO_THROW(generation_from_wire(item));
  }
}

TEST(Wire, MalformedResponsesAreBackendErrors) {
  EXPECT_THROW(coherence_from_wire(json{{"coherence", 1.2}, {"model_id", "m"}}), BackendError);
  EXPECT_THROW(coherence_from_wire(json{{"coherence", "high"}, {"model_id", "m"}}), BackendError);
  EXPECT_THROW(coherence_from_wire(json{{"coherence", 0.5}}), BackendError);
  EXPECT_THROW(generation_from_wire(json{{"text", "x"}}), BackendError);
  EXPECT_THROW(mask_side_name(ContextSide::both), InvalidInput);
}

TEST(RemoteScorer, ScoreAndHealth) {
  StubService svc;
  RemoteScorer scorer(svc.options());
  EXPECT_DOUBLE_EQ(scorer.score(testutil::make_discourse(4)), 0.25);
  const auto health = scorer.health();
  EXPECT_EQ(health["status"], "ok");
  EXPECT_TRUE(health["model_ids"].contains("generator"));
  EXPECT_TRUE(health["model_ids"].contains("scorer"));
  EXPECT_EQ(svc.calls(), (std::vector<std::string>{"/score", "/health"}));
}

TEST(RemoteScorer, BatchesAreCappedAt64) {
  StubService svc;
  RemoteScorer scorer(svc.options());
  std::vector<Discourse> ds;
  for (std::size_t i = 0; i < 150; ++i) ds.push_back(testutil::make_discourse(1 + i % 4));
  const auto scores = scorer.score_batch(ds);
  ASSERT_EQ(scores.size(), 150u);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_DOUBLE_EQ(scores[i], 1.0 / static_cast<double>(ds[i].size()));
  EXPECT_EQ(svc.batch_sizes(), (std::vector<std::size_t>{64, 64, 22}));
}

TEST(RemoteScorer, UnifiedScoreUsesOneBatch) {
  StubService svc;
  RemoteScorer scorer(svc.options());
  const auto b = unified_score(scorer, testutil::make_discourse(4), {0.5, 1e-9});
  EXPECT_DOUBLE_EQ(b.global, 0.25);
  EXPECT_EQ(b.pair_scores, (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_DOUBLE_EQ(b.final_score, 0.375);
  EXPECT_EQ(svc.calls(), std::vector<std::string>{"/score_batch"});
}

TEST(RemoteScorer, ServiceErrorsSurfaceAsBackendError) {
  StubService svc;
  RemoteScorer scorer(svc.options());
  svc.fail_scores_ = true;
  EXPECT_THROW(scorer.score(testutil::make_discourse(2)), BackendError);
  svc.fail_scores_ = false;
  svc.coherence_override = 1.5;
  EXPECT_THROW(scorer.score(testutil::make_discourse(2)), BackendError);
  EXPECT_THROW(unified_score(scorer, testutil::make_discourse(3)), BackendError);
}

TEST(RemoteScorer, UnreachableServiceIsBackendError) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ServiceOptions opts{"http://127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(300),
                      std::chrono::milliseconds(300)};
  RemoteScorer scorer(opts);
  EXPECT_THROW(scorer.score(testutil::make_discourse(2)), BackendError);
  RemoteGenerator gen(opts);
  RetryPolicy retry{2, std::chrono::milliseconds(1), 2.0};
  GenerationExchange ex;
  EXPECT_THROW(generate_substitute(make_context(testutil::make_discourse(3), 2, ContextSide::prefix), gen, retry, &ex),
               BackendError);
  EXPECT_EQ(ex.attempts, 2u);
}

TEST(RemoteGenerator, GenerateAndBatch) {
  StubService svc;
  RemoteGenerator gen(svc.options());
  const auto d = testutil::make_discourse(4);
  const auto s = generate_substitute(make_context(d, 3, ContextSide::suffix), gen, {}, nullptr, 40, 0.7);
  ASSERT_TRUE(s);
  EXPECT_EQ(*s, "Generated for suffix_kept.");
  const auto sent = svc.last_generate();
  EXPECT_EQ(sent["context_sentences"], json(std::vector<std::string>{d.sentences[3]}));
  EXPECT_EQ(sent["max_new_tokens"], 40);
  EXPECT_DOUBLE_EQ(sent["temperature"].get<double>(), 0.7);

  std::vector<GenerationRequest> reqs(70, GenerationRequest{{"Context."}, ContextSide::prefix, 16, 0.8});
  const auto out = gen.generate_batch(reqs);
  ASSERT_EQ(out.size(), 70u);
  EXPECT_EQ(out[0].model_id, "stub-gen");
  EXPECT_EQ(svc.batch_sizes(), (std::vector<std::size_t>{64, 6}));
}

TEST(RemoteGenerator, BuildDatasetAgainstService) {
  StubService svc;
  RemoteGenerator gen(svc.options());
  RemoteScorer filter(svc.options());
  AugmentationConfig cfg;
  cfg.global_fraction = 0.0;
  cfg.filter_threshold = 0.22;
  cfg.workers = 4;
  std::vector<Discourse> sources;
  for (int i = 0; i < 12; ++i) sources.push_back(testutil::make_discourse(3 + i % 3, "r" + std::to_string(i)));
  const auto result = build_dataset(cfg, sources, &gen, &filter);
  const auto& c = result.report.counts;
  // Stub coherence is 1/n: n=3,4 pass delta 0.22, n=5 does not.
  EXPECT_EQ(c.n_local_kept, 8u);
  EXPECT_EQ(c.n_filtered_out, 4u);
  EXPECT_EQ(result.exchanges.size(), 12u);
  for (const auto& ex : result.exchanges) EXPECT_EQ(ex.model_id, "stub-gen");
}

TEST(ServiceUrl, ExplicitThenEnvironment) {
  ::unsetenv(kServiceUrlEnv);
  EXPECT_THROW(resolve_service_url(""), InvalidInput);
  ::setenv(kServiceUrlEnv, "http://example.invalid:9", 1);
  EXPECT_EQ(resolve_service_url(""), "http://example.invalid:9");
  EXPECT_EQ(resolve_service_url("http://other:1"), "http://other:1");
  ::unsetenv(kServiceUrlEnv);
}

TEST(RemoteCli, ScoreCommandTalksToService) {
  StubService svc;
  const auto dir = testutil::scratch_dir("remote_cli");
  std::ofstream(dir / "in.jsonl") << R"({"id":"a","sentences":["One.","Two.","Three."]})" << '\n';
  const std::string cmd = std::string(COHKIT_CLI_PATH) + " score --backend remote --url " + svc.url() + " --input " +
                          (dir / "in.jsonl").string() + " --out " + (dir / "out.jsonl").string() + " 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const auto rec = json::parse(testutil::slurp(dir / "out.jsonl"));
  EXPECT_DOUBLE_EQ(rec["global"].get<double>(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(rec["final"].get<double>(), 0.5 * (1.0 / 3.0) + 0.5 * 0.5);
  std::filesystem::remove_all(dir);
}
