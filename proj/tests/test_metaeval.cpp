#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace cohkit;

namespace {

using Vec = std::vector<double>;

// Rating matrix whose every output has `sentences[i][j]` sentences.
RatingMatrix matrix_from(const std::vector<Vec>& human, const std::vector<std::vector<std::size_t>>& lengths = {}) {
  std::vector<std::string> docs, systems;
  for (std::size_t j = 0; j < human.at(0).size(); ++j) systems.push_back("sys" + std::to_string(j));
  std::vector<std::vector<RatingCell>> cells;
  for (std::size_t i = 0; i < human.size(); ++i) {
    docs.push_back("doc" + std::to_string(i));
    std::vector<RatingCell> row;
    for (std::size_t j = 0; j < human[i].size(); ++j) {
      const std::size_t n = lengths.empty() ? 3 : lengths[i][j];
      row.push_back({testutil::make_discourse(n, docs.back() + systems[j]), human[i][j]});
    }
    cells.push_back(std::move(row));
  }
  return RatingMatrix(docs, systems, cells);
}

Vec random_vector(std::mt19937_64& gen, std::size_t n, int levels) {
  Vec v(n);
  for (auto& x : v) x = levels > 0 ? static_cast<double>(gen() % static_cast<unsigned>(levels)) : std::ldexp(double(gen() >> 11), -53);
  return v;
}

}  // namespace

TEST(Pearson, Examples) {
  EXPECT_NEAR(pearson(Vec{1, 2, 3}, Vec{2, 4, 6}), 1.0, 1e-12);
  EXPECT_NEAR(pearson(Vec{1, 2, 3}, Vec{3, 2, 1}), -1.0, 1e-12);
  // Hand evaluation: means 2.5; deviations (-1.5,-.5,.5,1.5) and (-1.5,.5,-.5,1.5);
  // covariance sum 4, variance sums 5 and 5 -> 0.8.
  EXPECT_NEAR(pearson(Vec{1, 2, 3, 4}, Vec{1, 3, 2, 4}), 0.8, 1e-12);
  EXPECT_THROW(pearson(Vec{1, 1, 1}, Vec{1, 2, 3}), Undefined);
  EXPECT_THROW(pearson(Vec{1}, Vec{1}), InvalidInput);
  EXPECT_THROW(pearson(Vec{1, 2}, Vec{1, 2, 3}), InvalidInput);
}

TEST(Spearman, Examples) {
  EXPECT_NEAR(spearman(Vec{1, 2, 3}, Vec{1, 3, 2}), 0.5, 1e-12);
  EXPECT_NEAR(spearman(Vec{1, 2, 3, 4}, Vec{1, 8, 27, 64}), 1.0, 1e-12);
  EXPECT_NEAR(spearman(Vec{1, 2, 3, 4}, Vec{4, 3, 2, 1}), -1.0, 1e-12);
  EXPECT_EQ(average_ranks(Vec{10, 20, 20, 5}), (Vec{2, 3.5, 3.5, 1}));
  EXPECT_THROW(spearman(Vec{2, 2}, Vec{1, 2}), Undefined);
}

TEST(Kendall, Examples) {
  EXPECT_NEAR(kendall(Vec{1, 2, 3}, Vec{1, 3, 2}), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(kendall(Vec{4, 1, 7, 2}, Vec{4, 1, 7, 2}), 1.0, 1e-12);
  EXPECT_THROW(kendall(Vec{1, 1, 1}, Vec{1, 2, 3}), Undefined);
}

TEST(Correlations, MatchBruteForceOracles) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 199;
    const int levels = trial % 3 == 0 ? 0 : 2 + static_cast<int>(gen() % 6);
    const auto x = random_vector(gen, n, levels);
    const auto y = random_vector(gen, n, levels);
    const std::pair<Measure, std::optional<double> (*)(const Vec&, const Vec&)> cases[] = {
        {Measure::pearson, oracle::pearson}, {Measure::spearman, oracle::spearman}, {Measure::kendall, oracle::kendall}};
    for (const auto& [m, fn] : cases) {
      const auto expected = fn(x, y);
      if (!expected) {
        EXPECT_THROW(correlation(m, x, y), Undefined);
        continue;
      }
      EXPECT_NEAR(correlation(m, x, y), *expected, 1e-10) << to_string(m) << " n=" << n;
    }
  }
}

TEST(Correlations, RankMeasuresInvariantUnderMonotoneTransform) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_vector(gen, 30, 5);
    const auto y = random_vector(gen, 30, 0);
    Vec gx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = std::exp(3 * x[i]) - 7;
    EXPECT_NEAR(spearman(gx, y), spearman(x, y), 1e-12);
    EXPECT_NEAR(kendall(gx, y), kendall(x, y), 1e-12);
  }
}

TEST(SampleLevel, SingleDocumentEqualsCoefficient) {
  const auto m = matrix_from({{1, 2, 3, 4}});
  const ScoreGrid s{{0.1, 0.4, 0.2, 0.9}};
  for (auto k : kAllMeasures) {
    EXPECT_DOUBLE_EQ(*sample_level(k, m, s).value.value, correlation(k, s[0], m.human_row(0)));
    EXPECT_DOUBLE_EQ(*dataset_level(k, m, s).value, *sample_level(k, m, s).value.value);
  }
}

TEST(SampleLevel, MeanOfPerDocumentValues) {
  // doc0 perfectly correlated (1.0); doc1 pearson 0 by construction.
  const auto m = matrix_from({{1, 2, 3}, {1, 2, 1}});
  const ScoreGrid s{{1, 2, 3}, {1, 5, 9}};
  EXPECT_NEAR(*sample_level(Measure::pearson, m, s).value.value, 0.5, 1e-12);
}

TEST(SampleLevel, ConstantRatingDocumentSkipped) {
  // Three documents, three systems; doc1 has constant human ratings.
  const auto m = matrix_from({{1, 3, 2}, {4, 4, 4}, {5, 1, 3}});
  const ScoreGrid s{{0.2, 0.9, 0.4}, {0.1, 0.5, 0.3}, {0.8, 0.3, 0.3}};
  for (auto k : kAllMeasures) {
    const auto res = sample_level(k, m, s);
    ASSERT_EQ(res.skipped.size(), 1u);
    EXPECT_EQ(res.skipped[0].doc_id, "doc1");
    const Vec h0{1, 3, 2}, h2{5, 1, 3};
    std::optional<double> a, b;
    if (k == Measure::pearson) a = oracle::pearson(s[0], h0), b = oracle::pearson(s[2], h2);
    if (k == Measure::spearman) a = oracle::spearman(s[0], h0), b = oracle::spearman(s[2], h2);
    if (k == Measure::kendall) a = oracle::kendall(s[0], h0), b = oracle::kendall(s[2], h2);
    EXPECT_NEAR(*res.value.value, (*a + *b) / 2, 1e-12) << to_string(k);
  }
  const auto rep = sample_level_report(m, s);
  EXPECT_EQ(rep.skipped.size(), 3u);
  EXPECT_EQ(to_json(rep)["skipped_documents"].size(), 3u);
}

TEST(SampleLevel, AllUndefinedReportsReason) {
  const auto m = matrix_from({{2, 2}, {3, 3}});
  const auto res = sample_level(Measure::pearson, m, {{0.1, 0.2}, {0.3, 0.4}});
  EXPECT_FALSE(res.value.value);
  EXPECT_FALSE(res.value.reason.empty());
}

TEST(DatasetLevel, CalibratedScorerIsPerfect) {
  const auto m = matrix_from({{1, 2, 3}, {2, 5, 1}});
  const ScoreGrid s{{1, 2, 3}, {2, 5, 1}};
  for (auto k : kAllMeasures) EXPECT_NEAR(*dataset_level(k, m, s).value, 1.0, 1e-12);
}

TEST(DatasetLevel, MatchesOracleOnFlattenedFixture) {
  std::mt19937_64 gen(4);
  std::vector<Vec> human;
  ScoreGrid s;
  for (int i = 0; i < 4; ++i) {
    human.push_back(random_vector(gen, 3, 5));
    s.push_back(random_vector(gen, 3, 0));
  }
  const auto m = matrix_from(human);
  Vec fx, fy;
  for (int i = 0; i < 4; ++i) {
    fx.insert(fx.end(), s[i].begin(), s[i].end());
    fy.insert(fy.end(), human[i].begin(), human[i].end());
  }
  EXPECT_NEAR(*dataset_level(Measure::pearson, m, s).value, *oracle::pearson(fx, fy), 1e-10);
  EXPECT_NEAR(*dataset_level(Measure::spearman, m, s).value, *oracle::spearman(fx, fy), 1e-10);
  EXPECT_NEAR(*dataset_level(Measure::kendall, m, s).value, *oracle::kendall(fx, fy), 1e-10);
}

TEST(DatasetLevel, ShapeMismatchNamesDocument) {
  const auto m = matrix_from({{1, 2}, {3, 4}});
  try {
    dataset_level(Measure::pearson, m, {{0.1, 0.2}, {0.3}});
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("doc1"), std::string::npos);
  }
  EXPECT_THROW(sample_level(Measure::pearson, RatingMatrix{}, {}), InvalidInput);
}

TEST(LengthBuckets, SingleBucketEqualsDatasetLevel) {
  const auto m = matrix_from({{1, 2, 3}, {3, 1, 2}});
  const ScoreGrid s{{0.3, 0.1, 0.9}, {0.5, 0.4, 0.2}};
  const auto buckets = length_bucket_report(m, s);
  ASSERT_EQ(buckets.size(), 1u);
  for (auto k : kAllMeasures) EXPECT_DOUBLE_EQ(*buckets[0].report.get(k).value, *dataset_level(k, m, s).value);
  EXPECT_NEAR(*buckets[0].mean,
              (*buckets[0].report.rho.value + *buckets[0].report.r.value + *buckets[0].report.tau.value) / 3, 1e-15);
}

TEST(LengthBuckets, TwoBucketsMatchOracleAndSingletonUndefined) {
  const std::vector<Vec> human{{1, 2, 3}, {3, 1, 2}, {2, 2, 5}};
  const std::vector<std::vector<std::size_t>> lengths{{2, 2, 4}, {4, 2, 4}, {2, 4, 7}};
  const auto m = matrix_from(human, lengths);
  const ScoreGrid s{{0.3, 0.1, 0.9}, {0.5, 0.4, 0.2}, {0.6, 0.7, 0.8}};
  const auto buckets = length_bucket_report(m, s);
  ASSERT_EQ(buckets.size(), 3u);
  const Vec s2{0.3, 0.1, 0.4, 0.6}, h2{1, 2, 1, 2};
  const Vec s4{0.9, 0.5, 0.2, 0.7}, h4{3, 3, 2, 2};
  EXPECT_EQ(buckets[0].sentences, 2u);
  EXPECT_NEAR(*buckets[0].report.r.value, *oracle::pearson(s2, h2), 1e-10);
  EXPECT_NEAR(*buckets[0].report.tau.value, *oracle::kendall(s2, h2), 1e-10);
  EXPECT_EQ(buckets[1].sentences, 4u);
  EXPECT_NEAR(*buckets[1].report.rho.value, *oracle::spearman(s4, h4), 1e-10);
  EXPECT_EQ(buckets[2].sentences, 7u);
  EXPECT_FALSE(buckets[2].report.rho.value);
  EXPECT_FALSE(buckets[2].mean);
  EXPECT_TRUE(to_json(buckets[2])["mean"].is_null());
}

TEST(RankingAccuracy, TieCreditAndEmpty) {
  std::vector<RankingPair> pairs{{"x", testutil::make_discourse(2, "a"), testutil::make_discourse(2, "b"), Preference::a},
                                 {"y", testutil::make_discourse(3, "a"), testutil::make_discourse(3, "b"), Preference::b}};
  ConstantScorer c(0.5);
  EXPECT_DOUBLE_EQ(ranking_accuracy(pairs, c), 0.5);
  EXPECT_THROW(ranking_accuracy({}, c), InvalidInput);
  EXPECT_DOUBLE_EQ(verdict_credit(Preference::a, Preference::a), 1.0);
  EXPECT_DOUBLE_EQ(verdict_credit(Preference::b, Preference::a), 0.0);
}

TEST(RankingAccuracy, OracleOnBuiltDataset) {
  AugmentationConfig cfg;
  cfg.seed = 9;
  std::mt19937_64 gen(9);
  std::vector<Discourse> sources;
  for (int i = 0; i < 40; ++i) sources.push_back(testutil::random_discourse(gen, 2 + gen() % 4, "o" + std::to_string(i)));
  EchoGenerator echo;
  const auto built = build_dataset(cfg, sources, &echo, nullptr);
  const auto pairs = pairs_from_dataset(built.samples);
  ASSERT_EQ(pairs.size(), built.samples.size() / 2);
  OracleScorer oracle(LabelTable::from_dataset(built.samples));
  OracleScorer inverted(LabelTable::from_dataset(built.samples), true);
  EXPECT_EQ(ranking_accuracy(pairs, oracle), 1.0);
  EXPECT_EQ(ranking_accuracy(pairs, inverted), 0.0);
}

TEST(Readers, SummEvalLayoutAveragesAnnotators) {
  std::stringstream in;
  in << R"({"id":"d1","model_id":"M0","decoded":"It rained. We stayed in.","expert_annotations":[{"coherence":2},{"coherence":3},{"coherence":4}]})"
     << '\n'
     << R"({"id":"d1","model_id":"M1","decoded":"Dogs bark.","expert_annotations":[{"coherence":1}]})" << '\n';
  const auto m = read_ratings(in);
  ASSERT_EQ(m.documents(), 1u);
  ASSERT_EQ(m.systems(), 2u);
  EXPECT_DOUBLE_EQ(m.cell(0, 0).human, 3.0);
  EXPECT_EQ(m.cell(0, 0).output.size(), 2u);
  EXPECT_DOUBLE_EQ(m.cell(0, 1).human, 1.0);
}

TEST(Readers, MissingCellNamesDocument) {
  std::stringstream in;
  in << R"({"doc_id":"d1","system_id":"A","text":"One. Two.","human":1})" << '\n'
     << R"({"doc_id":"d1","system_id":"B","text":"One. Two.","human":2})" << '\n'
     << R"({"doc_id":"d2","system_id":"A","text":"One. Two.","human":3})" << '\n';
  try {
    read_ratings(in);
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("d2"), std::string::npos);
  }
}

TEST(Readers, ScoresAlignAndMismatchNamesDocument) {
  const auto m = matrix_from({{1, 2}, {3, 4}});
  std::stringstream ok;
  ok << R"({"doc_id":"doc1","system_id":"sys0","score":0.3})" << '\n'
     << R"({"doc_id":"doc0","system_id":"sys1","score":0.2})" << '\n'
     << R"({"doc_id":"doc0","system_id":"sys0","score":0.1})" << '\n'
     << R"({"doc_id":"doc1","system_id":"sys1","score":0.4})" << '\n';
  EXPECT_EQ(read_scores(ok, m), (ScoreGrid{{0.1, 0.2}, {0.3, 0.4}}));
  std::stringstream missing;
  missing << R"({"doc_id":"doc0","system_id":"sys0","score":0.1})" << '\n'
          << R"({"doc_id":"doc0","system_id":"sys1","score":0.2})" << '\n'
          << R"({"doc_id":"doc1","system_id":"sys0","score":0.3})" << '\n';
  try {
    read_scores(missing, m);
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("doc1"), std::string::npos);
  }
  std::stringstream stranger(R"({"doc_id":"doc9","system_id":"sys0","score":0.1})");
  EXPECT_THROW(read_scores(stranger, m), InvalidInput);
}

TEST(Readers, PairRecords) {
  std::stringstream in;
  in << R"({"id":"p1","a":"One. Two.","b":["Two.","One."],"gold":"a"})" << '\n'
     << R"({"a":{"sentences":["X."]},"b":{"text":"Y. Z."},"gold":"B"})" << '\n';
  const auto pairs = read_pairs(in);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].id, "p1");
  EXPECT_EQ(pairs[0].gold, Preference::a);
  EXPECT_EQ(pairs[1].id, "2");
  EXPECT_EQ(pairs[1].b.size(), 2u);
  EXPECT_THROW(pair_from_json(json::parse(R"({"a":"X.","b":"Y.","gold":"tie"})"), 3), ParseError);
  EXPECT_THROW(pair_from_json(json::parse(R"({"a":"X.","gold":"A"})"), 3), ParseError);
}

TEST(Formatting, TableMarksUndefined) {
  CorrelationReport r;
  r.rho.value = 0.5;
  r.r.reason = "constant";
  r.tau.value = -0.25;
  const auto t = format_table({r});
  EXPECT_NE(t.find("0.5000"), std::string::npos);
  EXPECT_NE(t.find("n/a"), std::string::npos);
  EXPECT_NE(t.find("-0.2500"), std::string::npos);
  EXPECT_EQ(to_json(r.r)["reason"], "constant");
}
