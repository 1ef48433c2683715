#include <doctest.h>

#include <cmath>

#include "dupdetect/engine.hpp"
#include "dupdetect/error.hpp"
#include "dupdetect/report.hpp"
#include "dupdetect/rng.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace dupdetect;
using testing::make_report;

namespace {

// A unit vector in the plane at cosine `c` from (1, 0).
std::vector<double> at_cosine(double c) { return {c, std::sqrt(1 - c * c)}; }

struct Fixture {
  Corpus corpus;
  EmbeddingSet emb;
  Partition part;
};

// One report per row; ids 1..n in creation order, all in a single group
// unless `groups` says otherwise.
Fixture fixture(const std::vector<std::vector<double>>& rows, const std::map<ReportId, ReportId>& links = {},
                const std::vector<std::string>& groups = {}) {
  Fixture f;
  std::vector<BugReport> reports;
  f.emb.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.at(0).size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ReportId id = static_cast<ReportId>(i + 1);
    std::optional<ReportId> dup;
    if (links.contains(id)) dup = links.at(id);
    reports.push_back(make_report(id, "r" + std::to_string(id), "", dup, "Core",
                                  "2005-05-14T10:0" + std::to_string(i % 10) + ":0" + std::to_string(i / 10) + "Z"));
    f.emb.ids.push_back(id);
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      f.emb.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    f.part.groups[groups.empty() ? "all" : groups.at(i)].push_back(id);
  }
  f.corpus = Corpus(reports);
  return f;
}

}  // namespace

TEST_CASE("threshold detection examples") {
  // Query 1; 2 at 0.97, 3 at 0.80.
  const auto f = fixture({{1, 0}, at_cosine(0.97), at_cosine(0.80)});
  const SimilarityIndex index(f.emb, f.part);
  const auto r = detect_threshold(index, 1, 0.85);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].id == 2);
  CHECK(r.candidates[0].similarity == doctest::Approx(0.97).epsilon(1e-12));
  CHECK(r.predicted_duplicate);

  const auto none = detect_threshold(index, 1, 1.0);
  CHECK(none.candidates.empty());
  CHECK_FALSE(none.predicted_duplicate);

  const auto both = detect_threshold(index, 1, 0.5);
  REQUIRE(both.candidates.size() == 2);
  CHECK(both.candidates[0].id == 2);

  // Identical vector listed first with similarity 1.
  const auto g = fixture({{1, 0}, at_cosine(0.96), {1, 0}});
  const auto exact = detect_threshold(SimilarityIndex(g.emb, g.part), 1, 0.95);
  REQUIRE(exact.candidates.size() == 2);
  CHECK(exact.candidates[0].id == 3);
  CHECK(exact.candidates[0].similarity == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(detect_threshold(index, 99, 0.5), QueryNotInPartition);
}

TEST_CASE("top-k detection clamps and breaks ties by id") {
  const auto f = fixture({{1, 0}, at_cosine(0.9), at_cosine(0.5), at_cosine(0.9)});
  const SimilarityIndex index(f.emb, f.part);
  const auto all = detect_topk(index, 1, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[0].id == 2);
  CHECK(all[1].id == 4);
  CHECK(all[0].similarity == all[1].similarity);
  CHECK(all[2].id == 3);

  const auto g = fixture({{1, 0}, at_cosine(0.97), at_cosine(0.80)});
  const auto one = detect_topk(SimilarityIndex(g.emb, g.part), 1, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].id == 2);
  CHECK(detect_topk(index, 1, 0).empty());
  CHECK_THROWS_AS(detect_topk(index, 42, 3), QueryNotInPartition);
}

TEST_CASE("search stays inside the query's group") {
  const auto f = fixture({{1, 0}, {1, 0}, {1, 0}}, {}, {"a", "b", "a"});
  const SimilarityIndex index(f.emb, f.part);
  const auto r = detect_threshold(index, 1, 0.5);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].id == 3);
  CHECK(detect_topk(index, 2, 5).empty());
}

TEST_CASE("property: top-k prefixes and threshold consistency") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = testing::oracle::random_world(rng);
    const SimilarityIndex index(w.embeddings, w.partition);
    for (ReportId q : w.corpus.ids()) {
      const auto full = detect_topk(index, q, 1000);
      for (std::size_t k = 0; k <= full.size() + 1; ++k) {
        const auto part = detect_topk(index, q, k);
        CHECK(part.size() == std::min(k, full.size()));
        CHECK(std::equal(part.begin(), part.end(), full.begin()));
      }
      for (double delta : {-0.5, 0.0, 0.5, 0.9}) {
        std::vector<Candidate> prefix;
        for (const auto& c : full) {
          if (c.similarity <= delta) break;
          prefix.push_back(c);
        }
        CHECK(detect_threshold(index, q, delta).candidates == prefix);
      }
    }
  }
}

TEST_CASE("query outcome examples") {
  // 1 and 2 are duplicates (partner at 0.93); 3 is a decoy close to 4; 4 and 5
  // are duplicates of each other but 4 only sees the decoy above 0.9.
  const auto f = fixture({{1, 0}, at_cosine(0.93), {0, 1}, {0, 1}, {-1, 0}, {0.6, -0.8}}, {{2, 1}, {5, 4}},
                         {"g", "g", "h", "h", "h", "k"});
  const auto truth = resolve_masters(f.corpus);
  const SimilarityIndex index(f.emb, f.part);
  auto outcome = [&](ReportId q) { return classify_outcome(score_query(index, q, truth, 0.9, 5), 0.9, truth); };
  CHECK(outcome(1) == Outcome::kTP);
  CHECK(outcome(4) == Outcome::kFN);  // candidate 3 is not a partner
  CHECK(outcome(3) == Outcome::kFP);
  CHECK(outcome(6) == Outcome::kTN);
  CHECK(outcome(5) == Outcome::kFN);  // partner present but far below delta

  const auto report = evaluate_threshold_run(score_queries(index, f.corpus.ids(), truth, 0.9, 5), 0.9, truth, {1, 2});
  CHECK(report.counts == ConfusionCounts{.tp = 2, .fp = 1, .fn = 2, .tn = 1});
  CHECK(report.accuracy == doctest::Approx(0.5));
  CHECK(report.binary_accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(report.groups.size() == 3);
  CHECK(report.f1 == doctest::Approx(2 * report.precision * report.recall / (report.precision + report.recall)));
}

TEST_CASE("property: evaluation matches brute force on 1000 random worlds") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto w = testing::oracle::random_world(rng);
    const std::vector<double> deltas{-1.0, 0.0, rng.uniform(), 0.85, 0.95};
    const auto problems = testing::oracle::check_world(w, deltas, {1, 2, 5, 10}, trial % 4 == 0);
    INFO("trial " << trial << ": " << (problems.empty() ? "" : problems.front()));
    CHECK(problems.empty());
  }
}

TEST_CASE("causal mode only searches earlier reports") {
  const auto f = fixture({{1, 0}, {1, 0}, {1, 0}}, {{2, 1}});
  const SimilarityIndex index(f.emb, f.part);
  CHECK(detect_threshold(index, 1, 0.5, &f.corpus).candidates.empty());
  CHECK(detect_threshold(index, 3, 0.5, &f.corpus).candidates.size() == 2);
  CHECK(detect_threshold(index, 1, 0.5).candidates.size() == 2);

  const auto truth = resolve_masters(f.corpus);
  const auto report = evaluate_threshold_run(score_queries(index, f.corpus.ids(), truth, 0.5, 5, &f.corpus), 0.5,
                                             truth, {5});
  // Report 1 has a partner, but only later in time.
  CHECK(report.topk_eligible == 1);
  CHECK(report.topk_excluded == 2);
  CHECK(report.counts.fn == 1);
}

TEST_CASE("zero vectors are never candidates") {
  const auto f = fixture({{1, 0}, {0, 0}, {1, 0}}, {{2, 1}});
  const SimilarityIndex index(f.emb, f.part);
  CHECK(index.is_zero(2));
  CHECK(index.scores(2).empty());
  const auto r = detect_topk(index, 1, 5);
  REQUIRE(r.size() == 1);
  CHECK(r[0].id == 3);
  const auto truth = resolve_masters(f.corpus);
  const auto report = evaluate_threshold_run(score_queries(index, f.corpus.ids(), truth, 0.5, 5), 0.5, truth, {1});
  CHECK(report.zero_vector_queries == 1);
  CHECK(report.topk_eligible == 0);
  CHECK(report.recall_at_k.empty());
  CHECK_FALSE(report.mean_average_precision);
}

TEST_CASE("threshold sweep with a borderline pair") {
  const auto f = fixture({{1, 0}, at_cosine(0.92), {0, 1}}, {{2, 1}});
  const auto truth = resolve_masters(f.corpus);
  const SimilarityIndex index(f.emb, f.part);
  CHECK(detect_threshold(index, 1, 0.90).candidates.size() == 1);
  CHECK(detect_threshold(index, 1, 0.95).candidates.empty());

  const auto outcomes = score_queries(index, f.corpus.ids(), truth, 0.85, 20);
  const auto table = sweep_thresholds(outcomes, {0.85, 0.90, 0.95}, truth);
  REQUIRE(table.size() == 3);
  CHECK(table[1].counts.tp == 2);
  CHECK(table[2].counts.tp == 0);
  CHECK(table[2].counts.fn == 2);

  const auto csv = thresholds_csv(table);
  CHECK(csv.starts_with("delta,accuracy,binary_accuracy,recall,precision,f1\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const auto text = threshold_table(table);
  const auto a = text.find("Accuracy"), b = text.find("Binary Accuracy"), r = text.find("Recall"),
             p = text.find("Precision"), f1 = text.find("F1 Score");
  CHECK(a < b);
  CHECK(b < r);
  CHECK(r < p);
  CHECK(p < f1);
  CHECK(f1 != std::string::npos);
}

TEST_CASE("evaluation errors") {
  const auto f = fixture({{1, 0}, {1, 0}});
  const auto truth = resolve_masters(f.corpus);
  const SimilarityIndex index(f.emb, f.part);
  auto outcomes = score_queries(index, {1, 2}, truth, 0.5, 5);
  outcomes[0].query = 77;
  CHECK_THROWS_AS(evaluate_threshold_run(outcomes, 0.5, truth), MissingGroundTruth);
  CHECK_THROWS_AS(evaluate_threshold_run({}, 0.5, truth), UndefinedMetric);
  CHECK_THROWS_AS(score_query(index, 77, truth, 0.5, 5), QueryNotInPartition);

  DetectionConfig bad;
  bad.delta = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  DetectionConfig nok;
  nok.k_list = {0};
  CHECK_THROWS_AS(nok.validate(), ConfigError);
  CHECK_NOTHROW(DetectionConfig{}.validate());
}

TEST_CASE("eval report json round trip and determinism") {
  Rng rng(4);
  const auto w = testing::oracle::random_world(rng);
  const auto truth = resolve_masters(w.corpus);
  const SimilarityIndex index(w.embeddings, w.partition);
  const auto a = score_queries(index, w.corpus.ids(), truth, 0.0, 10);
  const auto b = score_queries(index, w.corpus.ids(), truth, 0.0, 10);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].above == b[i].above);
    CHECK(a[i].ranking.relevant_ranks == b[i].ranking.relevant_ranks);
  }
  auto report = evaluate_threshold_run(a, 0.5, truth, {1, 5, 10});
  report.metadata["seed"] = 4;
  const auto back = EvalReport::from_json(report.to_json());
  CHECK(back.to_json() == report.to_json());
  CHECK(back.counts == report.counts);
  CHECK(back.recall_at_k == report.recall_at_k);
  for (double v : {report.accuracy, report.binary_accuracy, report.precision, report.recall, report.f1}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
