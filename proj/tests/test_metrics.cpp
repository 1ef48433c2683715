#include <doctest.h>

#include <numeric>

#include "dupdetect/error.hpp"
#include "dupdetect/metrics.hpp"
#include "dupdetect/rng.hpp"
#include "support/oracle.hpp"

using namespace dupdetect;

TEST_CASE("single-class confusion metrics") {
  const auto m = confusion_metrics({.tp = 5, .fp = 1, .fn = 2, .tn = 12});
  CHECK(m.accuracy == doctest::Approx(0.85).epsilon(1e-15));
  CHECK(*m.precision == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(*m.recall == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
  CHECK(*m.f1 == doctest::Approx(2.0 * (5.0 / 6) * (5.0 / 7) / (5.0 / 6 + 5.0 / 7)).epsilon(1e-15));

  const auto perfect = confusion_metrics({.tp = 4, .tn = 6});
  CHECK(perfect.accuracy == 1.0);
  CHECK(*perfect.precision == 1.0);
  CHECK(*perfect.recall == 1.0);
  CHECK(*perfect.f1 == 1.0);

  const auto none = confusion_metrics({.fn = 3, .tn = 1});
  CHECK_FALSE(none.precision);
  CHECK(*none.recall == 0.0);
  CHECK_FALSE(none.f1);
  CHECK_THROWS_AS(confusion_metrics({}), UndefinedMetric);
  CHECK_THROWS_AS(require_metric(none.precision, "precision"), UndefinedMetric);
  CHECK(require_metric(none.recall, "recall") == 0.0);
  CHECK(f1_score(0, 0) == 0.0);
}

TEST_CASE("two-class macro average") {
  // A: P = 1, R = 0.5. B: P = 0.5, R = 1.
  const auto m = macro_metrics({{"A", 1, 0, 1}, {"B", 1, 1, 0}});
  CHECK(*m.classes[0].precision == 1.0);
  CHECK(*m.classes[0].recall == 0.5);
  CHECK(*m.precision == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(*m.recall == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(*m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.undefined.empty());

  // A class never predicted is excluded from the precision mean and flagged.
  const auto skip = macro_metrics({{"A", 2, 0, 0}, {"B", 0, 0, 3}});
  CHECK(*skip.precision == 1.0);
  CHECK(*skip.recall == 0.5);
  CHECK(skip.undefined == std::vector<std::string>{"B:precision", "B:f1"});
}

TEST_CASE("classification report layout") {
  const auto r = classification_report({1, 1, 0, 0, 0}, {1, 0, 0, 0, 1});
  REQUIRE(r.classes.size() == 2);
  CHECK(r.classes[0].label == "non-duplicate");
  CHECK(r.classes[1].label == "duplicate");
  CHECK(r.classes[0].support == 3);
  CHECK(r.classes[1].support == 2);
  CHECK(r.accuracy == doctest::Approx(0.6));
  CHECK(*r.classes[0].precision == doctest::Approx(2.0 / 3.0));
  CHECK(*r.weighted.recall == doctest::Approx(0.6));
  CHECK(r.macro.support == 5);

  const auto text = r.to_text();
  CHECK(text.find("precision") != std::string::npos);
  CHECK(text.find("support") != std::string::npos);
  CHECK(text.find("weighted avg") != std::string::npos);

  const auto back = ClassificationReport::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());

  CHECK_THROWS_AS(classification_report({1}, {1, 0}), ShapeMismatch);
  CHECK_THROWS_AS(classification_report({}, {}), UndefinedMetric);
  CHECK_THROWS_AS(classification_report({2}, {1}), DataError);
}

TEST_CASE("average precision examples") {
  CHECK(average_precision({1, {1, 2}}) == 1.0);
  CHECK(average_precision({1, {2}}) == 0.5);
  CHECK(average_precision({1, {1, 3}}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(mean_average_precision({{1, {1, 2}}, {2, {2}}, {3, {}}}) == doctest::Approx(0.75));
}

TEST_CASE("rate at k examples") {
  // relevant {a, b}; a at rank 2, b at rank 7.
  const std::vector<QueryRanking> q{{1, {2, 7}}};
  CHECK(recall_rate_at_k(q, 3) == 0.5);
  CHECK(recall_rate_at_k(q, 7) == 1.0);
  CHECK(recall_rate_at_k(q, 100) == 1.0);
  CHECK(precision_rate_at_k({{1, {4}}}, 5) == doctest::Approx(0.2));
  CHECK(precision_rate_at_k({{1, {6}}}, 5) == 0.0);
  CHECK(eligible_count({{1, {}}, {2, {3}}}) == 1);

  CHECK_THROWS_AS(recall_rate_at_k({{1, {}}}, 5), NoEligibleQueries);
  CHECK_THROWS_AS(precision_rate_at_k({}, 5), NoEligibleQueries);
  CHECK_THROWS_AS(mean_average_precision({{1, {}}}), NoEligibleQueries);
}

TEST_CASE("property: rank metric bookkeeping") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<QueryRanking> qs;
    const auto n = 1 + rng.below(15);
    for (std::uint64_t i = 0; i < n; ++i) {
      QueryRanking q{static_cast<ReportId>(i), {}};
      std::size_t rank = 0;
      const auto rel = 1 + rng.below(5);
      for (std::uint64_t j = 0; j < rel; ++j) q.relevant_ranks.push_back(rank += 1 + rng.below(6));
      qs.push_back(q);
    }
    double prev = 0;
    for (std::size_t k = 1; k <= 40; ++k) {
      const double r = recall_rate_at_k(qs, k);
      CHECK(r >= prev);
      prev = r;
      std::size_t hits = 0;
      for (const auto& q : qs)
        hits += static_cast<std::size_t>(std::count_if(q.relevant_ranks.begin(), q.relevant_ranks.end(),
                                                       [&](std::size_t x) { return x <= k; }));
      CHECK(precision_rate_at_k(qs, k) * static_cast<double>(k) ==
            doctest::Approx(static_cast<double>(hits) / static_cast<double>(qs.size())).epsilon(1e-12));
    }
    const double map = mean_average_precision(qs);
    CHECK(map > 0.0);
    CHECK(map <= 1.0);
  }
}

TEST_CASE("property: label metrics match brute force on 1000 random sets") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto problems = testing::oracle::check_labels(rng);
    INFO("trial " << trial);
    CHECK(problems.empty());
  }
}

TEST_CASE("property: n-class macro average matches brute force") {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(4));
    const std::size_t n = 1 + rng.below(30);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
      pred[i] = rng.uniform() < 0.5 ? truth[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    }
    std::vector<ClassCounts> counts;
    for (int c = 0; c < classes; ++c) {
      ClassCounts cc{"c" + std::to_string(c), 0, 0, 0};
      for (std::size_t i = 0; i < n; ++i) {
        cc.tp += truth[i] == c && pred[i] == c;
        cc.fp += truth[i] != c && pred[i] == c;
        cc.fn += truth[i] == c && pred[i] != c;
      }
      counts.push_back(cc);
    }
    const auto rows = testing::oracle::per_class(truth, pred, classes);
    const auto got = macro_metrics(counts);
    auto same = [](const std::optional<double>& g, double want) {
      return std::isnan(want) ? !g.has_value() : g && std::abs(*g - want) <= 1e-12;
    };
    using Row = testing::oracle::ClassRow;
    CHECK(same(got.precision, testing::oracle::macro(rows, &Row::precision)));
    CHECK(same(got.recall, testing::oracle::macro(rows, &Row::recall)));
    CHECK(same(got.f1, testing::oracle::macro(rows, &Row::f1)));
  }
}
