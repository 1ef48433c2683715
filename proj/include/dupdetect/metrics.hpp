#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dupdetect/corpus.hpp"

namespace dupdetect {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp, fp += o.fp, fn += o.fn, tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// An empty optional marks a metric whose denominator is zero.
struct BinaryMetrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

// Single-class (positive = duplicate) view. Throws UndefinedMetric if total is 0.
BinaryMetrics confusion_metrics(const ConfusionCounts& counts);

// Harmonic mean; 0 when p + r == 0.
double f1_score(double precision, double recall);

// Throws UndefinedMetric naming `what` when the value is missing.
double require_metric(const std::optional<double>& value, const std::string& what);

struct ClassCounts {
  std::string label;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t support() const noexcept { return tp + fn; }
};

struct ClassMetrics {
  std::string label;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::size_t support = 0;
};

// Per-class P/R/F1 and their unweighted means over the classes where each is
// defined; `undefined` lists the excluded "class:metric" entries.
struct MacroMetrics {
  std::vector<ClassMetrics> classes;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::vector<std::string> undefined;
};

MacroMetrics macro_metrics(const std::vector<ClassCounts>& classes);

// Per-class table with accuracy, macro and support-weighted averages.
struct ClassificationReport {
  std::vector<ClassMetrics> classes;
  double accuracy = 0.0;
  ClassMetrics macro;
  ClassMetrics weighted;
  std::vector<std::string> undefined;

  nlohmann::ordered_json to_json() const;
  static ClassificationReport from_json(const nlohmann::json& j);
  // Columns: precision, recall, f1-score, support.
  std::string to_text() const;
};

// Binary labels 0 = "non-duplicate", 1 = "duplicate". Throws ShapeMismatch, UndefinedMetric,
// DataError for any other label.
ClassificationReport classification_report(const std::vector<int>& truth, const std::vector<int>& predicted);

// 1-based ranks of a query's relevant items within its full ranked pool,
// ascending; its size is the number of relevant items.
struct QueryRanking {
  ReportId query = 0;
  std::vector<std::size_t> relevant_ranks;
};

// Means over queries with at least one relevant item. Throw NoEligibleQueries.
double recall_rate_at_k(const std::vector<QueryRanking>& queries, std::size_t k);
double precision_rate_at_k(const std::vector<QueryRanking>& queries, std::size_t k);
double mean_average_precision(const std::vector<QueryRanking>& queries);

double average_precision(const QueryRanking& query);
std::size_t eligible_count(const std::vector<QueryRanking>& queries);

}  // namespace dupdetect
