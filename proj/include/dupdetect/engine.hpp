#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dupdetect/corpus.hpp"
#include "dupdetect/embed.hpp"
#include "dupdetect/metrics.hpp"
#include "dupdetect/partition.hpp"

namespace dupdetect {

struct DetectionConfig {
  double delta = 0.95;
  std::vector<std::size_t> k_list{5, 10, 15, 20};
  PartitionStrategy strategy = PartitionStrategy::kTopic;
  std::string provider_tag;
  // Only reports earlier in corpus order are searched.
  bool causal = false;

  // Throws ConfigError.
  void validate() const;
};

struct Candidate {
  ReportId id = 0;
  double similarity = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Descending similarity, then ascending id.
bool ranks_before(const Candidate& a, const Candidate& b);

struct DetectionResult {
  ReportId query = 0;
  std::vector<Candidate> candidates;  // similarity > delta, ranked
  bool predicted_duplicate = false;
};

// Unit-normalized embeddings of each group's members. Reports with an
// all-zero embedding are never candidates.
class SimilarityIndex {
 public:
  SimilarityIndex(const EmbeddingSet& embeddings, const Partition& partition);

  const Partition& partition() const noexcept { return partition_; }

  // Cosine similarity to every other searchable member of the query's group
  // (member order, unranked). Empty for a zero-vector query.
  // `corpus` restricts the pool to earlier reports. Throws QueryNotInPartition.
  std::vector<Candidate> scores(ReportId query, const Corpus* causal_corpus = nullptr) const;

  bool is_zero(ReportId id) const;

 private:
  struct Group {
    std::vector<ReportId> ids;  // ascending
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> unit;
  };
  Partition partition_;
  std::map<std::string, Group> groups_;
  std::unordered_map<ReportId, std::pair<const Group*, Eigen::Index>> where_;
  std::unordered_map<ReportId, bool> zero_;
};

DetectionResult detect_threshold(const SimilarityIndex& index, ReportId query, double delta,
                                 const Corpus* causal_corpus = nullptr);
// Fewer than k results when the pool is small.
std::vector<Candidate> detect_topk(const SimilarityIndex& index, ReportId query, std::size_t k,
                                   const Corpus* causal_corpus = nullptr);

// Everything evaluation needs from one query's scores.
struct QueryOutcome {
  ReportId query = 0;
  std::string group;
  bool zero_vector = false;
  std::vector<Candidate> above;  // similarity > min delta, ranked
  std::vector<Candidate> top;    // first max-k, ranked
  QueryRanking ranking;          // ranks of partners within the pool
};

QueryOutcome score_query(const SimilarityIndex& index, ReportId query, const DuplicateGraph& truth, double min_delta,
                         std::size_t max_k, const Corpus* causal_corpus = nullptr);

std::vector<QueryOutcome> score_queries(const SimilarityIndex& index, const std::vector<ReportId>& queries,
                                        const DuplicateGraph& truth, double min_delta, std::size_t max_k,
                                        const Corpus* causal_corpus = nullptr);

// A query counts as a duplicate when it has at least one partner in the
// duplicate graph. TP: duplicate with a partner above delta; TN: non-duplicate
// without candidates; FP: non-duplicate with candidates; FN: the remainder.
enum class Outcome { kTP, kTN, kFP, kFN };
Outcome classify_outcome(const QueryOutcome& outcome, double delta, const DuplicateGraph& truth);

struct GroupBreakdown {
  std::string group;
  ConfusionCounts counts;
  double accuracy = 0.0;
  double binary_accuracy = 0.0;
};

struct EvalReport {
  double delta = 0.0;
  std::size_t queries = 0;
  std::size_t zero_vector_queries = 0;
  ConfusionCounts counts;
  double accuracy = 0.0;
  double binary_accuracy = 0.0;
  double precision = 0.0;  // undefined values are reported as 0 and listed
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::string> undefined_metrics;
  std::vector<GroupBreakdown> groups;

  std::map<std::size_t, double> recall_at_k;
  std::map<std::size_t, double> precision_at_k;
  std::optional<double> mean_average_precision;
  std::size_t topk_eligible = 0;
  std::size_t topk_excluded = 0;

  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Throws MissingGroundTruth for a query absent from the graph.
EvalReport evaluate_threshold_run(const std::vector<QueryOutcome>& outcomes, double delta,
                                  const DuplicateGraph& truth, const std::vector<std::size_t>& k_list = {});

std::vector<EvalReport> sweep_thresholds(const std::vector<QueryOutcome>& outcomes, const std::vector<double>& deltas,
                                         const DuplicateGraph& truth, const std::vector<std::size_t>& k_list = {});

// Top-k metrics over outcomes; empty maps when no query is eligible.
void fill_rank_metrics(EvalReport& report, const std::vector<QueryOutcome>& outcomes,
                       const std::vector<std::size_t>& k_list);

}  // namespace dupdetect
