#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dupdetect/corpus.hpp"
#include "dupdetect/embed.hpp"
#include "dupdetect/kmeans.hpp"
#include "dupdetect/lda.hpp"

namespace dupdetect {

enum class PartitionStrategy { kNone, kTopic, kQuarter, kKMeans };

PartitionStrategy parse_partition_strategy(std::string_view name);
std::string_view to_string(PartitionStrategy strategy);

// Disjoint, covering, non-empty groups of report ids.
struct Partition {
  PartitionStrategy strategy = PartitionStrategy::kNone;
  std::map<std::string, std::vector<ReportId>> groups;  // member ids sorted
  nlohmann::ordered_json params = nlohmann::ordered_json::object();

  std::size_t total_size() const;
  // Group key of a report; throws QueryNotInPartition.
  const std::string& group_of(ReportId id) const;

  nlohmann::ordered_json to_json() const;
  static Partition from_json(const nlohmann::json& j);

 private:
  mutable std::map<ReportId, const std::string*> lookup_;
};

Partition partition_none(const Corpus& corpus);

// Group key = dominant topic id. Throws ModelCorpusMismatch.
Partition partition_by_topic(const TopicModel& model, const Corpus& corpus);

// "YYYY-Qn" for a UTC timestamp.
std::string quarter_key(Timestamp t);
Partition partition_by_quarter(const Corpus& corpus);

// Group key = cluster index of the report's embedding row.
Partition partition_by_kmeans(const KMeansModel<double>& model, const EmbeddingSet& embeddings);

void save_partition(const Partition& partition, const std::filesystem::path& path);
Partition load_partition(const std::filesystem::path& path);

// CSV `k,inertia`.
void save_elbow_csv(const std::vector<ElbowPoint>& table, const std::filesystem::path& path);

}  // namespace dupdetect
