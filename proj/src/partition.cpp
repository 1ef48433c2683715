#include "dupdetect/partition.hpp"

#include <algorithm>
#include <fstream>

#include "dupdetect/error.hpp"

namespace dupdetect {

PartitionStrategy parse_partition_strategy(std::string_view name) {
  if (name == "none") return PartitionStrategy::kNone;
  if (name == "topic") return PartitionStrategy::kTopic;
  if (name == "quarter") return PartitionStrategy::kQuarter;
  if (name == "kmeans") return PartitionStrategy::kKMeans;
  throw ConfigError("unknown partition strategy '" + std::string(name) + "' (expected none, topic, quarter or kmeans)");
}

std::string_view to_string(PartitionStrategy strategy) {
  switch (strategy) {
    case PartitionStrategy::kNone:
      return "none";
    case PartitionStrategy::kTopic:
      return "topic";
    case PartitionStrategy::kQuarter:
      return "quarter";
    case PartitionStrategy::kKMeans:
      return "kmeans";
  }
  return "none";
}

std::size_t Partition::total_size() const {
  std::size_t n = 0;
  for (const auto& [key, members] : groups) n += members.size();
  return n;
}

const std::string& Partition::group_of(ReportId id) const {
  if (lookup_.empty()) {
    for (const auto& [key, members] : groups)
      for (ReportId m : members) lookup_.emplace(m, &key);
  }
  auto it = lookup_.find(id);
  if (it == lookup_.end()) throw QueryNotInPartition(id);
  return *it->second;
}

nlohmann::ordered_json Partition::to_json() const {
  nlohmann::ordered_json j;
  j["strategy"] = std::string(to_string(strategy));
  j["params"] = params;
  nlohmann::ordered_json g = nlohmann::ordered_json::object();
  for (const auto& [key, members] : groups) g[key] = members;
  j["groups"] = std::move(g);
  return j;
}

Partition Partition::from_json(const nlohmann::json& j) {
  Partition p;
  p.strategy = parse_partition_strategy(j.at("strategy").get<std::string>());
  if (j.contains("params")) p.params = nlohmann::ordered_json::parse(j["params"].dump());
  std::map<ReportId, std::string> seen;
  for (const auto& [key, members] : j.at("groups").items()) {
    auto ids = members.get<std::vector<ReportId>>();
    if (ids.empty()) continue;
    std::sort(ids.begin(), ids.end());
    for (ReportId id : ids)
      if (!seen.emplace(id, key).second) throw DataError("report " + std::to_string(id) + " appears in two groups");
    p.groups.emplace(key, std::move(ids));
  }
  return p;
}

namespace {

Partition finish(PartitionStrategy strategy, std::map<std::string, std::vector<ReportId>> groups,
                 nlohmann::ordered_json params = nlohmann::ordered_json::object()) {
  Partition p;
  p.strategy = strategy;
  p.params = std::move(params);
  for (auto& [key, members] : groups) {
    if (members.empty()) continue;
    std::sort(members.begin(), members.end());
    p.groups.emplace(key, std::move(members));
  }
  return p;
}

}  // namespace

Partition partition_none(const Corpus& corpus) {
  std::map<std::string, std::vector<ReportId>> groups;
  if (!corpus.empty()) groups["all"] = corpus.ids();
  return finish(PartitionStrategy::kNone, std::move(groups));
}

Partition partition_by_topic(const TopicModel& model, const Corpus& corpus) {
  if (model.num_docs() != corpus.size())
    throw ModelCorpusMismatch("model has " + std::to_string(model.num_docs()) + " documents, corpus has " +
                              std::to_string(corpus.size()));
  std::map<std::string, std::vector<ReportId>> groups;
  std::vector<ReportId> empty_docs;
  for (std::size_t d = 0; d < model.num_docs(); ++d) {
    const ReportId id = model.doc_ids()[d];
    if (!corpus.find(id)) throw ModelCorpusMismatch("report " + std::to_string(id) + " is not in the corpus");
    groups[std::to_string(dominant_topic(model, d))].push_back(id);
    if (is_empty_document(model, d)) empty_docs.push_back(id);
  }
  nlohmann::ordered_json params;
  params["k"] = model.k();
  params["beta"] = model.beta();
  params["alpha"] = model.alpha()[0];
  params["iterations"] = model.iterations();
  params["seed"] = model.seed();
  // Reports with no in-vocabulary token fall back to topic 0.
  params["empty_documents"] = empty_docs;
  return finish(PartitionStrategy::kTopic, std::move(groups), std::move(params));
}

std::string quarter_key(Timestamp t) {
  const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(t)};
  const unsigned quarter = (static_cast<unsigned>(ymd.month()) - 1) / 3 + 1;
  return std::to_string(static_cast<int>(ymd.year())) + "-Q" + std::to_string(quarter);
}

Partition partition_by_quarter(const Corpus& corpus) {
  std::map<std::string, std::vector<ReportId>> groups;
  for (const auto& r : corpus.reports()) groups[quarter_key(r.created_at)].push_back(r.id);
  return finish(PartitionStrategy::kQuarter, std::move(groups));
}

Partition partition_by_kmeans(const KMeansModel<double>& model, const EmbeddingSet& embeddings) {
  if (model.assignments.size() != embeddings.ids.size())
    throw ShapeMismatch("k-means assignments vs embedding rows");
  std::map<std::string, std::vector<ReportId>> groups;
  for (std::size_t i = 0; i < model.assignments.size(); ++i)
    groups[std::to_string(model.assignments[i])].push_back(embeddings.ids[i]);
  nlohmann::ordered_json params;
  params["k"] = model.k;
  params["seed"] = model.seed;
  params["restarts"] = model.restarts;
  params["inertia"] = model.inertia;
  params["provider"] = embeddings.provider_tag;
  return finish(PartitionStrategy::kKMeans, std::move(groups), std::move(params));
}

void save_partition(const Partition& partition, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << partition.to_json().dump(1) << '\n';
}

Partition load_partition(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Partition::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "<file>", e.what());
  }
}

void save_elbow_csv(const std::vector<ElbowPoint>& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "k,inertia\n";
  char buf[64];
  for (const auto& p : table) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", p.k, p.inertia);
    out << buf;
  }
}

}  // namespace dupdetect
