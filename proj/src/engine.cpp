#include "dupdetect/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "dupdetect/error.hpp"

namespace dupdetect {

void DetectionConfig::validate() const {
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1], got " + std::to_string(delta));
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    if (k_list[i] == 0) throw ConfigError("top-k cutoffs must be positive");
    if (i > 0 && k_list[i] <= k_list[i - 1]) throw ConfigError("top-k cutoffs must be strictly ascending");
  }
}

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

SimilarityIndex::SimilarityIndex(const EmbeddingSet& embeddings, const Partition& partition) : partition_(partition) {
  std::unordered_map<ReportId, Eigen::Index> row_of;
  for (std::size_t i = 0; i < embeddings.ids.size(); ++i) row_of.emplace(embeddings.ids[i], static_cast<Eigen::Index>(i));
  const Eigen::Index dim = embeddings.vectors.cols();
  for (const auto& [key, members] : partition_.groups) {
    Group& g = groups_[key];
    g.ids = members;
    g.unit.resize(static_cast<Eigen::Index>(members.size()), dim);
    for (std::size_t m = 0; m < members.size(); ++m) {
      auto it = row_of.find(members[m]);
      if (it == row_of.end()) throw IndexError("no embedding for report " + std::to_string(members[m]));
      const auto row = embeddings.vectors.row(it->second);
      const double norm = row.norm();
      const bool zero = norm == 0.0;
      zero_.emplace(members[m], zero);
      if (zero) g.unit.row(static_cast<Eigen::Index>(m)).setZero();
      else g.unit.row(static_cast<Eigen::Index>(m)) = row / norm;
    }
  }
  for (const auto& [key, g] : groups_)
    for (std::size_t m = 0; m < g.ids.size(); ++m) where_.emplace(g.ids[m], std::make_pair(&g, static_cast<Eigen::Index>(m)));
}

bool SimilarityIndex::is_zero(ReportId id) const {
  auto it = zero_.find(id);
  if (it == zero_.end()) throw QueryNotInPartition(id);
  return it->second;
}

std::vector<Candidate> SimilarityIndex::scores(ReportId query, const Corpus* causal_corpus) const {
  auto it = where_.find(query);
  if (it == where_.end()) throw QueryNotInPartition(query);
  const auto& [group, qrow] = it->second;
  std::vector<Candidate> out;
  if (zero_.at(query)) return out;
  const std::size_t limit = causal_corpus ? causal_corpus->index_of(query) : 0;
  const auto q = group->unit.row(qrow);
  out.reserve(group->ids.size());
  for (std::size_t m = 0; m < group->ids.size(); ++m) {
    const ReportId id = group->ids[m];
    if (id == query || zero_.at(id)) continue;
    if (causal_corpus && causal_corpus->index_of(id) >= limit) continue;
    const double sim = std::clamp(group->unit.row(static_cast<Eigen::Index>(m)).dot(q), -1.0, 1.0);
    out.push_back({id, sim});
  }
  return out;
}

namespace {

std::vector<Candidate> ranked_above(std::vector<Candidate> all, double delta) {
  std::erase_if(all, [delta](const Candidate& c) { return !(c.similarity > delta); });
  std::sort(all.begin(), all.end(), ranks_before);
  return all;
}

std::vector<Candidate> ranked_top(std::vector<Candidate> all, std::size_t k) {
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranks_before);
  all.resize(k);
  return all;
}

}  // namespace

DetectionResult detect_threshold(const SimilarityIndex& index, ReportId query, double delta,
                                 const Corpus* causal_corpus) {
  DetectionResult r;
  r.query = query;
  r.candidates = ranked_above(index.scores(query, causal_corpus), delta);
  r.predicted_duplicate = !r.candidates.empty();
  return r;
}

std::vector<Candidate> detect_topk(const SimilarityIndex& index, ReportId query, std::size_t k,
                                   const Corpus* causal_corpus) {
  return ranked_top(index.scores(query, causal_corpus), k);
}

QueryOutcome score_query(const SimilarityIndex& index, ReportId query, const DuplicateGraph& truth, double min_delta,
                         std::size_t max_k, const Corpus* causal_corpus) {
  QueryOutcome o;
  o.query = query;
  o.group = index.partition().group_of(query);
  o.zero_vector = index.is_zero(query);
  o.ranking.query = query;
  std::vector<Candidate> all = index.scores(query, causal_corpus);
  for (const auto& rel : all) {
    if (!truth.are_partners(query, rel.id)) continue;
    std::size_t ahead = 0;
    for (const auto& c : all) ahead += ranks_before(c, rel) ? 1 : 0;
    o.ranking.relevant_ranks.push_back(ahead + 1);
  }
  std::sort(o.ranking.relevant_ranks.begin(), o.ranking.relevant_ranks.end());
  o.above = ranked_above(all, min_delta);
  o.top = ranked_top(std::move(all), max_k);
  return o;
}

std::vector<QueryOutcome> score_queries(const SimilarityIndex& index, const std::vector<ReportId>& queries,
                                        const DuplicateGraph& truth, double min_delta, std::size_t max_k,
                                        const Corpus* causal_corpus) {
  std::vector<QueryOutcome> out(queries.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                           static_cast<unsigned>((queries.size() + 63) / 64)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < queries.size();) {
      try {
        out[i] = score_query(index, queries[i], truth, min_delta, max_k, causal_corpus);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = queries.size();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Outcome classify_outcome(const QueryOutcome& outcome, double delta, const DuplicateGraph& truth) {
  if (!truth.contains(outcome.query)) throw MissingGroundTruth(outcome.query);
  const bool duplicate = truth.has_partners(outcome.query);
  bool any = false, hit = false;
  for (const auto& c : outcome.above) {
    if (!(c.similarity > delta)) break;
    any = true;
    if (truth.are_partners(outcome.query, c.id)) {
      hit = true;
      break;
    }
  }
  if (duplicate) return hit ? Outcome::kTP : Outcome::kFN;
  return any ? Outcome::kFP : Outcome::kTN;
}

namespace {

void tally(ConfusionCounts& c, Outcome o) {
  switch (o) {
    case Outcome::kTP:
      ++c.tp;
      break;
    case Outcome::kTN:
      ++c.tn;
      break;
    case Outcome::kFP:
      ++c.fp;
      break;
    case Outcome::kFN:
      ++c.fn;
      break;
  }
}

bool predicted_duplicate(const QueryOutcome& o, double delta) {
  return !o.above.empty() && o.above.front().similarity > delta;
}

template <typename Map>
nlohmann::ordered_json keyed(const Map& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

void fill_rank_metrics(EvalReport& report, const std::vector<QueryOutcome>& outcomes,
                       const std::vector<std::size_t>& k_list) {
  std::vector<QueryRanking> rankings;
  rankings.reserve(outcomes.size());
  for (const auto& o : outcomes) rankings.push_back(o.ranking);
  report.topk_eligible = eligible_count(rankings);
  report.topk_excluded = rankings.size() - report.topk_eligible;
  report.recall_at_k.clear();
  report.precision_at_k.clear();
  report.mean_average_precision.reset();
  if (report.topk_eligible == 0 || k_list.empty()) return;
  for (std::size_t k : k_list) {
    report.recall_at_k[k] = recall_rate_at_k(rankings, k);
    report.precision_at_k[k] = precision_rate_at_k(rankings, k);
  }
  report.mean_average_precision = mean_average_precision(rankings);
}

EvalReport evaluate_threshold_run(const std::vector<QueryOutcome>& outcomes, double delta,
                                  const DuplicateGraph& truth, const std::vector<std::size_t>& k_list) {
  if (outcomes.empty()) throw UndefinedMetric("accuracy (no evaluated queries)");
  EvalReport r;
  r.delta = delta;
  r.queries = outcomes.size();
  std::map<std::string, std::pair<ConfusionCounts, std::size_t>> per_group;
  std::size_t binary_correct = 0;
  for (const auto& o : outcomes) {
    const Outcome c = classify_outcome(o, delta, truth);
    tally(r.counts, c);
    auto& [gc, gbin] = per_group[o.group];
    tally(gc, c);
    const bool same = predicted_duplicate(o, delta) == truth.has_partners(o.query);
    binary_correct += same;
    gbin += same;
    r.zero_vector_queries += o.zero_vector;
  }
  const BinaryMetrics m = confusion_metrics(r.counts);
  r.accuracy = m.accuracy;
  r.binary_accuracy = static_cast<double>(binary_correct) / static_cast<double>(r.queries);
  r.precision = m.precision.value_or(0.0);
  r.recall = m.recall.value_or(0.0);
  r.f1 = f1_score(r.precision, r.recall);
  if (!m.precision) r.undefined_metrics.push_back("precision");
  if (!m.recall) r.undefined_metrics.push_back("recall");
  for (const auto& [key, value] : per_group) {
    const auto& [gc, gbin] = value;
    r.groups.push_back({key, gc, static_cast<double>(gc.tp + gc.tn) / static_cast<double>(gc.total()),
                        static_cast<double>(gbin) / static_cast<double>(gc.total())});
  }
  fill_rank_metrics(r, outcomes, k_list);
  return r;
}

std::vector<EvalReport> sweep_thresholds(const std::vector<QueryOutcome>& outcomes, const std::vector<double>& deltas,
                                         const DuplicateGraph& truth, const std::vector<std::size_t>& k_list) {
  std::vector<EvalReport> table;
  table.reserve(deltas.size());
  for (double d : deltas) table.push_back(evaluate_threshold_run(outcomes, d, truth, k_list));
  return table;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["delta"] = delta;
  j["queries"] = queries;
  j["zero_vector_queries"] = zero_vector_queries;
  j["confusion"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}};
  j["accuracy"] = accuracy;
  j["binary_accuracy"] = binary_accuracy;
  j["recall"] = recall;
  j["precision"] = precision;
  j["f1"] = f1;
  j["undefined_metrics"] = undefined_metrics;
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : groups) {
    nlohmann::ordered_json gj;
    gj["group"] = g.group;
    gj["queries"] = g.counts.total();
    gj["confusion"] = {{"tp", g.counts.tp}, {"fp", g.counts.fp}, {"fn", g.counts.fn}, {"tn", g.counts.tn}};
    gj["accuracy"] = g.accuracy;
    gj["binary_accuracy"] = g.binary_accuracy;
    j["groups"].push_back(std::move(gj));
  }
  nlohmann::ordered_json topk;
  topk["eligible_queries"] = topk_eligible;
  topk["excluded_queries"] = topk_excluded;
  topk["recall_at_k"] = keyed(recall_at_k);
  topk["precision_at_k"] = keyed(precision_at_k);
  topk["mean_average_precision"] =
      mean_average_precision ? nlohmann::ordered_json(*mean_average_precision) : nlohmann::ordered_json(nullptr);
  j["topk"] = std::move(topk);
  j["metadata"] = metadata;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.delta = j.at("delta").get<double>();
    r.queries = j.at("queries").get<std::size_t>();
    r.zero_vector_queries = j.at("zero_vector_queries").get<std::size_t>();
    const auto& c = j.at("confusion");
    r.counts = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("fn").get<std::size_t>(),
                c.at("tn").get<std::size_t>()};
    r.accuracy = j.at("accuracy").get<double>();
    r.binary_accuracy = j.at("binary_accuracy").get<double>();
    r.recall = j.at("recall").get<double>();
    r.precision = j.at("precision").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.undefined_metrics = j.at("undefined_metrics").get<std::vector<std::string>>();
    for (const auto& gj : j.at("groups")) {
      GroupBreakdown g;
      g.group = gj.at("group").get<std::string>();
      const auto& gc = gj.at("confusion");
      g.counts = {gc.at("tp").get<std::size_t>(), gc.at("fp").get<std::size_t>(), gc.at("fn").get<std::size_t>(),
                  gc.at("tn").get<std::size_t>()};
      g.accuracy = gj.at("accuracy").get<double>();
      g.binary_accuracy = gj.at("binary_accuracy").get<double>();
      r.groups.push_back(std::move(g));
    }
    const auto& t = j.at("topk");
    r.topk_eligible = t.at("eligible_queries").get<std::size_t>();
    r.topk_excluded = t.at("excluded_queries").get<std::size_t>();
    for (const auto& [k, v] : t.at("recall_at_k").items()) r.recall_at_k[std::stoul(k)] = v.get<double>();
    for (const auto& [k, v] : t.at("precision_at_k").items()) r.precision_at_k[std::stoul(k)] = v.get<double>();
    if (!t.at("mean_average_precision").is_null())
      r.mean_average_precision = t.at("mean_average_precision").get<double>();
    r.metadata = nlohmann::ordered_json::parse(j.at("metadata").dump());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "report", e.what());
  }
}

}  // namespace dupdetect
