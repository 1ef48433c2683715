#pragma once

// Brute-force re-implementation of the evaluation protocol, written from the
// metric definitions only. Shares no code with src/ beyond plain data types.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dupdetect/corpus.hpp"
#include "dupdetect/engine.hpp"
#include "dupdetect/rng.hpp"

namespace testing::oracle {

using dupdetect::ReportId;

struct World {
  dupdetect::Corpus corpus;
  dupdetect::EmbeddingSet embeddings;
  dupdetect::Partition partition;
};

// Small integer embeddings so exact duplicates, exact ties and zero rows occur.
inline World random_world(dupdetect::Rng& rng) {
  World w;
  const int n = 3 + static_cast<int>(rng.below(22));
  const int dim = 2 + static_cast<int>(rng.below(3));
  const int groups = 1 + static_cast<int>(rng.below(3));
  std::vector<dupdetect::BugReport> reports;
  w.embeddings.vectors.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    dupdetect::BugReport r;
    r.id = 10 + 7 * i;
    r.created_at = dupdetect::Timestamp(std::chrono::seconds(1'000'000 + 60 * i));
    r.summary = "r" + std::to_string(i);
    r.component = "C";
    r.product = "P";
    r.status = "NEW";
    if (i > 0 && rng.uniform() < 0.45) {
      // Occasionally dangling (points at an id that does not exist).
      r.dup_of = rng.uniform() < 0.05 ? ReportId{3} : reports[rng.below(static_cast<std::uint64_t>(i))].id;
      r.is_duplicate = true;
    }
    reports.push_back(r);
    w.embeddings.ids.push_back(r.id);
    const bool zero = rng.uniform() < 0.08;
    const bool copy = i > 0 && rng.uniform() < 0.2;
    for (int j = 0; j < dim; ++j) {
      if (zero) w.embeddings.vectors(i, j) = 0;
      else if (copy) w.embeddings.vectors(i, j) = w.embeddings.vectors(i - 1, j);
      else w.embeddings.vectors(i, j) = static_cast<double>(static_cast<int>(rng.below(5)) - 2);
    }
  }
  w.corpus = dupdetect::Corpus(reports);
  w.partition.strategy = dupdetect::PartitionStrategy::kNone;
  for (int i = 0; i < n; ++i)
    w.partition.groups["g" + std::to_string(rng.below(static_cast<std::uint64_t>(groups)))].push_back(reports[static_cast<std::size_t>(i)].id);
  return w;
}

// Connected components of the undirected dup_of graph, dangling links ignored.
inline std::map<ReportId, std::set<ReportId>> partner_sets(const dupdetect::Corpus& corpus) {
  std::map<ReportId, std::set<ReportId>> adj;
  for (const auto& r : corpus.reports()) {
    adj[r.id];
    if (r.dup_of && corpus.find(*r.dup_of)) {
      adj[r.id].insert(*r.dup_of);
      adj[*r.dup_of].insert(r.id);
    }
  }
  std::map<ReportId, std::set<ReportId>> partners;
  for (const auto& [start, _] : adj) {
    std::set<ReportId> seen{start};
    std::vector<ReportId> stack{start};
    while (!stack.empty()) {
      const ReportId x = stack.back();
      stack.pop_back();
      for (ReportId y : adj[x])
        if (seen.insert(y).second) stack.push_back(y);
    }
    seen.erase(start);
    partners[start] = seen;
  }
  return partners;
}

struct Expected {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0, binary_accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::map<std::size_t, double> recall_at_k, precision_at_k;
  double map = 0;
  std::size_t eligible = 0;
};

// `pools[q]` holds the raw (id, similarity) scores of query q's searched pool.
inline Expected evaluate(const std::map<ReportId, std::vector<std::pair<ReportId, double>>>& pools,
                         const std::map<ReportId, std::set<ReportId>>& partners, double delta,
                         const std::vector<std::size_t>& ks) {
  Expected e;
  std::size_t binary_hits = 0;
  double map_sum = 0;
  std::map<std::size_t, double> rsum, psum;
  for (const auto& [q, scores] : pools) {
    auto ranked = scores;
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const auto& mine = partners.at(q);
    const bool duplicate = !mine.empty();
    bool any = false, hit = false;
    for (const auto& [id, sim] : ranked) {
      if (sim > delta) {
        any = true;
        hit = hit || mine.contains(id);
      }
    }
    if (duplicate && hit) ++e.tp;
    else if (duplicate) ++e.fn;
    else if (any) ++e.fp;
    else ++e.tn;
    binary_hits += any == duplicate;

    std::size_t relevant = 0;
    for (const auto& [id, _] : ranked) relevant += mine.contains(id);
    if (relevant == 0) continue;
    ++e.eligible;
    for (std::size_t k : ks) {
      std::size_t found = 0;
      for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) found += mine.contains(ranked[i].first);
      rsum[k] += static_cast<double>(found) / static_cast<double>(relevant);
      psum[k] += static_cast<double>(found) / static_cast<double>(k);
    }
    double ap = 0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (!mine.contains(ranked[i].first)) continue;
      ++seen;
      ap += static_cast<double>(seen) / static_cast<double>(i + 1);
    }
    map_sum += ap / static_cast<double>(relevant);
  }
  const double n = static_cast<double>(pools.size());
  e.accuracy = static_cast<double>(e.tp + e.tn) / n;
  e.binary_accuracy = static_cast<double>(binary_hits) / n;
  e.precision = e.tp + e.fp ? static_cast<double>(e.tp) / static_cast<double>(e.tp + e.fp) : 0.0;
  e.recall = e.tp + e.fn ? static_cast<double>(e.tp) / static_cast<double>(e.tp + e.fn) : 0.0;
  e.f1 = e.precision + e.recall > 0 ? 2 * e.precision * e.recall / (e.precision + e.recall) : 0.0;
  if (e.eligible) {
    for (std::size_t k : ks) {
      e.recall_at_k[k] = rsum[k] / static_cast<double>(e.eligible);
      e.precision_at_k[k] = psum[k] / static_cast<double>(e.eligible);
    }
    e.map = map_sum / static_cast<double>(e.eligible);
  }
  return e;
}

// Per-class precision/recall/F1 for arbitrary labels, straight from the
// prediction list; classes without predictions (or without truth) stay NaN.
struct ClassRow {
  double precision = NAN, recall = NAN, f1 = NAN;
  std::size_t support = 0;
};

inline std::vector<ClassRow> per_class(const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
  std::vector<ClassRow> rows(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    std::size_t predicted = 0, actual = 0, both = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      predicted += pred[i] == c;
      actual += truth[i] == c;
      both += pred[i] == c && truth[i] == c;
    }
    auto& r = rows[static_cast<std::size_t>(c)];
    r.support = actual;
    if (predicted) r.precision = static_cast<double>(both) / static_cast<double>(predicted);
    if (actual) r.recall = static_cast<double>(both) / static_cast<double>(actual);
    if (!std::isnan(r.precision) && !std::isnan(r.recall))
      r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  }
  return rows;
}

// Mean over classes where the value is defined; NaN when none is.
inline double macro(const std::vector<ClassRow>& rows, double ClassRow::*member) {
  double sum = 0;
  int n = 0;
  for (const auto& r : rows)
    if (!std::isnan(r.*member)) sum += r.*member, ++n;
  return n ? sum / n : NAN;
}

// Runs the library's scoring and evaluation on `w` and compares everything
// against the brute-force values. Returns a description of each mismatch.
inline std::vector<std::string> check_world(const World& w, const std::vector<double>& deltas,
                                            const std::vector<std::size_t>& ks, bool causal = false,
                                            double tol = 1e-12) {
  std::vector<std::string> problems;
  auto fail = [&](const std::string& what) { problems.push_back(what); };
  const auto partners = partner_sets(w.corpus);
  const auto truth = dupdetect::resolve_masters(w.corpus);
  const dupdetect::SimilarityIndex index(w.embeddings, w.partition);
  const dupdetect::Corpus* order = causal ? &w.corpus : nullptr;

  std::map<ReportId, Eigen::Index> row;
  for (std::size_t i = 0; i < w.embeddings.ids.size(); ++i) row[w.embeddings.ids[i]] = static_cast<Eigen::Index>(i);
  auto is_zero = [&](ReportId id) { return w.embeddings.vectors.row(row.at(id)).squaredNorm() == 0.0; };

  std::map<ReportId, std::vector<std::pair<ReportId, double>>> pools;
  for (const auto& [key, members] : w.partition.groups) {
    for (ReportId q : members) {
      auto& pool = pools[q];
      const auto got = index.scores(q, order);
      std::set<ReportId> expected_ids;
      if (!is_zero(q))
        for (ReportId c : members)
          if (c != q && !is_zero(c) && (!causal || w.corpus.index_of(c) < w.corpus.index_of(q))) expected_ids.insert(c);
      std::set<ReportId> got_ids;
      for (const auto& c : got) {
        got_ids.insert(c.id);
        const auto a = w.embeddings.vectors.row(row.at(q));
        const auto b = w.embeddings.vectors.row(row.at(c.id));
        const double cosine = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
        if (std::abs(cosine - c.similarity) > tol) fail("similarity of " + std::to_string(q) + "/" + std::to_string(c.id));
        pool.emplace_back(c.id, c.similarity);
      }
      if (got_ids != expected_ids) fail("pool of " + std::to_string(q));
    }
  }

  const auto outcomes = dupdetect::score_queries(index, w.corpus.ids(), truth,
                                                 *std::min_element(deltas.begin(), deltas.end()),
                                                 *std::max_element(ks.begin(), ks.end()), order);
  for (double delta : deltas) {
    const auto want = evaluate(pools, partners, delta, ks);
    const auto got = dupdetect::evaluate_threshold_run(outcomes, delta, truth, ks);
    const std::string at = " at delta " + std::to_string(delta);
    auto near = [&](double a, double b, const std::string& what) {
      if (std::abs(a - b) > tol) fail(what + at + ": " + std::to_string(a) + " vs " + std::to_string(b));
    };
    if (got.counts.tp != want.tp || got.counts.fp != want.fp || got.counts.fn != want.fn || got.counts.tn != want.tn)
      fail("confusion counts" + at);
    near(got.accuracy, want.accuracy, "accuracy");
    near(got.binary_accuracy, want.binary_accuracy, "binary accuracy");
    near(got.precision, want.precision, "precision");
    near(got.recall, want.recall, "recall");
    near(got.f1, want.f1, "f1");
    if (got.topk_eligible != want.eligible) fail("eligible count" + at);
    if (want.eligible == 0) {
      if (!got.recall_at_k.empty() || got.mean_average_precision) fail("rank metrics without eligible queries" + at);
      continue;
    }
    for (std::size_t k : ks) {
      near(got.recall_at_k.at(k), want.recall_at_k.at(k), "recall@" + std::to_string(k));
      near(got.precision_at_k.at(k), want.precision_at_k.at(k), "precision@" + std::to_string(k));
    }
    if (!got.mean_average_precision) fail("missing MAP" + at);
    else near(*got.mean_average_precision, want.map, "MAP");
  }
  return problems;
}

// Random binary label vectors against the library's classification report.
inline std::vector<std::string> check_labels(dupdetect::Rng& rng, double tol = 1e-12) {
  std::vector<std::string> problems;
  const std::size_t n = 1 + rng.below(40);
  const double bias = rng.uniform();
  std::vector<int> truth(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = rng.uniform() < bias;
    pred[i] = rng.uniform() < 0.7 ? truth[i] : 1 - truth[i];
  }
  const auto rows = per_class(truth, pred, 2);
  const auto got = dupdetect::classification_report(truth, pred);
  auto same = [&](const std::optional<double>& g, double want, const std::string& what) {
    if (std::isnan(want) != !g.has_value() || (g && std::abs(*g - want) > tol)) problems.push_back(what);
  };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += truth[i] == pred[i];
  if (std::abs(got.accuracy - static_cast<double>(correct) / static_cast<double>(n)) > tol) problems.push_back("accuracy");
  for (int c = 0; c < 2; ++c) {
    const auto& g = got.classes.at(static_cast<std::size_t>(c));
    const auto& r = rows[static_cast<std::size_t>(c)];
    same(g.precision, r.precision, g.label + " precision");
    same(g.recall, r.recall, g.label + " recall");
    same(g.f1, r.f1, g.label + " f1");
    if (g.support != r.support) problems.push_back(g.label + " support");
  }
  same(got.macro.precision, macro(rows, &ClassRow::precision), "macro precision");
  same(got.macro.recall, macro(rows, &ClassRow::recall), "macro recall");
  same(got.macro.f1, macro(rows, &ClassRow::f1), "macro f1");
  auto weighted = [&](double ClassRow::*member) {
    double sum = 0, weight = 0;
    for (const auto& r : rows)
      if (!std::isnan(r.*member)) sum += r.*member * static_cast<double>(r.support), weight += static_cast<double>(r.support);
    return weight > 0 ? sum / weight : NAN;
  };
  same(got.weighted.precision, weighted(&ClassRow::precision), "weighted precision");
  same(got.weighted.recall, weighted(&ClassRow::recall), "weighted recall");
  same(got.weighted.f1, weighted(&ClassRow::f1), "weighted f1");
  return problems;
}

}  // namespace testing::oracle
