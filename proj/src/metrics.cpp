#include "dupdetect/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "dupdetect/error.hpp"

namespace dupdetect {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> f1_of(const std::optional<double>& p, const std::optional<double>& r) {
  if (!p || !r) return std::nullopt;
  return f1_score(*p, *r);
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::ordered_json class_json(const ClassMetrics& c) {
  nlohmann::ordered_json j;
  j["label"] = c.label;
  j["precision"] = opt_json(c.precision);
  j["recall"] = opt_json(c.recall);
  j["f1"] = opt_json(c.f1);
  j["support"] = c.support;
  return j;
}

ClassMetrics class_from(const nlohmann::json& j) {
  ClassMetrics c;
  c.label = j.at("label").get<std::string>();
  c.precision = opt_from(j.at("precision"));
  c.recall = opt_from(j.at("recall"));
  c.f1 = opt_from(j.at("f1"));
  c.support = j.at("support").get<std::size_t>();
  return c;
}

std::vector<const QueryRanking*> eligible(const std::vector<QueryRanking>& queries) {
  std::vector<const QueryRanking*> out;
  for (const auto& q : queries)
    if (!q.relevant_ranks.empty()) out.push_back(&q);
  if (out.empty()) throw NoEligibleQueries();
  return out;
}

std::size_t hits_at(const QueryRanking& q, std::size_t k) {
  return static_cast<std::size_t>(std::upper_bound(q.relevant_ranks.begin(), q.relevant_ranks.end(), k) -
                                  q.relevant_ranks.begin());
}

}  // namespace

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

double require_metric(const std::optional<double>& value, const std::string& what) {
  if (!value) throw UndefinedMetric(what);
  return *value;
}

BinaryMetrics confusion_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw UndefinedMetric("accuracy (no evaluated queries)");
  BinaryMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = f1_of(m.precision, m.recall);
  return m;
}

MacroMetrics macro_metrics(const std::vector<ClassCounts>& classes) {
  MacroMetrics out;
  double sp = 0, sr = 0, sf = 0;
  std::size_t np = 0, nr = 0, nf = 0;
  for (const auto& c : classes) {
    ClassMetrics m;
    m.label = c.label;
    m.support = c.support();
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.f1 = f1_of(m.precision, m.recall);
    if (m.precision) sp += *m.precision, ++np;
    else out.undefined.push_back(c.label + ":precision");
    if (m.recall) sr += *m.recall, ++nr;
    else out.undefined.push_back(c.label + ":recall");
    if (m.f1) sf += *m.f1, ++nf;
    else out.undefined.push_back(c.label + ":f1");
    out.classes.push_back(std::move(m));
  }
  if (np) out.precision = sp / static_cast<double>(np);
  if (nr) out.recall = sr / static_cast<double>(nr);
  if (nf) out.f1 = sf / static_cast<double>(nf);
  return out;
}

ClassificationReport classification_report(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw ShapeMismatch(std::to_string(truth.size()) + " labels vs " + std::to_string(predicted.size()) + " predictions");
  if (truth.empty()) throw UndefinedMetric("accuracy (no predictions)");
  std::vector<ClassCounts> counts{{"non-duplicate", 0, 0, 0}, {"duplicate", 0, 0, 0}};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1))
      throw DataError("label at position " + std::to_string(i) + " is not 0 or 1");
    if (t == p) {
      ++counts[static_cast<std::size_t>(t)].tp;
      ++correct;
    } else {
      ++counts[static_cast<std::size_t>(p)].fp;
      ++counts[static_cast<std::size_t>(t)].fn;
    }
  }
  const MacroMetrics macro = macro_metrics(counts);
  ClassificationReport r;
  r.classes = macro.classes;
  r.undefined = macro.undefined;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  r.macro = {"macro avg", macro.precision, macro.recall, macro.f1, truth.size()};

  // Support-weighted means over classes where the metric is defined.
  auto weighted = [&](auto member) -> std::optional<double> {
    double sum = 0, weight = 0;
    for (const auto& c : r.classes)
      if (const auto& v = c.*member) sum += *v * static_cast<double>(c.support), weight += static_cast<double>(c.support);
    if (weight == 0) return std::nullopt;
    return sum / weight;
  };
  r.weighted = {"weighted avg", weighted(&ClassMetrics::precision), weighted(&ClassMetrics::recall),
                weighted(&ClassMetrics::f1), truth.size()};
  return r;
}

nlohmann::ordered_json ClassificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes) j["classes"].push_back(class_json(c));
  j["accuracy"] = accuracy;
  j["macro_avg"] = class_json(macro);
  j["weighted_avg"] = class_json(weighted);
  j["undefined"] = undefined;
  return j;
}

ClassificationReport ClassificationReport::from_json(const nlohmann::json& j) {
  ClassificationReport r;
  for (const auto& c : j.at("classes")) r.classes.push_back(class_from(c));
  r.accuracy = j.at("accuracy").get<double>();
  r.macro = class_from(j.at("macro_avg"));
  r.weighted = class_from(j.at("weighted_avg"));
  r.undefined = j.at("undefined").get<std::vector<std::string>>();
  return r;
}

std::string ClassificationReport::to_text() const {
  std::string out;
  char buf[160];
  auto cell = [](const std::optional<double>& v) {
    char b[16];
    if (!v) return std::string("       -");
    std::snprintf(b, sizeof b, "%8.2f", *v);
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf, "%-14s %9s %8s %8s %9s\n", "", "precision", "recall", "f1-score", "support");
  out += buf;
  out += '\n';
  for (const auto& c : classes) {
    std::snprintf(buf, sizeof buf, "%-14s %s %s %s %9zu\n", c.label.c_str(), (" " + cell(c.precision)).c_str(),
                  cell(c.recall).c_str(), cell(c.f1).c_str(), c.support);
    out += buf;
  }
  out += '\n';
  std::snprintf(buf, sizeof buf, "%-14s %9s %8s %8.2f %9zu\n", "accuracy", "", "", accuracy, macro.support);
  out += buf;
  for (const auto* c : {&macro, &weighted}) {
    std::snprintf(buf, sizeof buf, "%-14s %s %s %s %9zu\n", c->label.c_str(), (" " + cell(c->precision)).c_str(),
                  cell(c->recall).c_str(), cell(c->f1).c_str(), c->support);
    out += buf;
  }
  return out;
}

std::size_t eligible_count(const std::vector<QueryRanking>& queries) {
  return static_cast<std::size_t>(
      std::count_if(queries.begin(), queries.end(), [](const QueryRanking& q) { return !q.relevant_ranks.empty(); }));
}

double recall_rate_at_k(const std::vector<QueryRanking>& queries, std::size_t k) {
  const auto qs = eligible(queries);
  double sum = 0;
  for (const auto* q : qs) sum += static_cast<double>(hits_at(*q, k)) / static_cast<double>(q->relevant_ranks.size());
  return sum / static_cast<double>(qs.size());
}

double precision_rate_at_k(const std::vector<QueryRanking>& queries, std::size_t k) {
  if (k == 0) throw ConfigError("k must be positive");
  const auto qs = eligible(queries);
  double sum = 0;
  for (const auto* q : qs) sum += static_cast<double>(hits_at(*q, k)) / static_cast<double>(k);
  return sum / static_cast<double>(qs.size());
}

double average_precision(const QueryRanking& query) {
  if (query.relevant_ranks.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < query.relevant_ranks.size(); ++i)
    sum += static_cast<double>(i + 1) / static_cast<double>(query.relevant_ranks[i]);
  return sum / static_cast<double>(query.relevant_ranks.size());
}

double mean_average_precision(const std::vector<QueryRanking>& queries) {
  const auto qs = eligible(queries);
  double sum = 0;
  for (const auto* q : qs) sum += average_precision(*q);
  return sum / static_cast<double>(qs.size());
}

}  // namespace dupdetect
