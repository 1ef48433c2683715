#include "dupdetect/lda.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dupdetect/error.hpp"
#include "dupdetect/rng.hpp"

namespace dupdetect {

namespace {

int sample_index(const Eigen::VectorXd& weights, Rng& rng) {
  const double total = weights.sum();
  const double target = rng.uniform() * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

std::vector<std::vector<int>> expand_rows(const DocTermMatrix& dtm) {
  std::vector<std::vector<int>> docs(static_cast<std::size_t>(dtm.counts.rows()));
  for (Eigen::Index d = 0; d < dtm.counts.outerSize(); ++d)
    for (CountMatrix::InnerIterator it(dtm.counts, d); it; ++it)
      docs[static_cast<std::size_t>(d)].insert(docs[static_cast<std::size_t>(d)].end(),
                                               static_cast<std::size_t>(it.value()), static_cast<int>(it.col()));
  return docs;
}

}  // namespace

class GibbsSampler {
 public:
  GibbsSampler(TopicModel& model, Rng& rng) : m_(model), rng_(rng), weights_(model.k()) {}

  void initialize() {
    const int k = m_.k();
    m_.z_.resize(m_.docs_.size());
    for (std::size_t d = 0; d < m_.docs_.size(); ++d) {
      auto& zd = m_.z_[d];
      zd.resize(m_.docs_[d].size());
      for (std::size_t i = 0; i < zd.size(); ++i) {
        const int topic = static_cast<int>(rng_.below(static_cast<std::uint64_t>(k)));
        zd[i] = topic;
        add(d, m_.docs_[d][i], topic, +1);
      }
    }
  }

  void sweep() {
    const double v_beta = static_cast<double>(m_.vocab_size()) * m_.beta_;
    for (std::size_t d = 0; d < m_.docs_.size(); ++d) {
      const auto& words = m_.docs_[d];
      auto& zd = m_.z_[d];
      for (std::size_t i = 0; i < words.size(); ++i) {
        const int w = words[i];
        add(d, w, zd[i], -1);
        for (int t = 0; t < m_.k(); ++t) {
          weights_[t] = (m_.n_dk_(static_cast<Eigen::Index>(d), t) + m_.alpha_[t]) * (m_.n_kw_(t, w) + m_.beta_) /
                        (m_.n_k_[t] + v_beta);
        }
        zd[i] = sample_index(weights_, rng_);
        add(d, w, zd[i], +1);
      }
    }
  }

 private:
  void add(std::size_t d, int w, int topic, int delta) {
    m_.n_dk_(static_cast<Eigen::Index>(d), topic) += delta;
    m_.n_kw_(topic, w) += delta;
    m_.n_k_[topic] += delta;
  }

  TopicModel& m_;
  Rng& rng_;
  Eigen::VectorXd weights_;
};

TopicModel TopicModel::from_assignments(std::vector<std::vector<int>> docs, std::vector<std::vector<int>> z,
                                        Eigen::VectorXd alpha, double beta, Eigen::Index vocab_size) {
  if (docs.size() != z.size()) throw ShapeMismatch("documents vs assignments");
  TopicModel m;
  m.alpha_ = std::move(alpha);
  m.beta_ = beta;
  const auto k = m.alpha_.size();
  m.n_dk_ = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(docs.size()), k);
  m.n_kw_ = Eigen::MatrixXi::Zero(k, vocab_size);
  m.n_k_ = Eigen::VectorXi::Zero(k);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].size() != z[d].size()) throw ShapeMismatch("document " + std::to_string(d) + " assignments");
    for (std::size_t i = 0; i < docs[d].size(); ++i) {
      const int w = docs[d][i];
      const int t = z[d][i];
      if (w < 0 || w >= vocab_size) throw IndexError("word " + std::to_string(w));
      if (t < 0 || t >= k) throw IndexError("topic " + std::to_string(t));
      ++m.n_dk_(static_cast<Eigen::Index>(d), t);
      ++m.n_kw_(t, w);
      ++m.n_k_[t];
    }
  }
  m.doc_ids_.resize(docs.size());
  std::iota(m.doc_ids_.begin(), m.doc_ids_.end(), ReportId{0});
  m.docs_ = std::move(docs);
  m.z_ = std::move(z);
  return m;
}

void TopicModel::check_invariants() const {
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    const auto row_sum = n_dk_.row(static_cast<Eigen::Index>(d)).sum();
    if (row_sum != static_cast<int>(docs_[d].size()))
      throw InvariantError("sum_k n_dk != length of document " + std::to_string(d));
    for (int t : z_[d])
      if (t < 0 || t >= k()) throw InvariantError("assignment outside [0, k) in document " + std::to_string(d));
  }
  if (n_kw_.rowwise().sum() != n_k_) throw InvariantError("sum_w n_kw != n_k");
}

Eigen::VectorXd gibbs_conditional(const TopicModel& model, std::size_t doc, std::size_t position) {
  if (doc >= model.num_docs()) throw IndexError("document " + std::to_string(doc));
  const auto& words = model.documents()[doc];
  if (position >= words.size()) throw IndexError("position " + std::to_string(position));
  const int w = words[position];
  const int current = model.assignments()[doc][position];

  Eigen::VectorXi n_dk = model.doc_topic().row(static_cast<Eigen::Index>(doc)).transpose();
  Eigen::VectorXi n_kw = model.topic_word().col(w);
  Eigen::VectorXi n_k = model.topic_totals();
  --n_dk[current];
  --n_kw[current];
  --n_k[current];
  Eigen::VectorXd weights = topic_weights<double>(n_dk, n_kw, n_k, model.alpha(), model.beta(), model.vocab_size());
  return weights / weights.sum();
}

TopicModel fit_lda(const DocTermMatrix& dtm, const LdaOptions& options, const SweepObserver& observer) {
  if (options.k < 2) throw InvalidK(options.k);
  if (dtm.counts.rows() == 0 || dtm.counts.cols() == 0 || dtm.counts.nonZeros() == 0) throw EmptyMatrix();
  if (options.iterations < 0) throw ConfigError("iterations must be non-negative");
  const double alpha = options.alpha.value_or(50.0 / options.k);

  TopicModel model;
  model.alpha_ = Eigen::VectorXd::Constant(options.k, alpha);
  model.beta_ = options.beta;
  model.n_dk_ = Eigen::MatrixXi::Zero(dtm.counts.rows(), options.k);
  model.n_kw_ = Eigen::MatrixXi::Zero(options.k, dtm.counts.cols());
  model.n_k_ = Eigen::VectorXi::Zero(options.k);
  model.docs_ = expand_rows(dtm);
  model.doc_ids_ = dtm.doc_ids;
  model.seed_ = options.seed;
  model.iterations_ = options.iterations;

  Rng rng(options.seed);
  GibbsSampler sampler(model, rng);
  sampler.initialize();
  for (int it = 1; it <= options.iterations; ++it) {
    sampler.sweep();
    if (observer) observer(model, it);
  }
  return model;
}

double log_likelihood(const TopicModel& model) {
  const int k = model.k();
  const auto v = static_cast<double>(model.vocab_size());
  const double beta = model.beta();
  double ll = k * (std::lgamma(v * beta) - v * std::lgamma(beta));
  for (int t = 0; t < k; ++t) {
    for (Eigen::Index w = 0; w < model.vocab_size(); ++w) ll += std::lgamma(model.topic_word()(t, w) + beta);
    ll -= std::lgamma(model.topic_totals()[t] + v * beta);
  }
  const double alpha_sum = model.alpha().sum();
  double lg_alpha = 0.0;
  for (int t = 0; t < k; ++t) lg_alpha += std::lgamma(model.alpha()[t]);
  for (std::size_t d = 0; d < model.num_docs(); ++d) {
    ll += std::lgamma(alpha_sum) - lg_alpha;
    for (int t = 0; t < k; ++t)
      ll += std::lgamma(model.doc_topic()(static_cast<Eigen::Index>(d), t) + model.alpha()[t]);
    ll -= std::lgamma(static_cast<double>(model.documents()[d].size()) + alpha_sum);
  }
  return ll;
}

namespace {

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace

int dominant_topic(const TopicModel& model, std::size_t doc) {
  if (doc >= model.num_docs()) throw IndexError("document " + std::to_string(doc));
  const Eigen::VectorXd score =
      model.doc_topic().row(static_cast<Eigen::Index>(doc)).transpose().cast<double>() + model.alpha();
  return argmax_lowest(score);
}

bool is_empty_document(const TopicModel& model, std::size_t doc) {
  if (doc >= model.num_docs()) throw IndexError("document " + std::to_string(doc));
  return model.documents()[doc].empty();
}

int infer_topic(const TopicModel& model, const std::vector<int>& words, const FoldInOptions& options) {
  std::vector<int> doc;
  doc.reserve(words.size());
  for (int w : words)
    if (w >= 0 && w < model.vocab_size()) doc.push_back(w);
  if (doc.empty()) return 0;

  const int k = model.k();
  const double v_beta = static_cast<double>(model.vocab_size()) * model.beta();
  Rng rng(options.seed);
  Eigen::VectorXi n_dk = Eigen::VectorXi::Zero(k);
  std::vector<int> z(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    z[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    ++n_dk[z[i]];
  }
  // Frozen topic-word distribution for this document's words.
  Eigen::VectorXd weights(k);
  for (int it = 0; it < options.iterations; ++it) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      --n_dk[z[i]];
      for (int t = 0; t < k; ++t)
        weights[t] = (n_dk[t] + model.alpha()[t]) * (model.topic_word()(t, doc[i]) + model.beta()) /
                     (model.topic_totals()[t] + v_beta);
      z[i] = sample_index(weights, rng);
      ++n_dk[z[i]];
    }
  }
  return argmax_lowest(n_dk.cast<double>() + model.alpha());
}

int infer_topic(const TopicModel& model, const Vocabulary& vocab, const std::vector<std::string>& tokens,
                const FoldInOptions& options) {
  std::vector<int> words;
  words.reserve(tokens.size());
  for (const auto& t : tokens) {
    const int idx = vocab.index_of(t);
    if (idx >= 0) words.push_back(idx);
  }
  return infer_topic(model, words, options);
}

std::vector<WordProbability> top_words(const TopicModel& model, int topic, std::size_t n) {
  if (topic < 0 || topic >= model.k()) throw InvalidTopic(topic);
  const auto v = static_cast<std::size_t>(model.vocab_size());
  std::vector<int> order(v);
  std::iota(order.begin(), order.end(), 0);
  const auto& row = model.topic_word();
  const std::size_t take = std::min(n, v);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](int a, int b) { return row(topic, a) != row(topic, b) ? row(topic, a) > row(topic, b) : a < b; });
  const double denom = model.topic_totals()[topic] + static_cast<double>(v) * model.beta();
  std::vector<WordProbability> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({order[i], (row(topic, order[i]) + model.beta()) / denom});
  return out;
}

void save_topic_model(const TopicModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "dupdetect.topic_model.v1";
  j["k"] = model.k();
  j["alpha"] = std::vector<double>(model.alpha().data(), model.alpha().data() + model.alpha().size());
  j["beta"] = model.beta();
  j["vocab_size"] = model.vocab_size();
  j["vocab_hash"] = model.vocab_hash();
  j["seed"] = model.seed();
  j["iterations"] = model.iterations();
  auto n_kw = nlohmann::ordered_json::array();
  for (int t = 0; t < model.k(); ++t) {
    std::vector<int> row(static_cast<std::size_t>(model.vocab_size()));
    for (Eigen::Index w = 0; w < model.vocab_size(); ++w) row[static_cast<std::size_t>(w)] = model.topic_word()(t, w);
    n_kw.push_back(row);
  }
  j["n_kw"] = std::move(n_kw);
  j["n_k"] = std::vector<int>(model.topic_totals().data(), model.topic_totals().data() + model.topic_totals().size());
  auto docs = nlohmann::ordered_json::array();
  for (std::size_t d = 0; d < model.num_docs(); ++d)
    docs.push_back({{"id", model.doc_ids()[d]}, {"topic", dominant_topic(model, d)}, {"empty", is_empty_document(model, d)}});
  j["documents"] = std::move(docs);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

TopicModel load_topic_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "<file>", e.what());
  }
  TopicModel m;
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  m.alpha_ = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  m.beta_ = j.at("beta").get<double>();
  const auto rows = j.at("n_kw").get<std::vector<std::vector<int>>>();
  const auto v = j.at("vocab_size").get<Eigen::Index>();
  m.n_kw_.resize(static_cast<Eigen::Index>(rows.size()), v);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (static_cast<Eigen::Index>(rows[t].size()) != v) throw ParseError(0, "n_kw", "row length != vocab_size");
    for (Eigen::Index w = 0; w < v; ++w) m.n_kw_(static_cast<Eigen::Index>(t), w) = rows[t][static_cast<std::size_t>(w)];
  }
  m.n_k_ = m.n_kw_.rowwise().sum();
  m.n_dk_.resize(0, m.alpha_.size());
  m.vocab_hash_ = j.value("vocab_hash", "");
  m.seed_ = j.value("seed", std::uint64_t{0});
  m.iterations_ = j.value("iterations", 0);
  if (m.n_kw_.rows() != m.alpha_.size()) throw ParseError(0, "n_kw", "row count != k");
  return m;
}

}  // namespace dupdetect
