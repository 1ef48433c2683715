#include "dupdetect/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "dupdetect/error.hpp"
#include "dupdetect/rng.hpp"

namespace dupdetect {

namespace {

void check_labels(Eigen::Index rows, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(rows) != labels.size())
    throw ShapeMismatch(std::to_string(rows) + " feature rows vs " + std::to_string(labels.size()) + " labels");
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    (y ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw SingleClassTraining();
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -[y log s(z) + (1-y) log(1-s(z))] without overflow.
double bce_from_logit(double z, int y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

void FeatureConfig::validate() const {
  if (!use_text_embedding && !use_component_onehot) throw NoFeaturesEnabled();
}

int FeatureConfig::dimension(int text_dimension) const {
  return (use_text_embedding ? text_dimension : 0) +
         (use_component_onehot ? static_cast<int>(component_index.size()) : 0);
}

std::map<std::string, int> build_component_index(const Corpus& corpus, const std::vector<ReportId>& reports) {
  std::set<std::string> names;
  for (ReportId id : reports) names.insert(corpus.at(id).component);
  std::map<std::string, int> index;
  int next = 0;
  for (const auto& n : names) index.emplace(n, next++);
  return index;
}

Eigen::VectorXd build_features(const BugReport& report, const FeatureConfig& config,
                               const Eigen::Ref<const Eigen::VectorXd>& text_embedding) {
  config.validate();
  const int text_dim = static_cast<int>(text_embedding.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(config.dimension(text_dim));
  Eigen::Index offset = 0;
  if (config.use_text_embedding) {
    out.head(text_dim) = text_embedding;
    offset = text_dim;
  }
  if (config.use_component_onehot) {
    auto it = config.component_index.find(report.component);
    if (it != config.component_index.end()) out[offset + it->second] = 1.0;
  }
  return out;
}

Eigen::MatrixXd build_feature_matrix(const Corpus& corpus, const std::vector<ReportId>& ids,
                                     const FeatureConfig& config, const EmbeddingSet& embeddings) {
  config.validate();
  std::unordered_map<ReportId, Eigen::Index> row_of;
  for (std::size_t i = 0; i < embeddings.ids.size(); ++i) row_of.emplace(embeddings.ids[i], static_cast<Eigen::Index>(i));
  const auto text_dim = static_cast<int>(embeddings.vectors.cols());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ids.size()), config.dimension(text_dim));
  const Eigen::VectorXd none = Eigen::VectorXd::Zero(text_dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = row_of.find(ids[i]);
    if (config.use_text_embedding && it == row_of.end())
      throw IndexError("no embedding for report " + std::to_string(ids[i]));
    const Eigen::VectorXd text =
        it == row_of.end() ? none : Eigen::VectorXd(embeddings.vectors.row(it->second).transpose());
    x.row(static_cast<Eigen::Index>(i)) = build_features(corpus.at(ids[i]), config, text).transpose();
  }
  return x;
}

std::vector<int> duplicate_labels(const Corpus& corpus, const std::vector<ReportId>& ids) {
  std::vector<int> y;
  y.reserve(ids.size());
  for (ReportId id : ids) y.push_back(corpus.at(id).is_duplicate ? 1 : 0);
  return y;
}

std::vector<std::size_t> undersample(const std::vector<int>& labels, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  auto& major = pos.size() > neg.size() ? pos : neg;
  const auto& minor = pos.size() > neg.size() ? neg : pos;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(major));
  major.resize(minor.size());
  std::vector<std::size_t> keep(pos);
  keep.insert(keep.end(), neg.begin(), neg.end());
  std::sort(keep.begin(), keep.end());
  return keep;
}

NBModel nb_fit(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  check_labels(features.rows(), labels);
  const Eigen::Index d = features.cols();
  NBModel m;
  m.mean = Eigen::MatrixXd::Zero(2, d);
  m.variance = Eigen::MatrixXd::Zero(2, d);
  Eigen::Vector2d count = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    m.mean.row(c) += features.row(i);
    count[c] += 1.0;
  }
  for (int c = 0; c < 2; ++c) m.mean.row(c) /= count[c];
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    m.variance.row(c) += (features.row(i) - m.mean.row(c)).array().square().matrix();
  }
  for (int c = 0; c < 2; ++c) m.variance.row(c) /= count[c];

  const Eigen::RowVectorXd overall_mean = features.colwise().mean();
  const double max_var =
      d == 0 ? 0.0 : ((features.rowwise() - overall_mean).array().square().colwise().sum() /
                      static_cast<double>(features.rows()))
                         .maxCoeff();
  m.epsilon = max_var > 0 ? 1e-9 * max_var : 1e-9;
  m.variance = m.variance.cwiseMax(m.epsilon);
  m.prior = count / count.sum();
  return m;
}

Eigen::Vector2d nb_log_joint(const NBModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.dimension())
    throw DimensionMismatch(std::to_string(x.size()) + " vs " + std::to_string(model.dimension()));
  Eigen::Vector2d out;
  for (int c = 0; c < 2; ++c) {
    const auto var = model.variance.row(c).transpose().array();
    const auto diff = x.array() - model.mean.row(c).transpose().array();
    out[c] = std::log(model.prior[c]) - 0.5 * ((2.0 * std::numbers::pi * var).log() + diff.square() / var).sum();
  }
  return out;
}

NBPrediction nb_predict(const NBModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Vector2d lj = nb_log_joint(model, x);
  const double top = lj.maxCoeff();
  const double lse = top + std::log((lj.array() - top).exp().sum());
  NBPrediction p;
  p.posterior = (lj.array() - lse).exp();
  p.label = lj[1] > lj[0] ? 1 : 0;
  return p;
}

Eigen::VectorXd MLPModel::flatten() const {
  Eigen::VectorXd p(parameter_count());
  Eigen::Index o = 0;
  p.segment(o, w1.size()) = w1.reshaped();
  o += w1.size();
  p.segment(o, b1.size()) = b1;
  o += b1.size();
  p.segment(o, w2.size()) = w2;
  o += w2.size();
  p[o] = b2;
  return p;
}

void MLPModel::unflatten(const Eigen::Ref<const Eigen::VectorXd>& params) {
  if (params.size() != parameter_count()) throw ShapeMismatch("parameter vector length");
  Eigen::Index o = 0;
  w1.reshaped() = params.segment(o, w1.size());
  o += w1.size();
  b1 = params.segment(o, b1.size());
  o += b1.size();
  w2 = params.segment(o, w2.size());
  o += w2.size();
  b2 = params[o];
}

Eigen::VectorXd MlpGradients::flatten() const {
  Eigen::VectorXd p(w1.size() + b1.size() + w2.size() + 1);
  Eigen::Index o = 0;
  p.segment(o, w1.size()) = w1.reshaped();
  o += w1.size();
  p.segment(o, b1.size()) = b1;
  o += b1.size();
  p.segment(o, w2.size()) = w2;
  o += w2.size();
  p[o] = b2;
  return p;
}

MLPModel mlp_init(Eigen::Index input_dimension, const MlpConfig& config) {
  if (config.hidden < 1 || config.batch_size < 1 || config.epochs < 0 || !(config.learning_rate > 0))
    throw ConfigError("invalid MLP config");
  if (input_dimension < 1) throw ShapeMismatch("MLP input dimension must be positive");
  MLPModel m;
  m.config = config;
  Rng rng(config.seed);
  const double s1 = std::sqrt(2.0 / static_cast<double>(input_dimension));
  const double s2 = std::sqrt(1.0 / static_cast<double>(config.hidden));
  m.w1.resize(config.hidden, input_dimension);
  for (Eigen::Index j = 0; j < m.w1.cols(); ++j)
    for (Eigen::Index i = 0; i < m.w1.rows(); ++i) m.w1(i, j) = s1 * rng.normal();
  m.b1 = Eigen::VectorXd::Zero(config.hidden);
  m.w2.resize(config.hidden);
  for (Eigen::Index i = 0; i < m.w2.size(); ++i) m.w2[i] = s2 * rng.normal();
  m.b2 = 0.0;
  return m;
}

namespace {

struct Forward {
  Eigen::MatrixXd pre;     // hidden x n
  Eigen::MatrixXd hidden;  // hidden x n
  Eigen::VectorXd logit;   // n
};

Forward forward(const MLPModel& m, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Forward f;
  f.pre = (m.w1 * x.transpose()).colwise() + m.b1;
  f.hidden = f.pre.cwiseMax(0.0);
  f.logit = (f.hidden.transpose() * m.w2).array() + m.b2;
  return f;
}

}  // namespace

double mlp_loss(const MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ShapeMismatch("rows vs labels");
  const Forward f = forward(model, x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) loss += bce_from_logit(f.logit[i], labels[static_cast<std::size_t>(i)]);
  return loss / static_cast<double>(x.rows());
}

MlpGradients mlp_gradients(const MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                           const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ShapeMismatch("rows vs labels");
  if (x.cols() != model.input_dimension())
    throw DimensionMismatch(std::to_string(x.cols()) + " vs " + std::to_string(model.input_dimension()));
  const double n = static_cast<double>(x.rows());
  const Forward f = forward(model, x);
  Eigen::VectorXd dlogit(x.rows());
  MlpGradients g;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    g.loss += bce_from_logit(f.logit[i], y);
    dlogit[i] = (sigmoid(f.logit[i]) - y) / n;
  }
  g.loss /= n;
  g.w2 = f.hidden * dlogit;
  g.b2 = dlogit.sum();
  Eigen::MatrixXd dpre = model.w2 * dlogit.transpose();  // hidden x n
  dpre = dpre.cwiseProduct((f.pre.array() > 0.0).cast<double>().matrix());
  g.w1 = dpre * x;
  g.b1 = dpre.rowwise().sum();
  return g;
}

double mlp_step(MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<int>& labels,
                double learning_rate) {
  const MlpGradients g = mlp_gradients(model, x, labels);
  model.w1 -= learning_rate * g.w1;
  model.b1 -= learning_rate * g.b1;
  model.w2 -= learning_rate * g.w2;
  model.b2 -= learning_rate * g.b2;
  return g.loss;
}

void mlp_train(MLPModel& model, const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) throw ShapeMismatch("rows vs labels");
  const auto n = static_cast<std::size_t>(features.rows());
  const auto batch = static_cast<std::size_t>(model.config.batch_size);
  std::vector<Eigen::Index> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);
  // Shuffling stream is independent of the initialization stream.
  Rng rng(splitmix64(model.config.seed ^ 0x5348554646ULL));
  const int first_epoch = static_cast<int>(model.loss_trace.size());
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  for (int epoch = 0; epoch < model.config.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      xb.resize(static_cast<Eigen::Index>(len), features.cols());
      yb.resize(len);
      for (std::size_t r = 0; r < len; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = features.row(order[start + r]);
        yb[r] = labels[static_cast<std::size_t>(order[start + r])];
      }
      const double loss = mlp_step(model, xb, yb, model.config.learning_rate);
      if (!std::isfinite(loss) || !model.w1.allFinite() || !model.w2.allFinite() || !std::isfinite(model.b2))
        throw NonFiniteLoss(first_epoch + epoch, steps);
      total += loss;
      ++steps;
    }
    model.loss_trace.push_back(steps ? total / static_cast<double>(steps) : 0.0);
  }
}

MLPModel mlp_fit(const Eigen::MatrixXd& features, const std::vector<int>& labels, const MlpConfig& config) {
  check_labels(features.rows(), labels);
  MLPModel m = mlp_init(features.cols(), config);
  mlp_train(m, features, labels);
  return m;
}

ClassPrediction mlp_predict(const MLPModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.input_dimension())
    throw DimensionMismatch(std::to_string(x.size()) + " vs " + std::to_string(model.input_dimension()));
  const Eigen::VectorXd h = (model.w1 * x + model.b1).cwiseMax(0.0);
  ClassPrediction p;
  p.probability = sigmoid(h.dot(model.w2) + model.b2);
  p.label = p.probability >= 0.5 ? 1 : 0;
  return p;
}

double gradient_check(const MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                      const std::vector<int>& labels, const GradientCheckOptions& options) {
  const Eigen::VectorXd analytic = mlp_gradients(model, x, labels).flatten() * options.corrupt_scale;
  const Eigen::VectorXd base = model.flatten();
  const auto total = static_cast<std::uint64_t>(base.size());
  std::vector<Eigen::Index> picks(static_cast<std::size_t>(total));
  for (std::uint64_t i = 0; i < total; ++i) picks[i] = static_cast<Eigen::Index>(i);
  Rng rng(options.seed);
  rng.shuffle(std::span<Eigen::Index>(picks));
  picks.resize(std::min<std::size_t>(picks.size(), options.parameters));

  MLPModel probe = model;
  Eigen::VectorXd params = base;
  double worst = 0.0;
  for (Eigen::Index p : picks) {
    params[p] = base[p] + options.h;
    probe.unflatten(params);
    const double up = mlp_loss(probe, x, labels);
    params[p] = base[p] - options.h;
    probe.unflatten(params);
    const double down = mlp_loss(probe, x, labels);
    params[p] = base[p];
    const double numeric = (up - down) / (2.0 * options.h);
    const double a = analytic[p];
    worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6));
  }
  return worst;
}

ClassifierKind parse_classifier_kind(std::string_view name) {
  if (name == "nb" || name == "naive_bayes") return ClassifierKind::kNaiveBayes;
  if (name == "mlp") return ClassifierKind::kMlp;
  throw ConfigError("unknown classifier '" + std::string(name) + "' (expected nb or mlp)");
}

std::string_view to_string(ClassifierKind kind) { return kind == ClassifierKind::kMlp ? "mlp" : "nb"; }

ClassifierKind Classifier::kind() const {
  return std::holds_alternative<MLPModel>(model_) ? ClassifierKind::kMlp : ClassifierKind::kNaiveBayes;
}

ClassPrediction Classifier::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (const auto* nb = std::get_if<NBModel>(&model_)) {
    const NBPrediction p = nb_predict(*nb, x);
    return {p.label, p.posterior[1]};
  }
  return mlp_predict(std::get<MLPModel>(model_), x);
}

Classifier train_classifier(ClassifierKind kind, const Eigen::MatrixXd& features, const std::vector<int>& labels,
                            const MlpConfig& mlp) {
  if (kind == ClassifierKind::kMlp) return Classifier(mlp_fit(features, labels, mlp));
  return Classifier(nb_fit(features, labels));
}

namespace {

template <typename Derived>
std::vector<double> to_vec(const Eigen::DenseBase<Derived>& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) v.push_back(m(i, j));
  return v;
}

Eigen::MatrixXd from_vec(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw ParseError(0, "model", "parameter count mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace

nlohmann::ordered_json classifier_to_json(const Classifier& classifier) {
  nlohmann::ordered_json j;
  j["format"] = "dupdetect-classifier";
  j["version"] = 1;
  j["kind"] = std::string(to_string(classifier.kind()));
  if (const auto* nb = std::get_if<NBModel>(&classifier.model())) {
    j["dimension"] = nb->dimension();
    j["prior"] = to_vec(nb->prior);
    j["mean"] = to_vec(nb->mean);
    j["variance"] = to_vec(nb->variance);
    j["epsilon"] = nb->epsilon;
  } else {
    const auto& m = std::get<MLPModel>(classifier.model());
    j["dimension"] = m.input_dimension();
    j["config"] = {{"hidden", m.config.hidden},
                   {"epochs", m.config.epochs},
                   {"learning_rate", m.config.learning_rate},
                   {"batch_size", m.config.batch_size},
                   {"seed", m.config.seed}};
    j["w1"] = to_vec(m.w1);
    j["b1"] = to_vec(m.b1);
    j["w2"] = to_vec(m.w2);
    j["b2"] = m.b2;
    j["loss_trace"] = m.loss_trace;
  }
  return j;
}

Classifier classifier_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw ParseError(0, "version", "unsupported classifier version");
    const auto d = j.at("dimension").get<Eigen::Index>();
    if (parse_classifier_kind(j.at("kind").get<std::string>()) == ClassifierKind::kNaiveBayes) {
      NBModel m;
      m.prior = from_vec(j.at("prior"), 2, 1);
      m.mean = from_vec(j.at("mean"), 2, d);
      m.variance = from_vec(j.at("variance"), 2, d);
      m.epsilon = j.at("epsilon").get<double>();
      return Classifier(std::move(m));
    }
    MLPModel m;
    const auto& c = j.at("config");
    m.config.hidden = c.at("hidden").get<int>();
    m.config.epochs = c.at("epochs").get<int>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.batch_size = c.at("batch_size").get<int>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.w1 = from_vec(j.at("w1"), m.config.hidden, d);
    m.b1 = from_vec(j.at("b1"), m.config.hidden, 1);
    m.w2 = from_vec(j.at("w2"), m.config.hidden, 1);
    m.b2 = j.at("b2").get<double>();
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return Classifier(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "model", e.what());
  }
}

const Classifier& PerTopicModels::route(int topic) const {
  auto it = by_topic.find(topic);
  if (it != by_topic.end()) return it->second;
  if (!global) throw InvariantError("no global fallback model");
  return *global;
}

PerTopicModels train_per_topic(const Corpus& training, const TopicOf& topic_of, ClassifierKind kind,
                               const FeatureConfig& features, const EmbeddingSet& embeddings,
                               const PerTopicOptions& options) {
  features.validate();
  std::map<int, std::vector<ReportId>> by_topic;
  for (const auto& r : training.reports()) by_topic[topic_of(r)].push_back(r.id);

  PerTopicModels out;
  for (const auto& [topic, ids] : by_topic) {
    const std::vector<int> y = duplicate_labels(training, ids);
    const bool both = std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0;
    if (ids.size() < options.min_training_size || !both) {
      out.warnings.push_back("topic " + std::to_string(topic) + ": " + std::to_string(ids.size()) + " reports" +
                             (both ? "" : ", single class") + "; using the global model");
      continue;
    }
    const Eigen::MatrixXd x = build_feature_matrix(training, ids, features, embeddings);
    out.by_topic.emplace(topic, train_classifier(kind, x, y, options.mlp));
  }
  if (out.by_topic.empty()) throw NoTrainableTopics();

  const std::vector<ReportId> all = training.ids();
  out.global.emplace(train_classifier(kind, build_feature_matrix(training, all, features, embeddings),
                                      duplicate_labels(training, all), options.mlp));
  return out;
}

PerTopicModels train_per_topic(const Corpus& training, const TopicModel& model, ClassifierKind kind,
                               const FeatureConfig& features, const EmbeddingSet& embeddings,
                               const PerTopicOptions& options) {
  std::unordered_map<ReportId, int> topic;
  for (std::size_t d = 0; d < model.num_docs(); ++d) topic.emplace(model.doc_ids()[d], dominant_topic(model, d));
  return train_per_topic(
      training,
      [&](const BugReport& r) {
        auto it = topic.find(r.id);
        if (it == topic.end()) throw ModelCorpusMismatch("report " + std::to_string(r.id) + " has no topic");
        return it->second;
      },
      kind, features, embeddings, options);
}

}  // namespace dupdetect
