#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "dupdetect/corpus.hpp"
#include "dupdetect/embed.hpp"
#include "dupdetect/lda.hpp"

namespace dupdetect {

// Feature layout: [text embedding | component one-hot].
struct FeatureConfig {
  bool use_text_embedding = true;
  bool use_component_onehot = false;
  std::map<std::string, int> component_index;  // built from the training split

  // Throws NoFeaturesEnabled.
  void validate() const;
  int dimension(int text_dimension) const;
};

// Indexes the distinct components of `reports` in lexicographic order.
std::map<std::string, int> build_component_index(const Corpus& corpus, const std::vector<ReportId>& reports);

// An unseen component yields an all-zero one-hot block.
Eigen::VectorXd build_features(const BugReport& report, const FeatureConfig& config,
                               const Eigen::Ref<const Eigen::VectorXd>& text_embedding);

// Rows follow `ids`. Throws IndexError for an id without an embedding row.
Eigen::MatrixXd build_feature_matrix(const Corpus& corpus, const std::vector<ReportId>& ids,
                                     const FeatureConfig& config, const EmbeddingSet& embeddings);

std::vector<int> duplicate_labels(const Corpus& corpus, const std::vector<ReportId>& ids);

// Keeps every positive and an equal-size seeded sample of negatives (or vice
// versa); returns sorted row indices.
std::vector<std::size_t> undersample(const std::vector<int>& labels, std::uint64_t seed);

struct ClassPrediction {
  int label = 0;
  double probability = 0.0;  // P(label = 1)
};

// Gaussian naive Bayes over two classes {0, 1}.
struct NBModel {
  Eigen::Vector2d prior;
  Eigen::MatrixXd mean;      // 2 x d
  Eigen::MatrixXd variance;  // 2 x d, entries >= epsilon
  double epsilon = 1e-9;

  Eigen::Index dimension() const { return mean.cols(); }
};

// Throws SingleClassTraining, ShapeMismatch.
NBModel nb_fit(const Eigen::MatrixXd& features, const std::vector<int>& labels);

// log P(c) + sum_j log N(x_j; mean_cj, var_cj) for c = 0, 1. Throws DimensionMismatch.
Eigen::Vector2d nb_log_joint(const NBModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct NBPrediction {
  int label = 0;  // ties go to 0
  Eigen::Vector2d posterior;
};
NBPrediction nb_predict(const NBModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct MlpConfig {
  int hidden = 128;
  int epochs = 10;
  double learning_rate = 0.01;
  int batch_size = 64;
  std::uint64_t seed = 42;
};

// d -> hidden (ReLU) -> 1 (logistic).
struct MLPModel {
  Eigen::MatrixXd w1;  // hidden x d
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;
  MlpConfig config;
  std::vector<double> loss_trace;  // mean minibatch loss per epoch

  Eigen::Index input_dimension() const { return w1.cols(); }
  Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::Ref<const Eigen::VectorXd>& params);
};

// He-initialized hidden layer, scaled-normal output layer, zero biases.
MLPModel mlp_init(Eigen::Index input_dimension, const MlpConfig& config);

struct MlpGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
  double loss = 0.0;

  Eigen::VectorXd flatten() const;
};

// Mean binary cross-entropy over the rows of `x`.
double mlp_loss(const MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<int>& labels);
MlpGradients mlp_gradients(const MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                           const std::vector<int>& labels);

// One gradient-descent step on a batch; returns the batch loss before the step.
double mlp_step(MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<int>& labels,
                double learning_rate);

// Runs config.epochs epochs of shuffled minibatch descent, appending to
// loss_trace. Throws NonFiniteLoss.
void mlp_train(MLPModel& model, const Eigen::MatrixXd& features, const std::vector<int>& labels);

// Throws SingleClassTraining, ShapeMismatch, NonFiniteLoss.
MLPModel mlp_fit(const Eigen::MatrixXd& features, const std::vector<int>& labels, const MlpConfig& config);

// label = probability >= 0.5. Throws DimensionMismatch.
ClassPrediction mlp_predict(const MLPModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct GradientCheckOptions {
  std::size_t parameters = 256;  // random subset size
  double h = 1e-5;
  std::uint64_t seed = 7;
  // Test-only: multiplies the analytic gradient before comparison.
  double corrupt_scale = 1.0;
};

// max |a - n| / max(|a| + |n|, 1e-6) over the sampled parameters.
double gradient_check(const MLPModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                      const std::vector<int>& labels, const GradientCheckOptions& options = {});

enum class ClassifierKind { kNaiveBayes, kMlp };

ClassifierKind parse_classifier_kind(std::string_view name);
std::string_view to_string(ClassifierKind kind);

class Classifier {
 public:
  explicit Classifier(NBModel model) : model_(std::move(model)) {}
  explicit Classifier(MLPModel model) : model_(std::move(model)) {}

  ClassifierKind kind() const;
  ClassPrediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  const std::variant<NBModel, MLPModel>& model() const noexcept { return model_; }

 private:
  std::variant<NBModel, MLPModel> model_;
};

Classifier train_classifier(ClassifierKind kind, const Eigen::MatrixXd& features, const std::vector<int>& labels,
                            const MlpConfig& mlp = {});

nlohmann::ordered_json classifier_to_json(const Classifier& classifier);
Classifier classifier_from_json(const nlohmann::json& j);

struct PerTopicOptions {
  std::size_t min_training_size = 50;
  MlpConfig mlp;
};

struct PerTopicModels {
  std::map<int, Classifier> by_topic;
  std::optional<Classifier> global;
  std::vector<std::string> warnings;

  // The topic's model, or the global fallback.
  const Classifier& route(int topic) const;
};

using TopicOf = std::function<int(const BugReport&)>;

// One model per topic with >= min_training_size reports and both classes;
// the global model is always trained. Throws NoTrainableTopics.
PerTopicModels train_per_topic(const Corpus& training, const TopicOf& topic_of, ClassifierKind kind,
                               const FeatureConfig& features, const EmbeddingSet& embeddings,
                               const PerTopicOptions& options = {});

// Topic = dominant topic of the report in a model fit on `training`.
// Throws ModelCorpusMismatch.
PerTopicModels train_per_topic(const Corpus& training, const TopicModel& model, ClassifierKind kind,
                               const FeatureConfig& features, const EmbeddingSet& embeddings,
                               const PerTopicOptions& options = {});

}  // namespace dupdetect
