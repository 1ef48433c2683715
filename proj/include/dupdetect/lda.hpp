#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dupdetect/corpus.hpp"
#include "dupdetect/textprep.hpp"

namespace dupdetect {

// Collapsed-Gibbs conditional for one token, from "-i" counts (the token's
// own assignment already removed):
//   w_k = (n_dk + alpha_k) * (n_kw + beta) / (n_k + V * beta)
// Returned unnormalized.
template <typename Scalar, typename DocTopic, typename TopicWord, typename TopicTotal, typename Alpha>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> topic_weights(const Eigen::MatrixBase<DocTopic>& n_dk,
                                                       const Eigen::MatrixBase<TopicWord>& n_kw,
                                                       const Eigen::MatrixBase<TopicTotal>& n_k,
                                                       const Eigen::MatrixBase<Alpha>& alpha, Scalar beta,
                                                       Eigen::Index vocab_size) {
  const auto v_beta = static_cast<Scalar>(vocab_size) * beta;
  return ((n_dk.template cast<Scalar>().array() + alpha.template cast<Scalar>().array()) *
          (n_kw.template cast<Scalar>().array() + beta) / (n_k.template cast<Scalar>().array() + v_beta))
      .matrix();
}

struct LdaOptions {
  int k = 7;
  std::optional<double> alpha;  // uniform prior; defaults to 50 / k
  double beta = 0.01;
  int iterations = 1000;
  std::uint64_t seed = 42;
};

class TopicModel {
 public:
  int k() const noexcept { return static_cast<int>(alpha_.size()); }
  Eigen::Index vocab_size() const noexcept { return n_kw_.cols(); }
  std::size_t num_docs() const noexcept { return docs_.size(); }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  const Eigen::MatrixXi& doc_topic() const noexcept { return n_dk_; }
  const Eigen::MatrixXi& topic_word() const noexcept { return n_kw_; }
  const Eigen::VectorXi& topic_totals() const noexcept { return n_k_; }
  const std::vector<std::vector<int>>& assignments() const noexcept { return z_; }
  const std::vector<std::vector<int>>& documents() const noexcept { return docs_; }
  const std::vector<ReportId>& doc_ids() const noexcept { return doc_ids_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int iterations() const noexcept { return iterations_; }
  const std::string& vocab_hash() const noexcept { return vocab_hash_; }
  void set_vocab_hash(std::string hash) { vocab_hash_ = std::move(hash); }

  // Builds a model from explicit assignments; counts are derived from them.
  static TopicModel from_assignments(std::vector<std::vector<int>> docs, std::vector<std::vector<int>> z,
                                     Eigen::VectorXd alpha, double beta, Eigen::Index vocab_size);

  // Throws InvariantError if the count tables disagree with z.
  void check_invariants() const;

 private:
  friend class GibbsSampler;
  friend TopicModel fit_lda(const DocTermMatrix& dtm, const LdaOptions& options,
                            const std::function<void(const TopicModel&, int)>& observer);
  friend TopicModel load_topic_model(const std::filesystem::path& path);

  Eigen::VectorXd alpha_;
  double beta_ = 0.01;
  Eigen::MatrixXi n_dk_;  // docs x k
  Eigen::MatrixXi n_kw_;  // k x V
  Eigen::VectorXi n_k_;
  std::vector<std::vector<int>> docs_;  // word index per token position
  std::vector<std::vector<int>> z_;
  std::vector<ReportId> doc_ids_;
  std::uint64_t seed_ = 0;
  int iterations_ = 0;
  std::string vocab_hash_;
};

// Normalized conditional for the token at (doc, position), computed with that
// token's current assignment excluded. Throws IndexError.
Eigen::VectorXd gibbs_conditional(const TopicModel& model, std::size_t doc, std::size_t position);

// Called after each full sweep with the 1-based sweep number.
using SweepObserver = std::function<void(const TopicModel&, int sweep)>;

// Throws EmptyMatrix, InvalidK.
TopicModel fit_lda(const DocTermMatrix& dtm, const LdaOptions& options, const SweepObserver& observer = {});

// Collapsed joint log p(w, z).
double log_likelihood(const TopicModel& model);

// argmax_k (n_dk + alpha_k); ties go to the lowest topic index.
int dominant_topic(const TopicModel& model, std::size_t doc);
bool is_empty_document(const TopicModel& model, std::size_t doc);

struct FoldInOptions {
  int iterations = 50;
  std::uint64_t seed = 42;
};

// Fold-in Gibbs with topic-word counts frozen. Word indices outside the
// model's vocabulary are ignored; an empty document returns topic 0.
int infer_topic(const TopicModel& model, const std::vector<int>& words, const FoldInOptions& options = {});
int infer_topic(const TopicModel& model, const Vocabulary& vocab, const std::vector<std::string>& tokens,
                const FoldInOptions& options = {});

struct WordProbability {
  int word = 0;
  double probability = 0.0;
};

// Sorted by (n_kw + beta) descending, ties by word index. Throws InvalidTopic.
std::vector<WordProbability> top_words(const TopicModel& model, int topic, std::size_t n = 10);

// JSON: k, alpha, beta, n_kw, n_k, vocab hash, doc ids, dominant topics.
void save_topic_model(const TopicModel& model, const std::filesystem::path& path);
// The loaded model carries topic-word state only (enough for infer_topic and top_words).
TopicModel load_topic_model(const std::filesystem::path& path);

}  // namespace dupdetect
