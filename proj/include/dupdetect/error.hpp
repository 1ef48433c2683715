#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dupdetect {

// Process exit codes reported by the CLI for each error category.
enum class ErrorCategory : int {
  kConfig = 2,
  kData = 3,
  kProvider = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what) : Error(ErrorCategory::kProvider, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(ErrorCategory::kInternal, what) {}
};

// corpus
class IoError : public DataError {
 public:
  explicit IoError(const std::string& what) : DataError("io error: " + what) {}
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t row, std::string field, const std::string& detail)
      : DataError("parse error at row " + std::to_string(row) + ", field '" + field + "': " + detail),
        row_(row),
        field_(std::move(field)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t row_;
  std::string field_;
};

class EmptyCorpus : public DataError {
 public:
  EmptyCorpus() : DataError("corpus is empty") {}
};

// shared shape/argument errors
class DimensionMismatch : public DataError {
 public:
  explicit DimensionMismatch(const std::string& what) : DataError("dimension mismatch: " + what) {}
};

class IndexError : public DataError {
 public:
  explicit IndexError(const std::string& what) : DataError("index out of range: " + what) {}
};

// textprep
class EmptyVocabulary : public DataError {
 public:
  EmptyVocabulary() : DataError("every token was pruned; vocabulary is empty") {}
};

// lda
class EmptyMatrix : public DataError {
 public:
  EmptyMatrix() : DataError("document-term matrix is empty") {}
};

class InvalidK : public ConfigError {
 public:
  explicit InvalidK(int k) : ConfigError("invalid topic count k=" + std::to_string(k) + " (need k >= 2)") {}
};

class InvalidTopic : public DataError {
 public:
  explicit InvalidTopic(int topic) : DataError("invalid topic id " + std::to_string(topic)) {}
};

// embed
class ZeroVector : public DataError {
 public:
  ZeroVector() : DataError("cosine similarity undefined for an all-zero vector") {}
};

class NetworkError : public ProviderError {
 public:
  explicit NetworkError(const std::string& what) : ProviderError("network error: " + what) {}
};

class AuthError : public ProviderError {
 public:
  explicit AuthError(const std::string& what) : ProviderError("authentication failed: " + what) {}
};

class ProviderShapeError : public ProviderError {
 public:
  explicit ProviderShapeError(const std::string& what) : ProviderError("provider shape error: " + what) {}
};

class EmptyCompletion : public ProviderError {
 public:
  EmptyCompletion() : ProviderError("completion returned empty content") {}
};

// partition
class TooFewPoints : public DataError {
 public:
  TooFewPoints(std::size_t n, std::size_t k)
      : DataError("k-means needs at least k points (have " + std::to_string(n) + ", k=" + std::to_string(k) + ")") {}
};

class ModelCorpusMismatch : public DataError {
 public:
  explicit ModelCorpusMismatch(const std::string& what) : DataError("topic model does not match corpus: " + what) {}
};

// classify
class NoFeaturesEnabled : public ConfigError {
 public:
  NoFeaturesEnabled() : ConfigError("feature config enables no feature source") {}
};

class SingleClassTraining : public DataError {
 public:
  SingleClassTraining() : DataError("training data contains a single class") {}
};

class ShapeMismatch : public DataError {
 public:
  explicit ShapeMismatch(const std::string& what) : DataError("shape mismatch: " + what) {}
};

class NonFiniteLoss : public InvariantError {
 public:
  NonFiniteLoss(int epoch, std::size_t step)
      : InvariantError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                       std::to_string(step)) {}
};

class NoTrainableTopics : public DataError {
 public:
  NoTrainableTopics() : DataError("no topic has enough labelled reports of both classes to train a model") {}
};

// engine
class QueryNotInPartition : public DataError {
 public:
  explicit QueryNotInPartition(std::int64_t id)
      : DataError("query " + std::to_string(id) + " is not in any comparable group") {}
};

class UndefinedMetric : public DataError {
 public:
  explicit UndefinedMetric(const std::string& what) : DataError("undefined metric: " + what) {}
};

class NoEligibleQueries : public DataError {
 public:
  NoEligibleQueries() : DataError("no query has a duplicate partner in its searched pool") {}
};

class MissingGroundTruth : public DataError {
 public:
  explicit MissingGroundTruth(std::int64_t id)
      : DataError("no ground truth for report " + std::to_string(id)) {}
};

}  // namespace dupdetect
