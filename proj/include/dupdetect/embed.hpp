#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dupdetect/cache.hpp"
#include "dupdetect/corpus.hpp"
#include "dupdetect/error.hpp"
#include "dupdetect/textprep.hpp"
#include "dupdetect/transport.hpp"

namespace dupdetect {

// (a . b) / (|a| |b|), clamped to [-1, 1].
// Throws DimensionMismatch, ZeroVector.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_sim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size())
    throw DimensionMismatch(std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) throw ZeroVector();
  const Scalar sim = a.dot(b.template cast<Scalar>()) / (na * nb);
  return std::clamp(sim, Scalar(-1), Scalar(1));
}

struct EmbeddingVector {
  Eigen::VectorXd values;
  std::string provider_tag;
  ReportId report_id = 0;
};

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b);

// One row per report, aligned with `ids`.
struct EmbeddingSet {
  Eigen::MatrixXd vectors;
  std::vector<ReportId> ids;
  std::string provider_tag;

  EmbeddingVector at(std::size_t row) const;
  // Rows whose entries are all zero (empty documents).
  std::vector<ReportId> zero_rows() const;
};

// Seed-keyed sparse sign projection (entries +-sqrt(3/dim) with probability
// 1/6 each, 0 otherwise). An entry depends only on (seed, term, column).
class SignProjection {
 public:
  SignProjection(int dimension, std::uint64_t seed);

  int dimension() const noexcept { return dimension_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double entry(std::int64_t term, int column) const;

  Eigen::VectorXd project(const Eigen::SparseVector<double>& row) const;
  // (rows, V) -> (rows, dimension)
  Eigen::MatrixXd project(const WeightMatrix& rows) const;

 private:
  int dimension_;
  std::uint64_t seed_;
  double scale_;
};

std::string internal_provider_tag(int dimension, std::uint64_t seed);

EmbeddingVector embed_internal(const Eigen::SparseVector<double>& tfidf_row, int dimension, std::uint64_t seed,
                               ReportId report_id = 0);
EmbeddingSet embed_internal(const TfidfMatrix& tfidf, int dimension, std::uint64_t seed);

struct ExternalEmbeddingConfig {
  std::string endpoint;
  std::string model;
  std::string token_env = "DUPDETECT_EMBED_TOKEN";
  std::size_t batch_size = 32;
  int max_in_flight = 4;
  std::filesystem::path cache_dir;  // empty disables caching
  RetryPolicy retry;
};

// Client for `POST {endpoint}` {"model", "input": [...]} -> {"embeddings": [[...]]}.
class ExternalEmbedder {
 public:
  ExternalEmbedder(ExternalEmbeddingConfig config, HttpTransport& transport, Sleeper sleeper = real_sleeper());

  // Order-preserving. Throws NetworkError, AuthError, ProviderShapeError.
  std::vector<Eigen::VectorXd> embed(const std::vector<std::string>& texts);

  std::string provider_tag() const { return "external:" + config_.model; }
  std::size_t requests_sent() const noexcept { return requests_.load(); }
  std::optional<Eigen::Index> dimension() const;

 private:
  Eigen::VectorXd parse_cached(const std::string& bytes) const;
  void check_dimension(Eigen::Index dim);
  std::vector<Eigen::VectorXd> request_batch(const std::vector<std::string>& batch);

  ExternalEmbeddingConfig config_;
  HttpTransport& transport_;
  Sleeper sleeper_;
  HttpHeaders headers_;
  std::optional<DiskCache> cache_;
  std::atomic<std::size_t> requests_{0};
  mutable std::mutex dim_mutex_;
  std::optional<Eigen::Index> dimension_;
};

enum class EmbeddingProviderKind { kInternalTfidfProjection, kExternalHttp };

struct EmbeddingProviderConfig {
  EmbeddingProviderKind kind = EmbeddingProviderKind::kInternalTfidfProjection;
  int dimension = 256;
  std::uint64_t seed = 42;
  ExternalEmbeddingConfig external;

  // Throws ConfigError.
  void validate() const;
};

// Embeds every report of `corpus` (aligned with `text`) with the configured
// provider. `transport` is only used by the external provider.
EmbeddingSet embed_corpus(const Corpus& corpus, const PreparedText& text, const EmbeddingProviderConfig& config,
                          HttpTransport* transport = nullptr, Sleeper sleeper = real_sleeper());

struct PairSimilarity {
  ReportId a = 0;
  ReportId b = 0;
  double similarity = 0.0;
};

// All i<j pairs among `rows` (indices into `set`); zero rows are skipped.
std::vector<PairSimilarity> pairwise_similarities(const EmbeddingSet& set, const std::vector<std::size_t>& rows);

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

}  // namespace dupdetect
