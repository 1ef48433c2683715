#include "dupdetect/embed.hpp"

#include <cstring>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "dupdetect/hash.hpp"
#include "dupdetect/rng.hpp"

namespace dupdetect {

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine_sim(a.values, b.values); }

EmbeddingVector EmbeddingSet::at(std::size_t row) const {
  if (row >= ids.size()) throw IndexError("embedding row " + std::to_string(row));
  return EmbeddingVector{vectors.row(static_cast<Eigen::Index>(row)).transpose(), provider_tag, ids[row]};
}

std::vector<ReportId> EmbeddingSet::zero_rows() const {
  std::vector<ReportId> out;
  for (Eigen::Index r = 0; r < vectors.rows(); ++r)
    if (vectors.row(r).isZero(0.0)) out.push_back(ids[static_cast<std::size_t>(r)]);
  return out;
}

SignProjection::SignProjection(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed), scale_(std::sqrt(3.0 / dimension)) {
  if (dimension < 2) throw ConfigError("projection dimension must be >= 2");
}

double SignProjection::entry(std::int64_t term, int column) const {
  const std::uint64_t h = splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(term) * 0x9e3779b97f4a7c15ULL +
                                                        static_cast<std::uint64_t>(column)));
  switch (h % 6) {
    case 0:
      return scale_;
    case 1:
      return -scale_;
    default:
      return 0.0;
  }
}

Eigen::VectorXd SignProjection::project(const Eigen::SparseVector<double>& row) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension_);
  for (Eigen::SparseVector<double>::InnerIterator it(row); it; ++it)
    for (int j = 0; j < dimension_; ++j) out[j] += it.value() * entry(it.index(), j);
  return out;
}

Eigen::MatrixXd SignProjection::project(const WeightMatrix& rows) const {
  Eigen::MatrixXd basis(rows.cols(), dimension_);
  for (Eigen::Index t = 0; t < rows.cols(); ++t)
    for (int j = 0; j < dimension_; ++j) basis(t, j) = entry(t, j);
  return rows * basis;
}

std::string internal_provider_tag(int dimension, std::uint64_t seed) {
  return "internal:tfidf-srp:" + std::to_string(dimension) + ":" + std::to_string(seed);
}

EmbeddingVector embed_internal(const Eigen::SparseVector<double>& tfidf_row, int dimension, std::uint64_t seed,
                               ReportId report_id) {
  return EmbeddingVector{SignProjection(dimension, seed).project(tfidf_row), internal_provider_tag(dimension, seed),
                         report_id};
}

EmbeddingSet embed_internal(const TfidfMatrix& tfidf, int dimension, std::uint64_t seed) {
  EmbeddingSet out;
  out.vectors = SignProjection(dimension, seed).project(tfidf.weights);
  out.ids = tfidf.doc_ids;
  out.provider_tag = internal_provider_tag(dimension, seed);
  return out;
}

ExternalEmbedder::ExternalEmbedder(ExternalEmbeddingConfig config, HttpTransport& transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(transport), sleeper_(std::move(sleeper)),
      headers_(bearer_headers(config_.token_env)) {
  if (config_.batch_size < 1) throw ConfigError("embedding batch size must be >= 1");
  if (config_.endpoint.empty()) throw ConfigError("external embedding provider needs an endpoint");
  if (!config_.cache_dir.empty()) cache_.emplace(config_.cache_dir, "embed");
}

std::optional<Eigen::Index> ExternalEmbedder::dimension() const {
  std::lock_guard lock(dim_mutex_);
  return dimension_;
}

void ExternalEmbedder::check_dimension(Eigen::Index dim) {
  std::lock_guard lock(dim_mutex_);
  if (dim == 0) throw ProviderShapeError("provider returned an empty vector");
  if (!dimension_) {
    dimension_ = dim;
  } else if (*dimension_ != dim) {
    throw ProviderShapeError("dimension changed mid-run from " + std::to_string(*dimension_) + " to " +
                             std::to_string(dim));
  }
}

Eigen::VectorXd ExternalEmbedder::parse_cached(const std::string& bytes) const {
  const auto values = nlohmann::json::parse(bytes).get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<Eigen::VectorXd> ExternalEmbedder::request_batch(const std::vector<std::string>& batch) {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["input"] = batch;
  ++requests_;
  const std::string response = post_with_retry(transport_, config_.endpoint, body.dump(), headers_, config_.retry, sleeper_);
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(response);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderShapeError(std::string("response is not JSON: ") + e.what());
  }
  if (!parsed.contains("embeddings") || !parsed["embeddings"].is_array())
    throw ProviderShapeError("response lacks an 'embeddings' array");
  const auto& rows = parsed["embeddings"];
  if (rows.size() != batch.size())
    throw ProviderShapeError("expected " + std::to_string(batch.size()) + " embeddings, got " +
                             std::to_string(rows.size()));
  std::vector<Eigen::VectorXd> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<double> values;
    try {
      values = row.get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ProviderShapeError("embedding row is not a numeric array");
    }
    for (double v : values)
      if (!std::isfinite(v)) throw ProviderShapeError("non-finite embedding entry");
    out.emplace_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

std::vector<Eigen::VectorXd> ExternalEmbedder::embed(const std::vector<std::string>& texts) {
  const std::string tag = provider_tag();
  auto key_for = [&](const std::string& text) { return tag + '\0' + sha256_hex(text); };

  std::vector<Eigen::VectorXd> out(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (cache_) {
      if (auto hit = cache_->get(key_for(texts[i]))) {
        out[i] = parse_cached(*hit);
        check_dimension(out[i].size());
        continue;
      }
    }
    missing.push_back(i);
  }

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < missing.size(); start += config_.batch_size)
    batches.emplace_back(missing.begin() + static_cast<std::ptrdiff_t>(start),
                         missing.begin() + static_cast<std::ptrdiff_t>(std::min(missing.size(), start + config_.batch_size)));

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t b = next++;
      if (b >= batches.size()) return;
      {
        std::lock_guard lock(error_mutex);
        if (first_error) return;
      }
      try {
        std::vector<std::string> batch_texts;
        for (std::size_t i : batches[b]) batch_texts.push_back(texts[i]);
        auto vectors = request_batch(batch_texts);
        for (std::size_t j = 0; j < vectors.size(); ++j) {
          check_dimension(vectors[j].size());
          const std::size_t i = batches[b][j];
          if (cache_) {
            const std::vector<double> values(vectors[j].data(), vectors[j].data() + vectors[j].size());
            cache_->put(key_for(texts[i]), nlohmann::json(values).dump());
          }
          out[i] = std::move(vectors[j]);
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config_.max_in_flight)), batches.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void EmbeddingProviderConfig::validate() const {
  if (kind == EmbeddingProviderKind::kInternalTfidfProjection) {
    if (dimension < 2) throw ConfigError("internal embedding dimension must be >= 2");
  } else {
    if (external.batch_size < 1) throw ConfigError("external embedding batch size must be >= 1");
    if (external.endpoint.empty()) throw ConfigError("external embedding provider needs an endpoint");
    if (external.model.empty()) throw ConfigError("external embedding provider needs a model name");
  }
}

EmbeddingSet embed_corpus(const Corpus& corpus, const PreparedText& text, const EmbeddingProviderConfig& config,
                          HttpTransport* transport, Sleeper sleeper) {
  config.validate();
  if (config.kind == EmbeddingProviderKind::kInternalTfidfProjection)
    return embed_internal(text.tfidf, config.dimension, config.seed);

  std::unique_ptr<HttpTransport> owned;
  if (!transport) {
    owned = make_http_transport();
    transport = owned.get();
  }
  ExternalEmbedder embedder(config.external, *transport, std::move(sleeper));
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& r : corpus.reports()) texts.push_back(full_text(r));
  const auto vectors = embedder.embed(texts);
  EmbeddingSet out;
  out.provider_tag = embedder.provider_tag();
  out.ids = corpus.ids();
  const Eigen::Index dim = vectors.empty() ? 0 : vectors.front().size();
  out.vectors.resize(static_cast<Eigen::Index>(vectors.size()), dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) out.vectors.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
  return out;
}

std::vector<PairSimilarity> pairwise_similarities(const EmbeddingSet& set, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> usable;
  for (std::size_t r : rows) {
    if (r >= set.ids.size()) throw IndexError("embedding row " + std::to_string(r));
    if (!set.vectors.row(static_cast<Eigen::Index>(r)).isZero(0.0)) usable.push_back(r);
  }
  Eigen::MatrixXd normalized(static_cast<Eigen::Index>(usable.size()), set.vectors.cols());
  for (std::size_t i = 0; i < usable.size(); ++i)
    normalized.row(static_cast<Eigen::Index>(i)) = set.vectors.row(static_cast<Eigen::Index>(usable[i])).normalized();
  const Eigen::MatrixXd gram = normalized * normalized.transpose();
  std::vector<PairSimilarity> out;
  out.reserve(usable.size() * (usable.size() - (usable.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < usable.size(); ++i)
    for (std::size_t j = i + 1; j < usable.size(); ++j)
      out.push_back({set.ids[usable[i]], set.ids[usable[j]],
                     std::clamp(gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), -1.0, 1.0)});
  return out;
}

namespace {

constexpr char kEmbeddingMagic[8] = {'D', 'D', 'E', 'M', 'B', '0', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError(0, "<file>", "truncated embedding file");
  return v;
}

}  // namespace

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kEmbeddingMagic, sizeof kEmbeddingMagic);
  write_pod<std::uint64_t>(out, set.provider_tag.size());
  out.write(set.provider_tag.data(), static_cast<std::streamsize>(set.provider_tag.size()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(set.vectors.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(set.vectors.cols()));
  for (std::size_t r = 0; r < set.ids.size(); ++r) {
    write_pod<std::int64_t>(out, set.ids[r]);
    for (Eigen::Index c = 0; c < set.vectors.cols(); ++c) write_pod<double>(out, set.vectors(static_cast<Eigen::Index>(r), c));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof kEmbeddingMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kEmbeddingMagic, sizeof magic) != 0)
    throw ParseError(0, "<file>", "not a dupdetect embedding file");
  EmbeddingSet set;
  set.provider_tag.resize(read_pod<std::uint64_t>(in));
  in.read(set.provider_tag.data(), static_cast<std::streamsize>(set.provider_tag.size()));
  const auto rows = read_pod<std::uint64_t>(in);
  const auto cols = read_pod<std::uint64_t>(in);
  set.vectors.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  set.ids.resize(rows);
  for (std::uint64_t r = 0; r < rows; ++r) {
    set.ids[r] = read_pod<std::int64_t>(in);
    for (std::uint64_t c = 0; c < cols; ++c)
      set.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_pod<double>(in);
  }
  return set;
}

}  // namespace dupdetect
