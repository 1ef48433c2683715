#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "dupdetect/corpus.hpp"

namespace dupdetect {

using StopWords = std::set<std::string, std::less<>>;

// Embedded English stop-word list (174 entries).
const StopWords& default_stopwords();

// summary + ' ' + description.
std::string full_text(const BugReport& report);

// Lowercased tokens split on every non-alphanumeric byte. Bytes >= 0x80
// (UTF-8 sequences) count as token characters.
std::vector<std::string> tokenize(std::string_view text);

// Porter stemming applied until the token stops changing, so that
// stem(stem(t)) == stem(t).
std::string stem(std::string_view token);

// tokenize -> drop stop words -> stem.
std::vector<std::string> analyze(std::string_view text, const StopWords& stopwords);

struct VocabularyOptions {
  double max_doc_fraction = 0.9;
  std::int64_t min_total_count = 2;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Tokens are indexed in the order given.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::int64_t> document_frequency,
             std::int64_t num_documents);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  // -1 when absent.
  int index_of(std::string_view token) const;
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::int64_t document_frequency(int index) const { return df_.at(static_cast<std::size_t>(index)); }
  std::int64_t num_documents() const noexcept { return num_documents_; }

  // SHA-256 over the token list; ties serialized models to their vocabulary.
  std::string content_hash() const;

  // token<TAB>index<TAB>df, one per line.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> df_;
  std::int64_t num_documents_ = 0;
  std::unordered_map<std::string, int> index_;
};

// Builds from already analyzed documents. Retained tokens are sorted
// lexicographically. Throws EmptyCorpus / EmptyVocabulary.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents,
                            const VocabularyOptions& options = {}, const StopWords& stopwords = default_stopwords());

Vocabulary build_vocabulary(const Corpus& corpus, const VocabularyOptions& options = {},
                            const StopWords& stopwords = default_stopwords());

using SparseCounts = Eigen::SparseVector<int>;
using CountMatrix = Eigen::SparseMatrix<int, Eigen::RowMajor>;
using WeightMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Out-of-vocabulary tokens are ignored.
SparseCounts count_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab);

struct DocTermMatrix {
  CountMatrix counts;  // (num_docs, V)
  std::vector<ReportId> doc_ids;
};

DocTermMatrix doc_term_matrix(const std::vector<std::vector<std::string>>& documents,
                              const std::vector<ReportId>& doc_ids, const Vocabulary& vocab);
DocTermMatrix doc_term_matrix(const Corpus& corpus, const Vocabulary& vocab,
                              const StopWords& stopwords = default_stopwords());

// Sparse triplets `doc,term,count` with a header line; doc is the report id.
void save_doc_term_matrix(const DocTermMatrix& dtm, const std::filesystem::path& path);

struct TfidfMatrix {
  WeightMatrix weights;       // rows L2-normalized, zero rows kept
  Eigen::VectorXd idf;        // ln((1+N)/(1+df)) + 1
  std::vector<ReportId> doc_ids;
};

TfidfMatrix tfidf(const DocTermMatrix& dtm);
// Weights with a previously fitted idf (e.g. held-out documents).
TfidfMatrix tfidf(const DocTermMatrix& dtm, const Eigen::VectorXd& idf);

// Everything the downstream stages need from one pass over a corpus.
struct PreparedText {
  Vocabulary vocab;
  DocTermMatrix dtm;
  TfidfMatrix tfidf;
};

PreparedText prepare_text(const Corpus& corpus, const VocabularyOptions& options = {},
                          const StopWords& stopwords = default_stopwords());

}  // namespace dupdetect
