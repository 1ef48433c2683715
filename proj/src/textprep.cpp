#include "dupdetect/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dupdetect/error.hpp"
#include "dupdetect/hash.hpp"
#include "dupdetect/porter.hpp"

namespace dupdetect {

const StopWords& default_stopwords() {
  static const StopWords words = {
      "a",       "about",    "above",     "after",     "again",      "against",  "all",      "am",
      "an",      "and",      "any",       "are",       "as",         "at",       "be",       "because",
      "been",    "before",   "being",     "below",     "between",    "both",     "but",      "by",
      "can",     "could",    "did",       "do",        "does",       "doing",    "down",     "during",
      "each",    "few",      "for",       "from",      "further",    "had",      "has",      "have",
      "having",  "he",       "her",       "here",      "hers",       "herself",  "him",      "himself",
      "his",     "how",      "i",         "if",        "in",         "into",     "is",       "it",
      "its",     "itself",   "just",      "me",        "more",       "most",     "my",       "myself",
      "no",      "nor",      "not",       "now",       "of",         "off",      "on",       "once",
      "only",    "or",       "other",     "ought",     "our",        "ours",     "ourselves", "out",
      "over",    "own",      "same",      "she",       "should",     "so",       "some",     "such",
      "than",    "that",     "the",       "their",     "theirs",     "them",     "themselves", "then",
      "there",   "these",    "they",      "this",      "those",      "through",  "to",       "too",
      "under",   "until",    "up",        "very",      "was",        "we",       "were",     "what",
      "when",    "where",    "which",     "while",     "who",        "whom",     "why",      "will",
      "with",    "would",    "you",       "your",      "yours",      "yourself", "yourselves", "also",
      "among",   "upon",     "via",       "yet",       "may",        "might",    "must",     "shall",
      "cannot",  "within",   "without",   "across",    "along",      "around",   "although", "though",
      "however", "whether",  "either",    "neither",   "every",      "many",     "much",     "several",
      "another", "others",   "whose",     "whatever",  "whenever",   "wherever", "whichever", "us",
      "let",     "get",      "got",       "s",         "t",          "d",        "ll",       "m",
      "re",      "ve",       "don",       "isn",       "doesn",      "didn",
  };
  return words;
}

std::string full_text(const BugReport& report) { return report.summary + " " + report.description; }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string stem(std::string_view token) {
  std::string current(token);
  // Chains settle within a handful of passes on English text.
  for (int pass = 0; pass < 16; ++pass) {
    std::string next = porter_stem(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::vector<std::string> analyze(std::string_view text, const StopWords& stopwords) {
  std::vector<std::string> out;
  for (auto& token : tokenize(text)) {
    if (stopwords.contains(token)) continue;
    out.push_back(stem(token));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::int64_t> document_frequency,
                       std::int64_t num_documents)
    : tokens_(std::move(tokens)), df_(std::move(document_frequency)), num_documents_(num_documents) {
  if (tokens_.size() != df_.size()) throw ShapeMismatch("vocabulary tokens vs document frequencies");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

int Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

std::string Vocabulary::content_hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined.push_back('\n');
  }
  return sha256_hex(joined);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\t' << df_[i] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::vector<std::int64_t> df;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    std::istringstream fields(line);
    std::string token;
    std::size_t index = 0;
    std::int64_t freq = 0;
    if (!std::getline(fields, token, '\t') || !(fields >> index >> freq)) throw ParseError(row, "<line>", line);
    if (index != tokens.size()) throw ParseError(row, "index", "indices must be dense and in order");
    tokens.push_back(std::move(token));
    df.push_back(freq);
  }
  // The TSV layout does not carry the corpus size.
  return Vocabulary(std::move(tokens), std::move(df), 0);
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& documents, const VocabularyOptions& options,
                            const StopWords& stopwords) {
  if (documents.empty()) throw EmptyCorpus();
  struct Stats {
    std::int64_t df = 0;
    std::int64_t total = 0;
  };
  std::map<std::string, Stats, std::less<>> stats;
  for (const auto& doc : documents) {
    std::set<std::string_view> seen;
    for (const auto& token : doc) {
      auto& s = stats[token];
      ++s.total;
      if (seen.insert(token).second) ++s.df;
    }
  }
  const auto n = static_cast<double>(documents.size());
  std::vector<std::string> tokens;
  std::vector<std::int64_t> df;
  for (const auto& [token, s] : stats) {
    if (stopwords.contains(token)) continue;
    if (static_cast<double>(s.df) / n > options.max_doc_fraction) continue;
    if (s.total < options.min_total_count) continue;
    tokens.push_back(token);
    df.push_back(s.df);
  }
  if (tokens.empty()) throw EmptyVocabulary();
  return Vocabulary(std::move(tokens), std::move(df), static_cast<std::int64_t>(documents.size()));
}

namespace {

std::vector<std::vector<std::string>> analyze_corpus(const Corpus& corpus, const StopWords& stopwords) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& r : corpus.reports()) docs.push_back(analyze(full_text(r), stopwords));
  return docs;
}

}  // namespace

Vocabulary build_vocabulary(const Corpus& corpus, const VocabularyOptions& options, const StopWords& stopwords) {
  if (corpus.empty()) throw EmptyCorpus();
  return build_vocabulary(analyze_corpus(corpus, stopwords), options, stopwords);
}

SparseCounts count_vector(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::map<int, int> counts;
  for (const auto& t : tokens) {
    const int idx = vocab.index_of(t);
    if (idx >= 0) ++counts[idx];
  }
  SparseCounts v(static_cast<Eigen::Index>(vocab.size()));
  v.reserve(static_cast<Eigen::Index>(counts.size()));
  for (const auto& [idx, c] : counts) v.insertBack(idx) = c;
  return v;
}

DocTermMatrix doc_term_matrix(const std::vector<std::vector<std::string>>& documents,
                              const std::vector<ReportId>& doc_ids, const Vocabulary& vocab) {
  if (documents.size() != doc_ids.size()) throw ShapeMismatch("documents vs doc ids");
  std::vector<Eigen::Triplet<int>> triplets;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    const auto row = count_vector(documents[d], vocab);
    for (SparseCounts::InnerIterator it(row); it; ++it)
      triplets.emplace_back(static_cast<int>(d), static_cast<int>(it.index()), it.value());
  }
  DocTermMatrix dtm;
  dtm.counts.resize(static_cast<Eigen::Index>(documents.size()), static_cast<Eigen::Index>(vocab.size()));
  dtm.counts.setFromTriplets(triplets.begin(), triplets.end());
  dtm.counts.makeCompressed();
  dtm.doc_ids = doc_ids;
  return dtm;
}

DocTermMatrix doc_term_matrix(const Corpus& corpus, const Vocabulary& vocab, const StopWords& stopwords) {
  return doc_term_matrix(analyze_corpus(corpus, stopwords), corpus.ids(), vocab);
}

void save_doc_term_matrix(const DocTermMatrix& dtm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "doc,term,count\n";
  for (Eigen::Index d = 0; d < dtm.counts.outerSize(); ++d)
    for (CountMatrix::InnerIterator it(dtm.counts, d); it; ++it)
      out << dtm.doc_ids[static_cast<std::size_t>(d)] << ',' << it.col() << ',' << it.value() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

TfidfMatrix tfidf(const DocTermMatrix& dtm) {
  const Eigen::Index n_docs = dtm.counts.rows();
  const Eigen::Index n_terms = dtm.counts.cols();
  if (n_docs == 0) throw EmptyMatrix();
  Eigen::VectorXd df = Eigen::VectorXd::Zero(n_terms);
  for (Eigen::Index d = 0; d < n_docs; ++d)
    for (CountMatrix::InnerIterator it(dtm.counts, d); it; ++it) df[it.col()] += 1.0;
  return tfidf(dtm, (((1.0 + static_cast<double>(n_docs)) / (1.0 + df.array())).log() + 1.0).matrix());
}

TfidfMatrix tfidf(const DocTermMatrix& dtm, const Eigen::VectorXd& idf) {
  if (idf.size() != dtm.counts.cols())
    throw DimensionMismatch("idf has " + std::to_string(idf.size()) + " terms, matrix has " +
                            std::to_string(dtm.counts.cols()));
  TfidfMatrix out;
  out.idf = idf;
  out.weights = dtm.counts.cast<double>();
  for (Eigen::Index d = 0; d < out.weights.rows(); ++d) {
    double norm2 = 0.0;
    for (WeightMatrix::InnerIterator it(out.weights, d); it; ++it) {
      it.valueRef() *= out.idf[it.col()];
      norm2 += it.value() * it.value();
    }
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (WeightMatrix::InnerIterator it(out.weights, d); it; ++it) it.valueRef() *= inv;
  }
  out.doc_ids = dtm.doc_ids;
  return out;
}

PreparedText prepare_text(const Corpus& corpus, const VocabularyOptions& options, const StopWords& stopwords) {
  if (corpus.empty()) throw EmptyCorpus();
  const auto docs = analyze_corpus(corpus, stopwords);
  PreparedText out;
  out.vocab = build_vocabulary(docs, options, stopwords);
  out.dtm = doc_term_matrix(docs, corpus.ids(), out.vocab);
  out.tfidf = tfidf(out.dtm);
  return out;
}

}  // namespace dupdetect
