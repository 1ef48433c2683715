#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dupdetect {

using ReportId = std::int64_t;
using Timestamp = std::chrono::sys_seconds;

enum class StatusKind { kNew, kResolvedFixed, kOther };

struct BugReport {
  ReportId id = 0;
  Timestamp created_at{};
  std::string summary;
  std::string description;
  std::string component;
  std::string product;
  // Raw tracker values; status_kind() derives the categorical view.
  std::string status;
  std::optional<std::string> resolution;
  std::optional<ReportId> dup_of;
  bool is_duplicate = false;

  StatusKind status_kind() const;

  friend bool operator==(const BugReport&, const BugReport&) = default;
};

// Reports ordered by (created_at, id); ids unique.
class Corpus {
 public:
  Corpus() = default;
  // Sorts and validates. Throws DataError on duplicate ids or self-links.
  explicit Corpus(std::vector<BugReport> reports, std::string source = {});

  const std::vector<BugReport>& reports() const noexcept { return reports_; }
  const std::string& source() const noexcept { return source_; }
  std::size_t size() const noexcept { return reports_.size(); }
  bool empty() const noexcept { return reports_.empty(); }

  const BugReport& at(ReportId id) const;
  const BugReport* find(ReportId id) const;
  // Position of a report in corpus order.
  std::size_t index_of(ReportId id) const;
  std::vector<ReportId> ids() const;

 private:
  std::vector<BugReport> reports_;
  std::string source_;
  std::unordered_map<ReportId, std::size_t> index_;
};

enum class CorpusFormat { kJsonl, kCsv, kBinary };

CorpusFormat parse_corpus_format(std::string_view name);

// A rejected input row (1-based record number, excluding any CSV header).
struct RowDiagnostic {
  std::size_t row = 0;
  std::string field;
  std::string message;
};

struct LoadResult {
  Corpus corpus;
  std::vector<RowDiagnostic> rejected;
};

// Malformed rows are skipped and listed in `rejected`.
// Throws IoError if unreadable, EmptyCorpus if no valid row remains.
LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format);
LoadResult parse_jsonl(std::string_view text, std::string source = {});
LoadResult parse_csv(std::string_view text, std::string source = {});

std::string to_jsonl(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

// Applies a sidecar `dup_id,master_id` link file. Links whose endpoints are
// absent are returned as diagnostics and dropped.
struct LinkResult {
  Corpus corpus;
  std::vector<RowDiagnostic> rejected;
};
LinkResult apply_link_file(const Corpus& corpus, const std::filesystem::path& path);
LinkResult apply_links(const Corpus& corpus, std::string_view link_text);

Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

double duplicate_share(const Corpus& corpus);

// Union-find closure of dup_of links; the smallest id in each component is master.
class DuplicateGraph {
 public:
  ReportId master_of(ReportId id) const;
  // Other members of id's component (never contains id itself).
  std::vector<ReportId> partners_of(ReportId id) const;
  bool has_partners(ReportId id) const;
  bool contains(ReportId id) const { return master_.contains(id); }
  bool are_partners(ReportId a, ReportId b) const;

  const std::vector<ReportId>& dangling_links() const noexcept { return dangling_; }
  const std::map<ReportId, std::vector<ReportId>>& groups() const noexcept { return members_; }

 private:
  friend DuplicateGraph resolve_masters(const Corpus& corpus);
  std::unordered_map<ReportId, ReportId> master_;
  std::map<ReportId, std::vector<ReportId>> members_;  // master -> sorted members
  std::vector<ReportId> dangling_;
};

// Dangling links (dup_of pointing at an absent id) are recorded and dropped.
DuplicateGraph resolve_masters(const Corpus& corpus);

enum class SplitScheme { kTrain75Test25, kTest25Train80Val20 };

SplitScheme parse_split_scheme(std::string_view name);
std::string_view to_string(SplitScheme scheme);

struct SplitCorpus {
  std::vector<ReportId> train;
  std::vector<ReportId> validation;
  std::vector<ReportId> test;
  std::uint64_t seed = 0;
};

SplitCorpus split(const Corpus& corpus, SplitScheme scheme, std::uint64_t seed);

Corpus filter_resolved_fixed(const Corpus& corpus);
Corpus subset(const Corpus& corpus, const std::vector<ReportId>& ids);

}  // namespace dupdetect
