#include "dupdetect/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dupdetect/error.hpp"
#include "dupdetect/rng.hpp"

namespace dupdetect {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

struct RowFailure {
  std::string field;
  std::string message;
};

std::optional<std::int64_t> parse_int(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  // Spreadsheet exports sometimes render integer ids as "123.0".
  if (s.size() > 2 && s.ends_with(".0")) s.remove_suffix(2);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool is_null_text(std::string_view s) {
  return s.empty() || s == "null" || s == "NULL" || s == "NaN" || s == "nan" || s == "None";
}

void check_report(const BugReport& r) {
  if (r.id <= 0) throw RowFailure{"id", "id must be a positive integer"};
  if (r.dup_of && *r.dup_of == r.id) throw RowFailure{"dup_of", "report cannot duplicate itself"};
  if (r.dup_of && *r.dup_of <= 0) throw RowFailure{"dup_of", "dup_of must be a positive integer"};
}

BugReport report_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw RowFailure{"<record>", "record is not a JSON object"};
  auto required_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) throw RowFailure{key, "missing"};
    if (!it->is_string()) throw RowFailure{key, "expected string"};
    return it->get<std::string>();
  };
  BugReport r;
  auto id = j.find("id");
  if (id == j.end() || id->is_null()) throw RowFailure{"id", "missing"};
  if (!id->is_number_integer()) throw RowFailure{"id", "expected integer"};
  r.id = id->get<std::int64_t>();
  try {
    r.created_at = parse_timestamp(required_string("created_at"));
  } catch (const DataError& e) {
    throw RowFailure{"created_at", e.what()};
  }
  r.summary = required_string("summary");
  r.description = required_string("description");
  r.component = required_string("component");
  r.product = required_string("product");
  r.status = required_string("status");
  if (auto it = j.find("resolution"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw RowFailure{"resolution", "expected string or null"};
    r.resolution = it->get<std::string>();
  }
  if (auto it = j.find("dup_of"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw RowFailure{"dup_of", "expected integer or null"};
    r.dup_of = it->get<std::int64_t>();
  }
  r.is_duplicate = r.dup_of.has_value();
  check_report(r);
  return r;
}

ordered_json report_to_json(const BugReport& r) {
  ordered_json j;
  j["id"] = r.id;
  j["created_at"] = format_timestamp(r.created_at);
  j["summary"] = r.summary;
  j["description"] = r.description;
  j["component"] = r.component;
  j["product"] = r.product;
  j["status"] = r.status;
  j["resolution"] = r.resolution ? ordered_json(*r.resolution) : ordered_json(nullptr);
  j["dup_of"] = r.dup_of ? ordered_json(*r.dup_of) : ordered_json(nullptr);
  return j;
}

// Drops rows with ids already seen; the first occurrence wins.
LoadResult finish_load(std::vector<std::pair<std::size_t, BugReport>> rows, std::vector<RowDiagnostic> rejected,
                       std::string source) {
  std::vector<BugReport> kept;
  kept.reserve(rows.size());
  std::unordered_map<ReportId, std::size_t> seen;
  for (auto& [row, report] : rows) {
    if (seen.contains(report.id)) {
      rejected.push_back({row, "id", "duplicate id " + std::to_string(report.id)});
      continue;
    }
    seen.emplace(report.id, row);
    kept.push_back(std::move(report));
  }
  if (kept.empty()) throw EmptyCorpus();
  std::sort(rejected.begin(), rejected.end(), [](const auto& a, const auto& b) { return a.row < b.row; });
  return LoadResult{Corpus(std::move(kept), std::move(source)), std::move(rejected)};
}

// RFC 4180 records: quoted fields may contain commas, quotes ("") and newlines.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        record.clear();
        field.clear();
        any = false;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string canonical_column(std::string_view name) {
  std::string n;
  for (char c : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  static const std::unordered_map<std::string, std::string> aliases = {
      {"issue_id", "id"},         {"bug_id", "id"},        {"created_time", "created_at"},
      {"creation_ts", "created_at"}, {"title", "summary"}, {"short_desc", "summary"},
      {"duplicated_issue", "dup_of"}, {"dup_id", "dup_of"}, {"bug_status", "status"},
  };
  if (auto it = aliases.find(n); it != aliases.end()) return it->second;
  return n;
}

int days_from_civil(int y, unsigned m, unsigned d) {
  return static_cast<int>(
      std::chrono::sys_days(std::chrono::year(y) / std::chrono::month(m) / std::chrono::day(d)).time_since_epoch().count());
}

}  // namespace

StatusKind BugReport::status_kind() const {
  const std::string s = upper(status);
  if (s == "NEW") return StatusKind::kNew;
  if (s == "RESOLVED_FIXED") return StatusKind::kResolvedFixed;
  if (s == "RESOLVED" && resolution && upper(*resolution) == "FIXED") return StatusKind::kResolvedFixed;
  return StatusKind::kOther;
}

Corpus::Corpus(std::vector<BugReport> reports, std::string source)
    : reports_(std::move(reports)), source_(std::move(source)) {
  std::stable_sort(reports_.begin(), reports_.end(), [](const BugReport& a, const BugReport& b) {
    return a.created_at != b.created_at ? a.created_at < b.created_at : a.id < b.id;
  });
  index_.reserve(reports_.size());
  for (std::size_t i = 0; i < reports_.size(); ++i) {
    const auto& r = reports_[i];
    if (r.dup_of && *r.dup_of == r.id) throw DataError("report " + std::to_string(r.id) + " duplicates itself");
    if (!index_.emplace(r.id, i).second) throw DataError("duplicate report id " + std::to_string(r.id));
  }
}

const BugReport* Corpus::find(ReportId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &reports_[it->second];
}

const BugReport& Corpus::at(ReportId id) const {
  if (const auto* r = find(id)) return *r;
  throw IndexError("report id " + std::to_string(id));
}

std::size_t Corpus::index_of(ReportId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw IndexError("report id " + std::to_string(id));
  return it->second;
}

std::vector<ReportId> Corpus::ids() const {
  std::vector<ReportId> out;
  out.reserve(reports_.size());
  for (const auto& r : reports_) out.push_back(r.id);
  return out;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "csv") return CorpusFormat::kCsv;
  if (name == "bin") return CorpusFormat::kBinary;
  throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected jsonl, csv or bin)");
}

Timestamp parse_timestamp(std::string_view text) {
  auto fail = [&]() -> Timestamp { throw DataError("invalid ISO 8601 timestamp '" + std::string(text) + "'"); };
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  auto num = [&](std::size_t pos, std::size_t len) -> int {
    if (pos + len > s.size()) fail();
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) fail();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') fail();
  const int year = num(0, 4);
  const int month = num(5, 2);
  const int day = num(8, 2);
  int hour = 0, minute = 0, second = 0;
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    hour = num(pos + 1, 2);
    if (pos + 3 >= s.size() || s[pos + 3] != ':') fail();
    minute = num(pos + 4, 2);
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      second = num(pos + 1, 2);
      pos += 3;
    }
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
      ++pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    }
  }
  while (pos < s.size() && s[pos] == ' ') ++pos;
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      // UTC
    } else if (s[pos] == '+' || s[pos] == '-') {
      const int sign = s[pos] == '-' ? -1 : 1;
      const int oh = num(pos + 1, 2);
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      const int om = mpos < s.size() ? num(mpos, 2) : 0;
      if (mpos < s.size() && mpos + 2 != s.size()) fail();
      offset_minutes = sign * (oh * 60 + om);
    } else {
      fail();
    }
  }
  const std::chrono::year_month_day ymd{std::chrono::year(year), std::chrono::month(month), std::chrono::day(day)};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) fail();
  const std::int64_t secs = static_cast<std::int64_t>(days_from_civil(year, month, day)) * 86400 + hour * 3600 +
                            minute * 60 + second - offset_minutes * 60;
  return Timestamp(std::chrono::seconds(secs));
}

std::string format_timestamp(Timestamp t) {
  const auto days = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

LoadResult parse_jsonl(std::string_view text, std::string source) {
  std::vector<std::pair<std::size_t, BugReport>> rows;
  std::vector<RowDiagnostic> rejected;
  std::size_t row = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    ++row;
    try {
      const auto j = nlohmann::json::parse(line);
      rows.emplace_back(row, report_from_json(j));
    } catch (const nlohmann::json::parse_error& e) {
      rejected.push_back({row, "<record>", e.what()});
    } catch (const RowFailure& f) {
      rejected.push_back({row, f.field, f.message});
    }
  }
  return finish_load(std::move(rows), std::move(rejected), std::move(source));
}

LoadResult parse_csv(std::string_view text, std::string source) {
  auto records = split_csv(text);
  if (records.empty()) throw EmptyCorpus();
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < records[0].size(); ++i) col.emplace(canonical_column(records[0][i]), i);
  for (const char* needed : {"id", "created_at", "summary", "description", "component", "status"}) {
    if (!col.contains(needed)) throw ParseError(0, needed, "column missing from CSV header");
  }
  std::vector<std::pair<std::size_t, BugReport>> rows;
  std::vector<RowDiagnostic> rejected;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto cell = [&](const char* name) -> std::optional<std::string_view> {
      auto it = col.find(name);
      if (it == col.end() || it->second >= rec.size()) return std::nullopt;
      return std::string_view(rec[it->second]);
    };
    auto required = [&](const char* name) -> std::string {
      auto v = cell(name);
      if (!v) throw RowFailure{name, "missing"};
      return std::string(*v);
    };
    try {
      BugReport b;
      const auto id_text = required("id");
      const auto id = parse_int(id_text);
      if (!id) throw RowFailure{"id", "expected integer, got '" + id_text + "'"};
      b.id = *id;
      try {
        b.created_at = parse_timestamp(required("created_at"));
      } catch (const DataError& e) {
        throw RowFailure{"created_at", e.what()};
      }
      b.summary = required("summary");
      if (b.summary.empty()) throw RowFailure{"summary", "missing"};
      b.description = required("description");
      b.component = required("component");
      b.product = std::string(cell("product").value_or(""));
      b.status = required("status");
      if (auto res = cell("resolution"); res && !is_null_text(*res)) b.resolution = std::string(*res);
      if (auto dup = cell("dup_of"); dup && !is_null_text(*dup)) {
        const auto d = parse_int(*dup);
        if (!d) throw RowFailure{"dup_of", "expected integer, got '" + std::string(*dup) + "'"};
        b.dup_of = *d;
      }
      b.is_duplicate = b.dup_of.has_value();
      check_report(b);
      rows.emplace_back(r, std::move(b));
    } catch (const RowFailure& f) {
      rejected.push_back({r, f.field, f.message});
    }
  }
  return finish_load(std::move(rows), std::move(rejected), std::move(source));
}

LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  const std::string bytes = read_file(path);
  switch (format) {
    case CorpusFormat::kJsonl:
      return parse_jsonl(bytes, path.string());
    case CorpusFormat::kCsv:
      return parse_csv(bytes, path.string());
    case CorpusFormat::kBinary: {
      if (bytes.empty()) throw EmptyCorpus();
      nlohmann::json arr;
      try {
        arr = nlohmann::json::from_cbor(bytes);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, "<file>", e.what());
      }
      if (!arr.is_array()) throw ParseError(0, "<file>", "expected an array of records");
      std::vector<std::pair<std::size_t, BugReport>> rows;
      std::vector<RowDiagnostic> rejected;
      for (std::size_t i = 0; i < arr.size(); ++i) {
        try {
          rows.emplace_back(i + 1, report_from_json(arr[i]));
        } catch (const RowFailure& f) {
          rejected.push_back({i + 1, f.field, f.message});
        }
      }
      return finish_load(std::move(rows), std::move(rejected), path.string());
    }
  }
  throw ConfigError("unsupported corpus format");
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.reports()) {
    out += report_to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kJsonl:
      write_file(path, to_jsonl(corpus));
      return;
    case CorpusFormat::kBinary: {
      ordered_json arr = ordered_json::array();
      for (const auto& r : corpus.reports()) arr.push_back(report_to_json(r));
      const auto bytes = ordered_json::to_cbor(arr);
      write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
      return;
    }
    case CorpusFormat::kCsv: {
      auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
          if (c == '"') q.push_back('"');
          q.push_back(c);
        }
        return q + "\"";
      };
      std::string out = "id,created_at,summary,description,component,product,status,resolution,dup_of\n";
      for (const auto& r : corpus.reports()) {
        out += std::to_string(r.id) + "," + format_timestamp(r.created_at) + "," + quote(r.summary) + "," +
               quote(r.description) + "," + quote(r.component) + "," + quote(r.product) + "," + quote(r.status) +
               "," + (r.resolution ? quote(*r.resolution) : std::string()) + "," +
               (r.dup_of ? std::to_string(*r.dup_of) : std::string()) + "\n";
      }
      write_file(path, out);
      return;
    }
  }
}

LinkResult apply_links(const Corpus& corpus, std::string_view link_text) {
  std::vector<BugReport> reports = corpus.reports();
  std::unordered_map<ReportId, std::size_t> pos;
  for (std::size_t i = 0; i < reports.size(); ++i) pos.emplace(reports[i].id, i);
  std::vector<RowDiagnostic> rejected;
  std::size_t row = 0;
  std::istringstream in{std::string(link_text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++row;
    const auto comma = line.find(',');
    const auto dup = comma == std::string::npos ? std::nullopt : parse_int(std::string_view(line).substr(0, comma));
    const auto master = comma == std::string::npos ? std::nullopt : parse_int(std::string_view(line).substr(comma + 1));
    if (!dup || !master) {
      // Tolerate a "dup_id,master_id" header line.
      if (row == 1 && line.find("dup") != std::string::npos) continue;
      rejected.push_back({row, "<link>", "expected 'dup_id,master_id', got '" + line + "'"});
      continue;
    }
    if (*dup == *master) {
      rejected.push_back({row, "dup_id", "self link " + std::to_string(*dup)});
      continue;
    }
    auto d = pos.find(*dup);
    if (d == pos.end() || !pos.contains(*master)) {
      rejected.push_back({row, d == pos.end() ? "dup_id" : "master_id",
                          "dangling link " + std::to_string(*dup) + "->" + std::to_string(*master)});
      continue;
    }
    auto& report = reports[d->second];
    if (report.dup_of && *report.dup_of != *master) {
      rejected.push_back({row, "dup_id",
                          "report " + std::to_string(*dup) + " already links to " + std::to_string(*report.dup_of)});
      continue;
    }
    report.dup_of = *master;
    report.is_duplicate = true;
  }
  return LinkResult{Corpus(std::move(reports), corpus.source()), std::move(rejected)};
}

LinkResult apply_link_file(const Corpus& corpus, const std::filesystem::path& path) {
  return apply_links(corpus, read_file(path));
}

double duplicate_share(const Corpus& corpus) {
  if (corpus.empty()) throw EmptyCorpus();
  const auto dups = std::count_if(corpus.reports().begin(), corpus.reports().end(),
                                  [](const BugReport& r) { return r.is_duplicate; });
  return static_cast<double>(dups) / static_cast<double>(corpus.size());
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

DuplicateGraph resolve_masters(const Corpus& corpus) {
  const auto& reports = corpus.reports();
  UnionFind uf(reports.size());
  DuplicateGraph g;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!r.dup_of) continue;
    const BugReport* target = corpus.find(*r.dup_of);
    if (!target) {
      g.dangling_.push_back(r.id);
      continue;
    }
    uf.unite(i, corpus.index_of(target->id));
  }
  std::unordered_map<std::size_t, ReportId> root_master;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto root = uf.find(i);
    auto [it, inserted] = root_master.emplace(root, reports[i].id);
    if (!inserted) it->second = std::min(it->second, reports[i].id);
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const ReportId master = root_master.at(uf.find(i));
    g.master_.emplace(reports[i].id, master);
    g.members_[master].push_back(reports[i].id);
  }
  for (auto& [master, members] : g.members_) std::sort(members.begin(), members.end());
  std::sort(g.dangling_.begin(), g.dangling_.end());
  return g;
}

ReportId DuplicateGraph::master_of(ReportId id) const {
  auto it = master_.find(id);
  if (it == master_.end()) throw MissingGroundTruth(id);
  return it->second;
}

std::vector<ReportId> DuplicateGraph::partners_of(ReportId id) const {
  const auto& members = members_.at(master_of(id));
  std::vector<ReportId> out;
  out.reserve(members.size() - 1);
  for (ReportId m : members)
    if (m != id) out.push_back(m);
  return out;
}

bool DuplicateGraph::has_partners(ReportId id) const { return members_.at(master_of(id)).size() > 1; }

bool DuplicateGraph::are_partners(ReportId a, ReportId b) const {
  return a != b && master_of(a) == master_of(b);
}

SplitScheme parse_split_scheme(std::string_view name) {
  if (name == "train75_test25") return SplitScheme::kTrain75Test25;
  if (name == "test25_then_train80_val20") return SplitScheme::kTest25Train80Val20;
  throw ConfigError("unknown split scheme '" + std::string(name) + "'");
}

std::string_view to_string(SplitScheme scheme) {
  return scheme == SplitScheme::kTrain75Test25 ? "train75_test25" : "test25_then_train80_val20";
}

SplitCorpus split(const Corpus& corpus, SplitScheme scheme, std::uint64_t seed) {
  if (corpus.empty()) throw EmptyCorpus();
  std::vector<ReportId> ids = corpus.ids();
  Rng rng(seed);
  rng.shuffle(std::span<ReportId>(ids));
  const std::size_t n = ids.size();
  const std::size_t n_test = n / 4;
  SplitCorpus out;
  out.seed = seed;
  out.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::size_t cursor = n_test;
  if (scheme == SplitScheme::kTest25Train80Val20) {
    const std::size_t n_val = (n - n_test) / 5;
    out.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(cursor),
                          ids.begin() + static_cast<std::ptrdiff_t>(cursor + n_val));
    cursor += n_val;
  }
  out.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(cursor), ids.end());
  for (auto* part : {&out.train, &out.validation, &out.test}) std::sort(part->begin(), part->end());
  return out;
}

Corpus filter_resolved_fixed(const Corpus& corpus) {
  std::vector<BugReport> kept;
  for (const auto& r : corpus.reports())
    if (r.status_kind() == StatusKind::kResolvedFixed) kept.push_back(r);
  return Corpus(std::move(kept), corpus.source());
}

Corpus subset(const Corpus& corpus, const std::vector<ReportId>& ids) {
  std::vector<BugReport> kept;
  kept.reserve(ids.size());
  for (ReportId id : ids) kept.push_back(corpus.at(id));
  return Corpus(std::move(kept), corpus.source());
}

}  // namespace dupdetect
