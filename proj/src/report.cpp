#include "dupdetect/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dupdetect/error.hpp"

namespace dupdetect {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump_json(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::string threshold_table(const std::vector<EvalReport>& reports) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-16s", "Metric");
  out += buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, " %14s", (std::to_string(static_cast<int>(r.delta * 100.0 + 0.5)) + "% threshold").c_str());
    out += buf;
  }
  out += '\n';
  const std::pair<const char*, double EvalReport::*> rows[] = {{"Accuracy", &EvalReport::accuracy},
                                                               {"Binary Accuracy", &EvalReport::binary_accuracy},
                                                               {"Recall", &EvalReport::recall},
                                                               {"Precision", &EvalReport::precision},
                                                               {"F1 Score", &EvalReport::f1}};
  for (const auto& [label, member] : rows) {
    std::snprintf(buf, sizeof buf, "%-16s", label);
    out += buf;
    for (const auto& r : reports) {
      std::snprintf(buf, sizeof buf, " %14.2f", 100.0 * (r.*member));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string topk_table(const EvalReport& report) {
  std::string out;
  char buf[96];
  if (!report.mean_average_precision) {
    out += "no query has a duplicate partner in its searched pool\n";
    return out;
  }
  for (const auto& [k, v] : report.recall_at_k) {
    std::snprintf(buf, sizeof buf, "%-22s %8.2f%%\n", ("Recall-Rate@" + std::to_string(k)).c_str(), 100.0 * v);
    out += buf;
  }
  for (const auto& [k, v] : report.precision_at_k) {
    std::snprintf(buf, sizeof buf, "%-22s %8.2f%%\n", ("Precision-Rate@" + std::to_string(k)).c_str(), 100.0 * v);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-22s %8.2f%%\n", "Mean Avg Precision", 100.0 * *report.mean_average_precision);
  out += buf;
  std::snprintf(buf, sizeof buf, "(%zu eligible queries, %zu excluded)\n", report.topk_eligible, report.topk_excluded);
  out += buf;
  return out;
}

std::string thresholds_csv(const std::vector<EvalReport>& reports) {
  std::string out = "delta,accuracy,binary_accuracy,recall,precision,f1\n";
  char buf[160];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.delta, r.accuracy, r.binary_accuracy,
                  r.recall, r.precision, r.f1);
    out += buf;
  }
  return out;
}

std::string topk_csv(const EvalReport& report) {
  std::string out = "k,recall_rate,precision_rate\n";
  char buf[96];
  for (const auto& [k, v] : report.recall_at_k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", k, v, report.precision_at_k.at(k));
    out += buf;
  }
  return out;
}

std::string topics_text(const TopicModel& model, const Vocabulary& vocab, std::size_t words) {
  std::string out;
  for (int t = 0; t < model.k(); ++t) {
    out += "topic " + std::to_string(t) + ":";
    for (const auto& w : top_words(model, t, words)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", w.probability);
      out += " " + vocab.token(w.word) + " (" + buf + ")";
    }
    out += '\n';
  }
  return out;
}

}  // namespace dupdetect
