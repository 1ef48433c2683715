#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dupdetect/engine.hpp"
#include "dupdetect/kmeans.hpp"
#include "dupdetect/lda.hpp"

namespace dupdetect {

// Writes to a sibling temp file, then renames. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Stable, pretty JSON (2-space indent, trailing newline).
std::string dump_json(const nlohmann::ordered_json& j);

// Rows Accuracy, Binary Accuracy, Recall, Precision, F1 Score; one column per
// report, values in percent.
std::string threshold_table(const std::vector<EvalReport>& reports);

// Recall-Rate@k and Precision-Rate@k rows, then mean average precision.
std::string topk_table(const EvalReport& report);

// `delta,accuracy,binary_accuracy,recall,precision,f1`
std::string thresholds_csv(const std::vector<EvalReport>& reports);

// `k,recall_rate,precision_rate`
std::string topk_csv(const EvalReport& report);

// Ten highest-probability words per topic.
std::string topics_text(const TopicModel& model, const Vocabulary& vocab, std::size_t words = 10);

}  // namespace dupdetect
