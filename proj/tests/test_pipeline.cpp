#include <doctest.h>

#include "dupdetect/error.hpp"
#include "dupdetect/hash.hpp"
#include "dupdetect/pipeline.hpp"
#include "dupdetect/report.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace dupdetect;
using testing::TempDir;

namespace {

struct Workspace {
  TempDir dir;
  std::filesystem::path dataset;

  explicit Workspace(std::size_t reports = 300) : dataset(dir / "corpus.jsonl") {
    save_corpus(testing::synthetic_corpus({.reports = reports}), dataset, CorpusFormat::kJsonl);
  }

  RunConfig config(const std::string& out) const {
    RunConfig c;
    c.dataset = dataset;
    c.out = dir / out;
    c.lda_iterations = 40;
    c.k_topics = 4;
    return c;
  }
};

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(testing::read_text(p)); }

std::vector<std::string> stage_names(const RunManifest& m) {
  std::vector<std::string> names;
  for (const auto& s : m.stages) names.push_back(s.stage);
  return names;
}

}  // namespace

TEST_CASE("evaluate runs end to end and records a manifest") {
  Workspace ws;
  const auto cfg = ws.config("run");
  const auto m = run_pipeline(cfg, Command::kEvaluate);
  CHECK(m.status == "ok");
  CHECK(stage_names(m) ==
        std::vector<std::string>{"ingest", "preprocess", "embed", "topics", "partition", "detect", "evaluate"});

  const auto report = read_json(cfg.out / "report.json");
  REQUIRE(report["evaluations"].size() == 1);
  const auto& e = report["evaluations"][0];
  CHECK(e["delta"] == 0.95);
  CHECK(e["queries"] == 300);
  CHECK(report["corpus"]["reports"] == 300);
  CHECK(report["partition"]["groups"].get<int>() <= 4);
  CHECK(e["topk"]["recall_at_k"].size() == 4);

  const auto manifest = read_json(cfg.out / "manifest.json");
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["config_hash"] == cfg.hash());
  CHECK(manifest["inputs"][ws.dataset.string()] == sha256_file(ws.dataset));
  for (const char* f : {"report.json", "report.txt", "topk.txt", "topk.csv"})
    CHECK(manifest["outputs"][f] == sha256_file(cfg.out / f));
  CHECK_FALSE(std::filesystem::exists(cfg.out / ".dupdetect.lock"));

  const auto table = testing::read_text(cfg.out / "report.txt");
  CHECK(table.find("Binary Accuracy") != std::string::npos);
}

TEST_CASE("same config gives byte-identical reports") {
  Workspace ws;
  const auto a = ws.config("a");
  const auto b = ws.config("b");
  CHECK(a.hash() == b.hash());
  run_pipeline(a, Command::kSweep);
  run_pipeline(b, Command::kSweep);
  for (const char* f : {"report.json", "report.txt", "thresholds.csv", "topk.csv"})
    CHECK(testing::read_text(a.out / f) == testing::read_text(b.out / f));
  const auto report = read_json(a.out / "report.json");
  CHECK(report["evaluations"].size() == 3);
  CHECK(testing::read_text(a.out / "thresholds.csv").starts_with("delta,accuracy,binary_accuracy,recall,precision,f1\n"));

  auto other = ws.config("c");
  other.seed = 7;
  CHECK(other.hash() != a.hash());
}

TEST_CASE("every partition strategy runs") {
  Workspace ws(200);
  for (const char* s : {"none", "quarter", "kmeans", "topic"}) {
    auto cfg = ws.config(std::string("s-") + s);
    cfg.set("strategy", s);
    cfg.set("delta", "0.85");
    cfg.set("kmeans_k", "3");
    INFO(s);
    CHECK(run_pipeline(cfg).status == "ok");
    const auto report = read_json(cfg.out / "report.json");
    CHECK(report["partition"]["strategy"] == s);
    CHECK(report["evaluations"][0]["delta"] == 0.85);
  }
  auto causal = ws.config("causal");
  causal.set("causal", "true");
  causal.set("query_split", "train75_test25");
  run_pipeline(causal);
  const auto report = read_json(causal.out / "report.json");
  CHECK(report["evaluations"][0]["queries"] == 50);
}

TEST_CASE("individual commands emit their artifacts") {
  Workspace ws(150);
  struct Case {
    Command command;
    std::vector<std::string> files;
  };
  for (const auto& c : std::vector<Case>{{Command::kIngest, {"corpus.jsonl", "ingest.json"}},
                                         {Command::kPreprocess, {"vocab.tsv", "dtm.csv", "preprocess.json"}},
                                         {Command::kTopics, {"topic_model.json", "topics.txt", "topics.json"}},
                                         {Command::kPartition, {"partition.json"}},
                                         {Command::kEmbed, {"embeddings.bin", "embed.json"}},
                                         {Command::kDetect, {"detections.jsonl"}},
                                         {Command::kElbow, {"elbow.csv", "elbow.json"}}}) {
    const auto name = std::string(to_string(c.command));
    auto cfg = ws.config(name);
    cfg.elbow_max_k = 6;
    INFO(name);
    const auto m = run_pipeline(cfg, c.command);
    for (const auto& f : c.files) {
      CHECK(std::filesystem::exists(cfg.out / f));
      CHECK(m.outputs.contains(f));
    }
  }
  const auto ingest = read_json(ws.dir / "ingest" / "ingest.json");
  CHECK(ingest["reports"] == 150);
  CHECK(ingest["duplicate_share"].get<double>() > 0.0);
  CHECK(testing::read_text(ws.dir / "elbow" / "elbow.csv").starts_with("k,inertia\n2,"));
  const auto detections = testing::read_text(ws.dir / "detect" / "detections.jsonl");
  CHECK(std::count(detections.begin(), detections.end(), '\n') == 150);
}

TEST_CASE("train emits a classification report") {
  Workspace ws(400);
  auto cfg = ws.config("train");
  cfg.set("resolved_fixed_only", "false");
  cfg.set("features", "text+component");
  cfg.set("epochs", "30");
  run_pipeline(cfg, Command::kTrain);
  const auto j = read_json(cfg.out / "classification.json");
  CHECK(j["split"]["test"] == 100);
  CHECK(j["report"]["classes"].size() == 2);
  CHECK(testing::read_text(cfg.out / "classification.txt").find("support") != std::string::npos);
  CHECK(std::filesystem::exists(cfg.out / "model.json"));

  auto nb = ws.config("nb");
  nb.set("resolved_fixed_only", "false");
  nb.set("classifier", "naive_bayes");
  nb.set("per_topic", "true");
  nb.set("min_topic_size", "20");
  run_pipeline(nb, Command::kTrain);
  CHECK(read_json(nb.out / "classification.json").contains("per_topic"));
}

TEST_CASE("external embeddings through an injected transport") {
  Workspace ws(120);
  testing::StubTransport stub([](int, const std::string&, const std::string& body, const HttpHeaders&) {
    return testing::fake_embeddings(body, 16);
  });
  auto cfg = ws.config("ext");
  cfg.set("strategy", "none");
  cfg.set("embedding", "external");
  cfg.set("embed_endpoint", "http://embed.invalid/v1");
  cfg.set("embed_model", "stub");
  PipelineHooks hooks;
  hooks.embed_transport = &stub;
  hooks.sleeper = testing::no_sleep();
  run_pipeline(cfg, Command::kEvaluate, hooks);
  const int first = stub.calls();
  CHECK(first > 0);
  // A second run is served from the cache.
  run_pipeline(cfg, Command::kEvaluate, hooks);
  CHECK(stub.calls() == first);
  CHECK(read_json(cfg.out / "report.json")["evaluations"][0]["metadata"]["provider"].get<std::string>().find("stub") !=
        std::string::npos);
}

TEST_CASE("summarize feeds the summarized subset downstream") {
  Workspace ws(60);
  testing::StubTransport stub([](int, const std::string&, const std::string& body, const HttpHeaders&) {
    const auto text = nlohmann::json::parse(body)["messages"][1]["content"].get<std::string>();
    nlohmann::json j;
    j["choices"] = {{{"message", {{"content", text.substr(0, text.find(' ', 40))}}}}};
    return HttpResponse{200, j.dump()};
  });
  auto cfg = ws.config("sum");
  cfg.set("strategy", "none");
  cfg.set("llm_endpoint", "http://llm.invalid/v1/chat");
  cfg.set("llm_model", "stub");
  cfg.set("max_reports", "40");
  PipelineHooks hooks;
  hooks.llm_transport = &stub;
  hooks.sleeper = testing::no_sleep();
  run_pipeline(cfg, Command::kSummarize, hooks);
  CHECK(stub.calls() == 40);
  const auto report = read_json(cfg.out / "report.json");
  CHECK(report["corpus"]["summarized_subset"]["summarized"] == 40);
  CHECK(report["evaluations"][0]["queries"] == 40);
  CHECK(read_json(cfg.out / "summaries.json")["summaries"].size() == 40);

  auto missing = ws.config("nosum");
  CHECK_THROWS_AS(run_pipeline(missing, Command::kSummarize), ConfigError);
}

TEST_CASE("config parsing and validation") {
  RunConfig c;
  c.set("delta", "0.85, 0.9");
  CHECK(c.deltas == std::vector<double>{0.85, 0.9});
  c.set("topk", "1,3");
  CHECK(c.k_list == std::vector<std::size_t>{1, 3});
  CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("epochs", "-3"), ConfigError);
  CHECK_THROWS_AS(c.set("strategy", "bogus"), ConfigError);
  CHECK_THROWS_AS(c.set("seed", "abc"), ConfigError);

  CHECK(RunConfig{}.deltas_for(Command::kSweep) == std::vector<double>{0.85, 0.90, 0.95});
  CHECK(RunConfig{}.deltas_for(Command::kEvaluate) == std::vector<double>{0.95});

  RunConfig kv;
  apply_config_text(kv, "# baseline\nstrategy = none\ndelta = 0.85\n\nseed=3\n");
  CHECK(kv.strategy == PartitionStrategy::kNone);
  CHECK(kv.seed == 3);
  RunConfig js;
  apply_config_text(js, R"({"strategy": "none", "delta": [0.85], "seed": 3})");
  CHECK(js.hash() == kv.hash());
  CHECK_THROWS_AS(apply_config_text(js, "strategy none"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(js, "{broken"), ConfigError);

  // The output location does not change the hash.
  js.out = "/elsewhere";
  CHECK(js.hash() == kv.hash());

  TempDir dir;
  testing::write_text(dir / "run.conf", "k_topics = 5\nlda_iterations = 10\n");
  CHECK(load_run_config(dir / "run.conf").k_topics == 5);
  CHECK_THROWS_AS(load_run_config(dir / "missing.conf"), ConfigError);
  CHECK(parse_command("sweep") == Command::kSweep);
  CHECK(command_names().size() == 11);
  CHECK_THROWS_AS(parse_command("explode"), ConfigError);
}

TEST_CASE("invalid delta is rejected before any work") {
  Workspace ws(20);
  auto cfg = ws.config("bad");
  cfg.set("delta", "1.5");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(run_pipeline(cfg), ConfigError);
  CHECK_FALSE(std::filesystem::exists(cfg.out));
  cfg.set("delta", "0");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.set("delta", "1.0");
  CHECK_NOTHROW(cfg.validate());
  cfg.k_topics = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidK);
}

TEST_CASE("a locked output directory refuses a second run") {
  Workspace ws(20);
  const auto cfg = ws.config("locked");
  std::filesystem::create_directories(cfg.out);
  testing::write_text(cfg.out / ".dupdetect.lock", "");
  CHECK_THROWS_AS(run_pipeline(cfg, Command::kIngest), ConfigError);
  std::filesystem::remove(cfg.out / ".dupdetect.lock");
  CHECK_NOTHROW(run_pipeline(cfg, Command::kIngest));
}

TEST_CASE("failed stages are recorded in the manifest") {
  Workspace ws(20);
  auto cfg = ws.config("fail");
  cfg.dataset = ws.dir / "nope.jsonl";
  try {
    run_pipeline(cfg);
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::kData);
    CHECK(std::string(e.what()).find("ingest") != std::string::npos);
  }
  const auto m = read_json(cfg.out / "manifest.json");
  CHECK(m["status"] == "failed");
  CHECK(m["failed_stage"] == "ingest");
  CHECK(m["partial"] == true);
  CHECK_FALSE(std::filesystem::exists(cfg.out / ".dupdetect.lock"));

  // Too few reports for the requested number of clusters fails in partition.
  auto km = ws.config("km");
  km.set("strategy", "kmeans");
  km.set("kmeans_k", "50");
  CHECK_THROWS_AS(run_pipeline(km), Error);
  const auto m2 = read_json(km.out / "manifest.json");
  CHECK(m2["failed_stage"] == "partition");
}
