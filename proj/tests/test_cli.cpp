#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>

#include "dupdetect/corpus.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

namespace {

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr
};

Result run(const std::string& args) {
  const std::string cmd = std::string(DUPDETECT_CLI) + " " + args + " 2>&1";
  Result r;
  std::FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.output.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST_CASE("help lists every subcommand") {
  const auto r = run("--help");
  CHECK(r.code == 0);
  for (const char* c : {"ingest", "preprocess", "topics", "partition", "embed", "detect", "evaluate", "sweep", "train",
                        "elbow", "summarize"})
    CHECK(r.output.find(std::string("  ") + c) != std::string::npos);
  CHECK(run("evaluate --help").output.find("--delta") != std::string::npos);
}

TEST_CASE("usage errors exit with the config code") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("evaluate --no-such-flag").code == 2);

  testing::TempDir dir;
  const auto r = run("evaluate --dataset x.jsonl --delta 1.5 --out " + (dir / "o").string());
  CHECK(r.code == 2);
  CHECK(r.output.find("delta") != std::string::npos);
  CHECK(run("evaluate --dataset x.jsonl --set bogus=1 --out " + (dir / "o").string()).code == 2);
}

TEST_CASE("missing dataset exits with the data code") {
  testing::TempDir dir;
  const auto r = run("ingest --dataset " + (dir / "absent.jsonl").string() + " --out " + (dir / "o").string());
  CHECK(r.code == 3);
  CHECK(r.output.find("ingest") != std::string::npos);
}

TEST_CASE("unreachable provider exits with the provider code") {
  testing::TempDir dir;
  dupdetect::save_corpus(testing::synthetic_corpus({.reports = 20}), dir / "c.jsonl", dupdetect::CorpusFormat::kJsonl);
  testing::write_text(dir / "run.conf", "embedding = external\nembed_endpoint = http://127.0.0.1:1/embed\n"
                                        "embed_model = m\nstrategy = none\n");
  const auto r = run("embed --config " + (dir / "run.conf").string() + " --dataset " + (dir / "c.jsonl").string() +
                     " --set embed_batch=20 --out " + (dir / "o").string());
  CHECK(r.code == 4);
}

TEST_CASE("ingest and evaluate end to end") {
  testing::TempDir dir;
  dupdetect::save_corpus(testing::synthetic_corpus({.reports = 150}), dir / "c.jsonl", dupdetect::CorpusFormat::kJsonl);
  const auto ingest = run("ingest --dataset " + (dir / "c.jsonl").string() + " --out " + (dir / "i").string());
  CHECK(ingest.code == 0);
  CHECK(std::filesystem::exists(dir / "i" / "ingest.json"));

  const auto eval = run("evaluate --dataset " + (dir / "c.jsonl").string() + " --strategy quarter --delta 0.85 " +
                        "--topk 5,10 --causal --out " + (dir / "e").string());
  INFO(eval.output);
  CHECK(eval.code == 0);
  CHECK(eval.output.find("Accuracy") != std::string::npos);
  CHECK(eval.output.find("Recall-Rate@5") != std::string::npos);
  const auto report = nlohmann::json::parse(testing::read_text(dir / "e" / "report.json"));
  CHECK(report["config"]["strategy"] == "quarter");
  CHECK(report["config"]["causal"] == true);
  CHECK(report["evaluations"][0]["delta"] == 0.85);

  const auto elbow = run("elbow --dataset " + (dir / "c.jsonl").string() + " --max-k 6 --out " + (dir / "k").string());
  CHECK(elbow.code == 0);
  CHECK(elbow.output.find("k,inertia") != std::string::npos);
}
