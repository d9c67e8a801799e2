#include <sys/wait.h>

#include <cstdio>
#include <map>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "repfactor/pipeline.hpp"
#include "repfactor/synthetic.hpp"
#include "scratch_dir.hpp"

using namespace repfactor;
namespace fs = std::filesystem;
using testing_support::ScratchDir;
using testing_support::slurp;
using testing_support::spit;

namespace {

struct Run {
  int status = -1;
  std::string output;  // stdout and stderr
};

Run cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + REPFACTOR_CLI_PATH + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

// Small synthetic dataset so each test stays fast.
fs::path make_dataset(const ScratchDir& dir) {
  SyntheticDatasetOptions o;
  o.layers = 5;
  write_synthetic_dataset(dir.path(), o);
  return dir / "config.json";
}

std::map<std::string, std::string> output_files(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), out).string();
    if (rel.ends_with(".csv") || rel.ends_with(".nwk")) files[rel] = slurp(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("decompose writes a model per cell") {
  ScratchDir dir("cli");
  const auto config = make_dataset(dir);
  for (const char* stage : {"ingest", "covariance"}) CHECK(cli(std::string(stage) + " -c " + config.string()).status == 0);
  const Run r = cli("decompose --quiet -c " + config.string());
  CHECK(r.status == 0);
  const auto index = nlohmann::json::parse(slurp(dir / "out/decompose/index.json"));
  // 6 groups x 5 layers x {ALL, Number, Tense} cells, one model each.
  CHECK(index["units"].size() == 15);
  int models = 0;
  for (const auto& e : fs::directory_iterator(dir / "out/cache/models")) models += e.is_directory();
  CHECK(models == 15);
}

TEST_CASE("stage ordering guard") {
  ScratchDir dir("cli");
  const auto config = make_dataset(dir);
  const Run r = cli("signatures -c " + config.string());
  CHECK(r.status != 0);
  CHECK(r.output.find("missing stage: decompose") != std::string::npos);
}

TEST_CASE("pipeline is deterministic and lists its artifacts") {
  ScratchDir dir("cli");
  const auto config = make_dataset(dir);
  REQUIRE(cli("pipeline --quiet -c " + config.string()).status == 0);
  const auto first = output_files(dir / "out");
  const std::string summary_text = slurp(dir / "out/summary.json");

  const auto summary = nlohmann::json::parse(summary_text);
  std::set<std::string> listed;
  for (const auto& a : summary["artifacts"]) listed.insert(a["path"].get<std::string>());
  for (const char* p : {"signatures/signatures.csv", "stats/trend_ALL.csv", "stats/correlations.csv",
                        "stats/external_correlations.csv", "stats/variance_tests.csv", "tree/average.nwk",
                        "tree/L0_ALL.nwk", "tree/L4_ALL.nwk"})
    CHECK_MESSAGE(listed.count(p) == 1, p);

  // Second run in place: every stage is up to date.
  const Run again = cli("pipeline -c " + config.string());
  CHECK(again.status == 0);
  CHECK(again.output.find("tree (up to date)") != std::string::npos);
  CHECK(output_files(dir / "out") == first);

  // Fresh output directory from scratch with the same seed.
  auto cfg = nlohmann::json::parse(slurp(config));
  cfg["output_dir"] = "out2";
  spit(dir / "config2.json", cfg.dump());
  REQUIRE(cli("pipeline --quiet -c " + (dir / "config2.json").string(), "REPFACTOR_JOBS=1").status == 0);
  CHECK(output_files(dir / "out2") == first);
}

TEST_CASE("errors map to exit codes") {
  ScratchDir dir("cli");
  const auto config = make_dataset(dir);

  Run r = cli("pipeline --rank 500 -c " + config.string());
  CHECK(r.status == 2);
  CHECK(r.output.find("RankTooLarge") != std::string::npos);

  CHECK(cli("").status == 1);
  CHECK(cli("frobnicate").status == 1);
  CHECK(cli("decompose").status == 1);
  CHECK(cli("decompose --q 2 -c " + config.string()).status == 1);
  REQUIRE(cli("ingest -c " + config.string()).status == 0);
  CHECK(cli("decompose -c " + config.string(), "REPFACTOR_JOBS=lots").status == 1);
  CHECK(cli("decompose -c " + config.string(), "REPFACTOR_JOBS=2").status == 0);

  spit(dir / "broken.json", "{");
  CHECK(cli("ingest -c " + (dir / "broken.json").string()).status == 2);

  fs::remove(dir / "matrices" / fs::directory_iterator(dir / "matrices")->path().filename());
  r = cli("ingest -c " + config.string());
  CHECK(r.status == 2);
  CHECK(r.output.find("stage ingest") != std::string::npos);
}

TEST_CASE("profile of a single corpus") {
  ScratchDir dir("cli");
  spit(dir / "c.tsv", "run\trun\nruns\trun\nran\trun\n");
  const Run r = cli("profile --corpus " + (dir / "c.tsv").string() + " --group en");
  CHECK(r.status == 0);
  CHECK(r.output == "group,unique_chars,ttr,data_size\nen,5,0.33333333333333331,3\n");
}

TEST_CASE("resolve_jobs") {
  CHECK(resolve_jobs(3) == 3);
  ::setenv("REPFACTOR_JOBS", "5", 1);
  CHECK(resolve_jobs(0) == 5);
  ::setenv("REPFACTOR_JOBS", "0", 1);
  CHECK_THROWS_AS(resolve_jobs(0), Error);
  ::unsetenv("REPFACTOR_JOBS");
  CHECK(resolve_jobs(0) >= 1);
}
