#include <doctest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "support.hpp"

namespace {

int cli(const std::string& args, const testing::TempDir& dir) {
  const std::string cmd = std::string("\"") + CDMINE_CLI + "\" " + args + " >\"" + (dir / "stdout.txt").string() +
                          "\" 2>\"" + (dir / "stderr.txt").string() + "\"";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

// Config for a tiny dataset under `dir`.
void write_config(const testing::TempDir& dir, int n_trees) {
  testing::spit(dir / "c.json", R"({
    "paths": {"source": "source.csv", "out_dir": "out", "model": "out/model.et", "state": "out/state.csv",
              "report": "out/report.csv", "bench": "out/bench.csv", "cv_report": "out/cv.csv"},
    "trees": {"n_trees": )" + std::to_string(n_trees) + R"(},
    "scoring": {"offline_scoring": "model"},
    "decompose": {"mean_parts_per_bill": 3, "template_count": 5000},
    "cv": {"folds": 3},
    "bench": {"halvings": 2, "repetitions": 1},
    "synth": {"rows": 300, "defaults": 66}
  })");
}

}  // namespace

TEST_CASE("cli: usage errors exit with 1") {
  testing::TempDir dir("cli");
  CHECK(cli("", dir) == 1);
  CHECK(cli("frobnicate", dir) == 1);
  CHECK(cli("run --no-such-flag", dir) == 1);
  CHECK(cli("-c /nonexistent.json run", dir) == 1);
  CHECK(cli("--set trees.n_trees=0 train", dir) == 1);
  CHECK(testing::slurp(dir / "stderr.txt").find("config error") != std::string::npos);
  CHECK(cli("--set nonsense train", dir) == 1);
  CHECK(cli("--help", dir) == 0);
}

TEST_CASE("cli: missing inputs exit with 1") {
  testing::TempDir dir("cli");
  write_config(dir, 4);
  CHECK(cli("-c " + (dir / "c.json").string() + " decompose", dir) == 1);
  CHECK(cli("-c " + (dir / "c.json").string() + " run", dir) == 1);
}

TEST_CASE("cli: pipeline, flag precedence and runtime failure") {
  testing::TempDir dir("cli");
  write_config(dir, 4);
  const std::string cfg = "-c " + (dir / "c.json").string() + " --threads 1 ";
  REQUIRE(cli(cfg + "synth", dir) == 0);
  REQUIRE(cli(cfg + "decompose", dir) == 0);
  CHECK(testing::slurp(dir / "stdout.txt").find("batch 5") != std::string::npos);
  // The flag beats both the config file and --set.
  REQUIRE(cli(cfg + "--set trees.n_trees=5 train --trees 3", dir) == 0);
  CHECK(testing::slurp(dir / "out/model.et").find("\nn_trees 3\n") != std::string::npos);
  REQUIRE(cli(cfg + "run --lambda 0.3", dir) == 0);
  CHECK(testing::fs::exists(dir / "out/report.csv"));
  CHECK(testing::fs::exists(dir / "out/state.csv"));
  REQUIRE(cli(cfg + "bench", dir) == 0);
  CHECK(testing::fs::exists(dir / "out/bench.csv"));
  CHECK(cli(cfg + "run --lambda 1.5", dir) == 1);

  // Drop one account from batch 2: the batches no longer align.
  const auto path = dir / "out/offline_2.csv";
  std::string text = testing::slurp(path);
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  testing::spit(path, text);
  CHECK(cli(cfg + "run", dir) == 2);
  CHECK(testing::slurp(dir / "stderr.txt").find("run error") != std::string::npos);
}
