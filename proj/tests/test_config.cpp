#include <doctest.h>

#include "cdmine/config.hpp"
#include "cdmine/error.hpp"
#include "support.hpp"

using namespace cdmine;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::ok;
}

}  // namespace

TEST_CASE("config: defaults") {
  const auto c = default_config("/base");
  CHECK(c.trees.n_trees == 100);
  CHECK(c.trees.k_features == 0);
  CHECK(c.trees.n_min == 2);
  CHECK(c.cv.folds == 10);
  CHECK(c.cv.batch == 5);
  CHECK(c.scoring.lambda == 0.5);
  CHECK(c.scoring.year == 2005);
  CHECK(c.scoring.first_month == 5);
  CHECK(c.offline_scoring == OfflineScoring::cross_fit);
  CHECK(c.paths.source == fs::path("/base/data/source.csv"));
  CHECK(c.paths.rules.empty());
  CHECK(c.offline_batch_path(3) == fs::path("/base/out/offline_3.csv"));
  CHECK(c.online_batch_path(5) == fs::path("/base/out/online_5.csv"));
}

TEST_CASE("config: file values, relative paths and overrides") {
  testing::TempDir dir("cfg");
  testing::spit(dir / "c.json", R"({
    // comments are allowed
    "paths": {"source": "in/s.csv", "out_dir": "/abs/out"},
    "trees": {"n_trees": 20, "k_features": 3},
    "scoring": {"lambda": 0.25, "offline_scoring": "model"},
    "threads": 2
  })");
  const auto c = load_config(dir / "c.json", {{"trees.n_trees", "7"}, {"paths.model", "m.et"}});
  CHECK(c.paths.source == dir.path() / "in/s.csv");
  CHECK(c.paths.out_dir == fs::path("/abs/out"));
  CHECK(c.paths.model == dir.path() / "m.et");
  CHECK(c.trees.n_trees == 7);  // override wins over the file
  CHECK(c.trees.k_features == 3);
  CHECK(c.scoring.lambda == 0.25);
  CHECK(c.offline_scoring == OfflineScoring::model);
  CHECK(c.threads == 2);

  // The dumped config reloads to the same settings.
  testing::spit(dir / "dump.json", dump_config(c));
  const auto again = load_config(dir / "dump.json");
  CHECK(again.trees.n_trees == 7);
  CHECK(again.paths.model == c.paths.model);
  CHECK(dump_config(again) == dump_config(c));
}

TEST_CASE("config: shipped default config loads") {
  const auto c = load_config(fs::path(CDMINE_SOURCE_DIR) / "config" / "default.json");
  CHECK(c.paths.rules.filename() == "rules.conf");
  CHECK(fs::exists(c.paths.rules));
}

TEST_CASE("config: errors") {
  CHECK(code_of([] { parse_config("{", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config("[]", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"tres": {}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"trees": {"n_tree": 3}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"trees": {"n_trees": "many"}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"trees": {"n_trees": 0}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"trees": {"n_trees": 2.5}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"trees": {"k_features": 9}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"scoring": {"lambda": 1.5}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"scoring": {"offline_scoring": "magic"}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"synth": {"rows": 10, "defaults": 11}})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"threads": -1})", "/"); }) == Errc::config);
  CHECK(code_of([] { parse_config(R"({"paths": 3})", "/"); }) == Errc::config);
  CHECK(code_of([] { default_config("/", {{"trees.bogus", "1"}}); }) == Errc::config);
  CHECK(code_of([] { default_config("/", {{"trees", "1"}}); }) == Errc::config);
  CHECK(code_of([] { default_config("/", {{"trees.n_trees", "ten"}}); }) == Errc::config);
  CHECK(code_of([] { load_config("/nonexistent/c.json"); }) == Errc::config);
}
