#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdmine/decompose.hpp"
#include "cdmine/extra_trees.hpp"
#include "cdmine/orchestrator.hpp"
#include "cdmine/synth.hpp"

namespace cdmine {

namespace fs = std::filesystem;

enum class OfflineScoring { cross_fit, model };

struct PathsConfig {
  fs::path source = "data/source.csv";
  fs::path template_csv;  // empty = synthetic log-normal amounts
  fs::path out_dir = "out";
  fs::path model = "out/model.et";
  fs::path state = "out/state.csv";
  fs::path rules;  // empty = built-in catalog
  fs::path report = "out/report.csv";
  fs::path bench = "out/bench.csv";
  fs::path cv_report = "out/cv_report.csv";
  fs::path pinned;  // optional source-format rows copied into synthetic data
};

struct DecomposeConfig {
  TemplateSettings tmpl;
  SyntheticTemplateParams synthetic;
  std::uint64_t seed = 2018;
  int year = 2005;
};

struct CvConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 7;
  int batch = 5;  // offline batch the model is trained on
};

struct BenchConfig {
  int halvings = 4;
  int batch = 1;
  int repetitions = 3;
};

struct RunConfig {
  PathsConfig paths;
  ExtraTreesParams trees{.n_trees = 100, .k_features = 0, .n_min = 2, .seed = 1};
  ScoringConfig scoring;
  OfflineScoring offline_scoring = OfflineScoring::cross_fit;
  std::size_t cross_fit_folds = 5;
  DecomposeConfig decompose;
  CvConfig cv;
  BenchConfig bench;
  SynthOptions synth;  // `pinned` is filled from paths.pinned at synth time
  unsigned threads = 0;  // 0 = all hardware threads

  fs::path offline_batch_path(int batch) const;  // batch 1..5
  fs::path online_batch_path(int batch) const;

  /// Range checks on every numeric setting. Throws Errc::config.
  void validate() const;
};

/// Dotted-key override such as {"trees.n_trees", "50"}. Values are parsed as
/// JSON when possible and taken as strings otherwise.
using Override = std::pair<std::string, std::string>;

/// Reads a JSON config, applies overrides, resolves relative paths against
/// `base_dir` and validates. Unknown keys are errors. Throws Errc::config.
RunConfig parse_config(std::string_view json_text, const fs::path& base_dir, const std::vector<Override>& overrides = {});
/// Relative paths resolve against the config file's directory.
RunConfig load_config(const fs::path& path, const std::vector<Override>& overrides = {});
/// Defaults with relative paths resolved against `base_dir`.
RunConfig default_config(const fs::path& base_dir, const std::vector<Override>& overrides = {});

/// The effective configuration as JSON text.
std::string dump_config(const RunConfig& config);

}  // namespace cdmine
