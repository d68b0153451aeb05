// cdmine command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cdmine/cdmine.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitRuntime = 2;

int exit_code(int status) {
  switch (status) {
    case CDM_OK:
      return kExitOk;
    case CDM_E_INVALID_ARGUMENT:
    case CDM_E_INPUT:
    case CDM_E_SCHEMA:
    case CDM_E_ROW:
    case CDM_E_CONFIG:
      return kExitInput;
    default:
      return kExitRuntime;
  }
}

void print_log(void*, int level, const char* message) {
  if (level == CDM_LOG_WARNING) {
    std::fprintf(stderr, "warning: %s\n", message);
  } else {
    std::printf("%s\n", message);
    std::fflush(stdout);
  }
}

int report_failure(int status) {
  std::fprintf(stderr, "cdmine: %s: %s\n", cdm_status_name(status), cdm_last_error());
  return exit_code(status);
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::optional<unsigned> threads;
  std::vector<std::pair<std::string, std::string>> flags;  // dotted key, value
};

// Binds a flag to a dotted config key; the value is forwarded verbatim.
template <class T>
void bind(CLI::App* app, Options& opts, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<T>(
      flag,
      [&opts, key](const T& v) {
        if constexpr (std::is_same_v<T, std::string>) {
          opts.flags.emplace_back(key, v);
        } else {
          opts.flags.emplace_back(key, std::to_string(v));
        }
      },
      help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cdmine: credit default mining over offline and online account data"};
  app.set_version_flag("--version", std::string(cdm_version()));
  app.require_subcommand(1);

  Options opts;
  app.add_option("-c,--config", opts.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", opts.sets, "Override a config value, key=value (repeatable)");
  app.add_option("--threads", opts.threads, "Worker threads, 0 = all cores");

  auto* synth = app.add_subcommand("synth", "Write a synthetic source CSV");
  bind<std::string>(synth, opts, "--source", "paths.source", "Output source CSV");
  bind<std::size_t>(synth, opts, "--rows", "synth.rows", "Number of accounts");
  bind<std::size_t>(synth, opts, "--defaults", "synth.defaults", "Number of defaulting accounts");
  bind<std::uint64_t>(synth, opts, "--seed", "synth.seed", "Generator seed");
  bind<std::string>(synth, opts, "--pinned", "paths.pinned", "Source-format rows to copy verbatim");

  auto* decompose = app.add_subcommand("decompose", "Split the source CSV into offline and online batches");
  bind<std::string>(decompose, opts, "--source", "paths.source", "Source CSV");
  bind<std::string>(decompose, opts, "--template", "paths.template", "Transaction amount template CSV");
  bind<std::string>(decompose, opts, "--out-dir", "paths.out_dir", "Directory for batch files");
  bind<std::uint64_t>(decompose, opts, "--seed", "decompose.seed", "Decomposition seed");
  bind<std::size_t>(decompose, opts, "--bins", "decompose.bins", "Equal-frequency bins");

  auto* train = app.add_subcommand("train", "Train the offline model and write a cross-validation report");
  bind<std::string>(train, opts, "--out-dir", "paths.out_dir", "Directory holding batch files");
  bind<std::string>(train, opts, "--model", "paths.model", "Model output file");
  bind<std::string>(train, opts, "--cv-report", "paths.cv_report", "Cross-validation report CSV");
  bind<std::size_t>(train, opts, "--trees", "trees.n_trees", "Number of trees");
  bind<std::size_t>(train, opts, "--k", "trees.k_features", "Candidate features per split, 0 = sqrt(d)");
  bind<std::size_t>(train, opts, "--n-min", "trees.n_min", "Minimum node size to split");
  bind<std::size_t>(train, opts, "--folds", "cv.folds", "Cross-validation folds");
  bind<int>(train, opts, "--batch", "cv.batch", "Offline batch to train on (1-5)");

  auto* run = app.add_subcommand("run", "Score all batches and write the batch report");
  bind<std::string>(run, opts, "--out-dir", "paths.out_dir", "Directory holding batch files");
  bind<std::string>(run, opts, "--model", "paths.model", "Model file");
  bind<std::string>(run, opts, "--rules", "paths.rules", "Rule catalog file");
  bind<std::string>(run, opts, "--report", "paths.report", "Batch report CSV");
  bind<std::string>(run, opts, "--state", "paths.state", "Risk state file");
  bind<double>(run, opts, "--lambda", "scoring.lambda", "Weight of the online risk");
  bind<double>(run, opts, "--threshold", "scoring.threshold", "Default decision threshold");
  bind<std::string>(run, opts, "--offline-scoring", "scoring.offline_scoring", "cross_fit or model");

  auto* bench = app.add_subcommand("bench", "Time online scoring on halved batch prefixes");
  bind<std::string>(bench, opts, "--out-dir", "paths.out_dir", "Directory holding batch files");
  bind<std::string>(bench, opts, "--model", "paths.model", "Model file");
  bind<std::string>(bench, opts, "--rules", "paths.rules", "Rule catalog file");
  bind<std::string>(bench, opts, "--output", "paths.bench", "Bench CSV");
  bind<int>(bench, opts, "--halvings", "bench.halvings", "Number of halvings");
  bind<int>(bench, opts, "--batch", "bench.batch", "Online batch to time (1-5)");
  bind<int>(bench, opts, "--repetitions", "bench.repetitions", "Runs per size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  cdm_context* ctx = nullptr;
  if (int rc = cdm_context_create(&ctx); rc != CDM_OK) return report_failure(rc);
  cdm_context_set_log(ctx, print_log, nullptr);

  int rc = CDM_OK;
  if (!opts.config.empty()) rc = cdm_context_load_config(ctx, opts.config.c_str());

  // Later settings win: --set values, then dedicated flags, then --threads.
  for (const auto& s : opts.sets) {
    if (rc != CDM_OK) break;
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "cdmine: --set expects key=value, got '%s'\n", s.c_str());
      cdm_context_destroy(ctx);
      return kExitInput;
    }
    rc = cdm_context_set(ctx, s.substr(0, eq).c_str(), s.substr(eq + 1).c_str());
  }
  for (const auto& [key, value] : opts.flags) {
    if (rc != CDM_OK) break;
    rc = cdm_context_set(ctx, key.c_str(), value.c_str());
  }
  if (rc == CDM_OK && opts.threads) rc = cdm_context_set(ctx, "threads", std::to_string(*opts.threads).c_str());

  if (rc == CDM_OK) {
    if (synth->parsed()) {
      rc = cdm_synth(ctx);
    } else if (decompose->parsed()) {
      rc = cdm_decompose(ctx);
    } else if (train->parsed()) {
      rc = cdm_train(ctx);
    } else if (run->parsed()) {
      rc = cdm_run(ctx, nullptr, 0, nullptr);
    } else if (bench->parsed()) {
      rc = cdm_bench(ctx, nullptr, nullptr, nullptr);
    }
  }
  cdm_context_destroy(ctx);
  return rc == CDM_OK ? kExitOk : report_failure(rc);
}
