#pragma once

#include <array>
#include <functional>
#include <string_view>

#include "cdmine/config.hpp"
#include "cdmine/metrics.hpp"

namespace cdmine {

enum class LogLevel { info = 0, warning = 1 };
using Logger = std::function<void(LogLevel, std::string_view)>;

struct DecomposeSummary {
  std::array<std::size_t, kBatches> offline_rows{};
  std::array<std::size_t, kBatches> online_rows{};
  std::size_t accounts = 0;
};

struct TrainSummary {
  double train_seconds = 0.0;
  CvReport cv;
};

/// Writes a synthetic source CSV to paths.source.
std::size_t cmd_synth(const RunConfig& config, const Logger& log = {});
/// Source CSV -> offline_<b>.csv and online_<b>.csv in paths.out_dir.
DecomposeSummary cmd_decompose(const RunConfig& config, const Logger& log = {});
/// Offline batch cv.batch -> model file and CV report.
TrainSummary cmd_train(const RunConfig& config, const Logger& log = {});
/// All batches -> report CSV; the risk state is saved at every batch boundary.
std::vector<BatchReport> cmd_run(const RunConfig& config, const Logger& log = {});
/// Scaling benchmark of the online scoring step on batch bench.batch.
BenchResult cmd_bench(const RunConfig& config, const Logger& log = {});

}  // namespace cdmine
