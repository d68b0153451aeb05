#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cdmine/records.hpp"

namespace cdmine {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  void add(int predicted, int label);
};

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> labels);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;  // F1
  // Set when the denominator was zero and the value was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f_score_undefined = false;
};

/// Throws Errc::metric for an empty matrix.
Metrics compute_metrics(const ConfusionMatrix& cm);

struct BatchReport {
  int batch = 0;
  Metrics metrics;
  double offline_seconds = 0.0;
  double online_seconds = 0.0;
};

inline constexpr const char* kReportHeader =
    "batch,accuracy,precision,recall,f_score,offline_time,online_time";
void write_report(std::ostream& out, const std::vector<BatchReport>& reports);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. Needs two distinct x.
LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

struct BenchPoint {
  std::size_t size = 0;
  std::vector<double> seconds;  // one per repetition
  double median = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> points;  // strictly decreasing sizes
  LinearFit fit;                   // seconds = slope * size + intercept, on medians
  std::vector<std::string> warnings;
};

using BatchScorer = std::function<void(std::span<const OnlineTransaction>)>;

/// Times `scorer` on prefixes of size n, n/2, ..., n/2^halvings of `batch`
/// with a monotonic clock, `repetitions` runs per size, and fits a line
/// through the median times.
BenchResult bench_scaling(std::span<const OnlineTransaction> batch, int halvings, const BatchScorer& scorer,
                          int repetitions = 3);

void write_bench(std::ostream& out, const BenchResult& result);

}  // namespace cdmine
