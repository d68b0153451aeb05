#include "cdmine/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "cdmine/csv.hpp"
#include "cdmine/error.hpp"

namespace cdmine {

void ConfusionMatrix::add(int predicted, int label) {
  if (label) {
    (predicted ? tp : fn) += 1;
  } else {
    (predicted ? fp : tn) += 1;
  }
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) fail(Errc::metric, "confusion: prediction and label counts differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(predicted[i], labels[i]);
  return cm;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail(Errc::metric, "metrics: empty confusion matrix");
  Metrics m;
  const auto ratio = [](std::uint64_t num, std::uint64_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  bool unused = false;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), unused);
  m.precision = ratio(cm.tp, cm.tp + cm.fp, m.precision_undefined);
  m.recall = ratio(cm.tp, cm.tp + cm.fn, m.recall_undefined);
  if (m.precision + m.recall > 0.0) {
    m.f_score = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f_score_undefined = true;
  }
  return m;
}

void write_report(std::ostream& out, const std::vector<BatchReport>& reports) {
  out << kReportHeader << '\n';
  for (const auto& r : reports) {
    out << r.batch << ',' << csv::format_double(r.metrics.accuracy) << ',' << csv::format_double(r.metrics.precision)
        << ',' << csv::format_double(r.metrics.recall) << ',' << csv::format_double(r.metrics.f_score) << ','
        << csv::format_double(r.offline_seconds) << ',' << csv::format_double(r.online_seconds) << '\n';
  }
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail(Errc::metric, "fit_linear: need at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) fail(Errc::metric, "fit_linear: all x values are equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
  }
  f.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

namespace {

double clock_resolution() {
  using clock = std::chrono::steady_clock;
  double best = 1.0;
  for (int i = 0; i < 64; ++i) {
    const auto a = clock::now();
    auto b = clock::now();
    while (b == a) b = clock::now();
    best = std::min(best, std::chrono::duration<double>(b - a).count());
  }
  return best;
}

}  // namespace

BenchResult bench_scaling(std::span<const OnlineTransaction> batch, int halvings, const BatchScorer& scorer,
                          int repetitions) {
  if (halvings < 2) fail(Errc::contract, "bench: at least two halvings required");
  if (repetitions < 1) fail(Errc::contract, "bench: repetitions must be positive");
  if (halvings >= 63 || (batch.size() >> halvings) == 0) {
    fail(Errc::contract, "bench: batch of " + std::to_string(batch.size()) + " transactions cannot be halved " +
                             std::to_string(halvings) + " times");
  }
  BenchResult result;
  for (int h = 0; h <= halvings; ++h) result.points.push_back({batch.size() >> h, {}, 0.0});

  using clock = std::chrono::steady_clock;
  for (int rep = 0; rep < repetitions; ++rep) {
    for (auto& p : result.points) {
      const auto start = clock::now();
      scorer(batch.first(p.size));
      p.seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
    }
  }
  std::vector<double> xs, ys;
  for (auto& p : result.points) {
    auto sorted = p.seconds;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    p.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    xs.push_back(static_cast<double>(p.size));
    ys.push_back(p.median);
  }
  result.fit = fit_linear(xs, ys);

  const double resolution = clock_resolution();
  const double smallest = result.points.back().median;
  if (smallest < 100.0 * resolution) {
    result.warnings.push_back("smallest batch (" + std::to_string(result.points.back().size) + " txns) took " +
                              csv::format_double(smallest) + " s, within 100x of the timer resolution (" +
                              csv::format_double(resolution) + " s)");
  }
  return result;
}

void write_bench(std::ostream& out, const BenchResult& r) {
  out << "size,seconds,repetition\n";
  for (const auto& p : r.points)
    for (std::size_t i = 0; i < p.seconds.size(); ++i)
      out << p.size << ',' << csv::format_double(p.seconds[i]) << ',' << i << '\n';
  out << "# fit: seconds = slope * size + intercept (on per-size medians)\n";
  out << "# slope," << csv::format_double(r.fit.slope) << '\n';
  out << "# intercept," << csv::format_double(r.fit.intercept) << '\n';
  out << "# r2," << csv::format_double(r.fit.r2) << '\n';
  for (const auto& w : r.warnings) out << "# warning," << w << '\n';
}

}  // namespace cdmine
