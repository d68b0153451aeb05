#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cdmine/error.hpp"
#include "cdmine/metrics.hpp"
#include "cdmine/rng.hpp"

using namespace cdmine;

TEST_CASE("compute_metrics: 82 of 100 defaulters found with 7 false alarms") {
  ConfusionMatrix cm{82, 7, 93, 18};
  const auto m = compute_metrics(cm);
  CHECK(m.recall == doctest::Approx(0.82).epsilon(1e-15));
  CHECK(m.precision == doctest::Approx(82.0 / 89.0).epsilon(1e-15));
  CHECK(m.precision == doctest::Approx(0.9213).epsilon(1e-4));
  CHECK(m.accuracy == doctest::Approx(175.0 / 200.0));
  const double f = 2 * (82.0 / 89.0) * 0.82 / (82.0 / 89.0 + 0.82);
  CHECK(m.f_score == doctest::Approx(f).epsilon(1e-14));
}

TEST_CASE("compute_metrics: perfect prediction") {
  const auto m = compute_metrics({10, 0, 40, 0});
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f_score == 1.0);
}

TEST_CASE("compute_metrics: zero denominators are flagged") {
  const auto none_flagged = compute_metrics({0, 0, 50, 5});
  CHECK(none_flagged.precision == 0.0);
  CHECK(none_flagged.precision_undefined);
  CHECK_FALSE(none_flagged.recall_undefined);
  CHECK(none_flagged.f_score_undefined);

  const auto no_positives = compute_metrics({0, 3, 50, 0});
  CHECK(no_positives.recall_undefined);
  CHECK(no_positives.recall == 0.0);
  CHECK_FALSE(no_positives.precision_undefined);

  CHECK_THROWS_AS(compute_metrics({}), Error);
  const std::vector<int> a{1, 0}, b{1};
  CHECK_THROWS_AS(confusion(a, b), Error);
}

TEST_CASE("compute_metrics: agrees with direct counting") {
  Rng rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10000;
    std::vector<int> pred(n), label(n);
    const double p1 = rng.uniform(), p2 = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rng.bernoulli(p1);
      label[i] = rng.bernoulli(p2);
    }
    double hits = 0, flagged = 0, positives = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      hits += pred[i] && label[i];
      flagged += pred[i];
      positives += label[i];
      correct += pred[i] == label[i];
    }
    const auto m = compute_metrics(confusion(pred, label));
    CHECK(std::abs(m.accuracy - correct / n) <= 1e-12);
    if (flagged > 0) CHECK(std::abs(m.precision - hits / flagged) <= 1e-12);
    if (positives > 0) CHECK(std::abs(m.recall - hits / positives) <= 1e-12);

    // Swapping predictions and labels swaps precision and recall.
    const auto s = compute_metrics(confusion(label, pred));
    CHECK(s.accuracy == m.accuracy);
    CHECK(s.precision == m.recall);
    CHECK(s.recall == m.precision);
  }
}

TEST_CASE("fit_linear: exact line, noisy line, degenerate input") {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 5, 9, 17};
  const auto f = fit_linear(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));

  const std::vector<double> noisy{3, 6, 8, 18};
  const auto g = fit_linear(x, noisy);
  CHECK(g.r2 < 1.0);
  CHECK(g.r2 > 0.9);

  const std::vector<double> same{2, 2}, two{1, 2};
  CHECK_THROWS_AS(fit_linear(same, two), Error);
  CHECK_THROWS_AS(fit_linear(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("bench_scaling: halved sizes and a linear fit") {
  std::vector<OnlineTransaction> batch(1000);
  std::vector<std::size_t> seen;
  volatile double sink = 0;
  const auto r = bench_scaling(
      batch, 4,
      [&](std::span<const OnlineTransaction> s) {
        seen.push_back(s.size());
        for (std::size_t i = 0; i < s.size() * 2000; ++i) sink = sink + 1.0;
      },
      3);
  REQUIRE(r.points.size() == 5);
  const std::size_t sizes[] = {1000, 500, 250, 125, 62};
  for (int i = 0; i < 5; ++i) {
    CHECK(r.points[i].size == sizes[i]);
    CHECK(r.points[i].seconds.size() == 3);
  }
  CHECK(seen.size() == 15);
  CHECK(r.fit.slope > 0.0);
  CHECK(r.fit.r2 > 0.9);

  std::ostringstream out;
  write_bench(out, r);
  CHECK(out.str().rfind("size,seconds,repetition\n", 0) == 0);
  CHECK(out.str().find("# r2,") != std::string::npos);
}

TEST_CASE("bench_scaling: warns on runs near the timer resolution") {
  std::vector<OnlineTransaction> batch(64);
  const auto r = bench_scaling(batch, 2, [](std::span<const OnlineTransaction>) {}, 1);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("bench_scaling: contract errors") {
  std::vector<OnlineTransaction> batch(8);
  const BatchScorer noop = [](std::span<const OnlineTransaction>) {};
  CHECK_THROWS_AS(bench_scaling(batch, 1, noop), Error);
  CHECK_THROWS_AS(bench_scaling(batch, 4, noop), Error);
  CHECK_THROWS_AS(bench_scaling(batch, 2, noop, 0), Error);
}

TEST_CASE("write_report: header and one row per batch") {
  std::vector<BatchReport> reports(2);
  reports[0].batch = 1;
  reports[0].metrics = compute_metrics({1, 0, 1, 0});
  reports[1].batch = 2;
  reports[1].metrics = compute_metrics({0, 1, 1, 0});
  std::ostringstream out;
  write_report(out, reports);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == kReportHeader);
  std::getline(in, line);
  CHECK(line.rfind("1,1,1,1,1,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("2,0.5,0,", 0) == 0);
}
