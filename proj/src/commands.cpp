#include "cdmine/commands.hpp"

#include <chrono>
#include <sstream>

#include "cdmine/csv.hpp"
#include "cdmine/error.hpp"
#include "cdmine/ingest.hpp"
#include "cdmine/rule_engine.hpp"

namespace cdmine {

namespace {

void info(const Logger& log, const std::string& message) {
  if (log) log(LogLevel::info, message);
}

void warn(const Logger& log, const std::string& message) {
  if (log) log(LogLevel::warning, message);
}

void require_file(const fs::path& path, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) fail(Errc::input, std::string(what) + " not found: '" + path.string() + "'");
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(Errc::io, "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  ensure_parent(path);
  csv::write_atomic(path, out.str());
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

RuleCatalog load_catalog(const RunConfig& config) {
  if (config.paths.rules.empty()) return default_rules();
  require_file(config.paths.rules, "rules file");
  return load_rules(config.paths.rules);
}

void resolve_catalog(RuleCatalog& catalog, const ExtraTreesModel& model) {
  FeatureScores scores;
  scores.names = model.feature_names();
  scores.scores = model.feature_importances();
  catalog.resolve_impacts(scores);
}

OfflineBatch load_offline(const RunConfig& config, int batch) {
  const auto path = config.offline_batch_path(batch);
  require_file(path, "offline batch");
  return read_offline(path);
}

OnlineBatch load_online(const RunConfig& config, int batch) {
  const auto path = config.online_batch_path(batch);
  require_file(path, "online batch");
  return read_online(path);
}

}  // namespace

std::size_t cmd_synth(const RunConfig& config, const Logger& log) {
  config.validate();
  SynthOptions options = config.synth;
  if (!config.paths.pinned.empty()) {
    require_file(config.paths.pinned, "pinned rows file");
    options.pinned = parse_source(config.paths.pinned).records;
  }
  const auto records = synthesize_source(options);
  ensure_parent(config.paths.source);
  write_file(config.paths.source, [&](std::ostream& out) { write_source(out, records); });
  info(log, "synth: wrote " + std::to_string(records.size()) + " accounts (" + std::to_string(options.defaults) +
                " defaults) to " + config.paths.source.string());
  return records.size();
}

DecomposeSummary cmd_decompose(const RunConfig& config, const Logger& log) {
  config.validate();
  require_file(config.paths.source, "source CSV");
  if (!config.paths.template_csv.empty()) require_file(config.paths.template_csv, "template CSV");

  const auto source = parse_source(config.paths.source);
  auto amounts = config.paths.template_csv.empty() ? synthetic_template_amounts(config.decompose.synthetic)
                                                   : load_template_amounts(config.paths.template_csv);
  const auto tmpl =
      DistributionTemplate::prepare(std::move(amounts), online_month_bills(source.records), config.decompose.tmpl);
  const auto parts = decompose_dataset(source.records, tmpl, config.decompose.seed, config.decompose.year,
                                       config.threads);

  DecomposeSummary summary;
  summary.accounts = source.records.size();
  for (int b = 0; b < kBatches; ++b) {
    write_file(config.offline_batch_path(b + 1), [&](std::ostream& out) { write_offline(out, parts.offline[b]); });
    write_file(config.online_batch_path(b + 1), [&](std::ostream& out) { write_online(out, parts.online[b]); });
    summary.offline_rows[b] = parts.offline[b].size();
    summary.online_rows[b] = parts.online[b].size();
    info(log, "decompose: batch " + std::to_string(b + 1) + ": " + std::to_string(summary.offline_rows[b]) +
                  " offline rows, " + std::to_string(summary.online_rows[b]) + " online transactions");
  }
  return summary;
}

TrainSummary cmd_train(const RunConfig& config, const Logger& log) {
  config.validate();
  const auto batch = load_offline(config, config.cv.batch);
  const auto data = make_dataset(batch);

  TrainSummary summary;
  summary.cv = cross_validate(data, config.trees, config.cv.folds, config.cv.seed, config.threads);
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = train(data, config.trees, config.threads);
  summary.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ensure_parent(config.paths.model);
  model.save(config.paths.model);
  write_file(config.paths.cv_report, [&](std::ostream& out) { write_cv_report(out, summary.cv); });

  const auto& m = summary.cv.mean;
  info(log, "train: " + std::to_string(config.cv.folds) + "-fold CV on offline batch " +
                std::to_string(config.cv.batch) + ": accuracy " + fixed(m.accuracy, 4) + ", precision " +
                fixed(m.precision, 4) + ", recall " + fixed(m.recall, 4) + ", f_score " + fixed(m.f_score, 4));
  info(log, "train: offline training time " + fixed(summary.train_seconds, 2) + " s (" +
                std::to_string(data.rows()) + " rows, " + std::to_string(config.trees.n_trees) + " trees)");
  return summary;
}

std::vector<BatchReport> cmd_run(const RunConfig& config, const Logger& log) {
  config.validate();
  require_file(config.paths.model, "model file");
  auto catalog = load_catalog(config);
  std::vector<OfflineBatch> offline;
  std::vector<OnlineBatch> online;
  for (int b = 1; b <= kBatches; ++b) {
    offline.push_back(load_offline(config, b));
    online.push_back(load_online(config, b));
  }
  const auto model = ExtraTreesModel::load(config.paths.model);
  resolve_catalog(catalog, model);

  const ModelScorer model_scorer(model);
  const CrossFitScorer cross_fit(config.trees, config.cross_fit_folds, config.cv.seed, config.threads);
  const OfflineScorer& scorer =
      config.offline_scoring == OfflineScoring::model ? static_cast<const OfflineScorer&>(model_scorer) : cross_fit;

  ensure_parent(config.paths.state);
  const auto result = run_batches(offline, online, scorer, catalog, config.scoring,
                                  [&](int, const RiskState& state) { state.save(config.paths.state); });
  write_file(config.paths.report, [&](std::ostream& out) { write_report(out, result.reports); });

  for (const auto& r : result.reports) {
    info(log, "run: batch " + std::to_string(r.batch) + ": accuracy " + fixed(r.metrics.accuracy, 4) +
                  ", precision " + fixed(r.metrics.precision, 4) + ", recall " + fixed(r.metrics.recall, 4) +
                  ", f_score " + fixed(r.metrics.f_score, 4) + ", offline " + fixed(r.offline_seconds, 2) +
                  " s, online " + fixed(r.online_seconds, 2) + " s");
  }
  const auto& first = result.reports.front().metrics;
  const auto& last = result.reports.back().metrics;
  if (last.recall < first.recall) {
    warn(log, "run: batch " + std::to_string(kBatches) + " recall " + fixed(last.recall, 4) +
                  " is below batch 1 recall " + fixed(first.recall, 4));
  }
  return result.reports;
}

BenchResult cmd_bench(const RunConfig& config, const Logger& log) {
  config.validate();
  require_file(config.paths.model, "model file");
  auto catalog = load_catalog(config);
  const int b = config.bench.batch;
  const auto current = load_offline(config, b);
  const OfflineBatch previous = b > 1 ? load_offline(config, b - 1) : OfflineBatch{};
  const auto online = load_online(config, b);
  const auto model = ExtraTreesModel::load(config.paths.model);
  resolve_catalog(catalog, model);

  ContextBook base_book;
  base_book.load(current, b > 1 ? &previous : nullptr);
  const RiskState base_state = init_offline_risk(model, current);

  std::size_t failures = 0;
  auto scorer = [&](std::span<const OnlineTransaction> txns) {
    ContextBook book = base_book;
    RiskState state = base_state;
    failures += stream_online(catalog, txns, book, state, config.scoring, b);
  };
  const auto result = bench_scaling(online, config.bench.halvings, scorer, config.bench.repetitions);
  if (failures) fail(Errc::run, "bench: " + std::to_string(failures) + " transactions failed to score");

  write_file(config.paths.bench, [&](std::ostream& out) { write_bench(out, result); });
  for (const auto& p : result.points) {
    info(log, "bench: " + std::to_string(p.size) + " transactions: median " + fixed(p.median, 4) + " s");
  }
  info(log, "bench: seconds = " + csv::format_double(result.fit.slope) + " * size + " +
                csv::format_double(result.fit.intercept) + ", r2 " + fixed(result.fit.r2, 4));
  for (const auto& w : result.warnings) warn(log, "bench: " + w);
  return result;
}

}  // namespace cdmine
