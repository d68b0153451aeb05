#include "cdmine/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cdmine/csv.hpp"
#include "cdmine/error.hpp"

namespace cdmine {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void ScoringConfig::validate() const {
  if (!in_unit(lambda)) fail(Errc::config, "scoring: lambda must lie in [0, 1]");
  if (!in_unit(threshold)) fail(Errc::config, "scoring: threshold must lie in [0, 1]");
  if (year < 1 || year > 9999) fail(Errc::config, "scoring: year out of range");
  if (first_month < 1 || first_month + kBatches - 1 > 12) fail(Errc::config, "scoring: batch months leave the year");
}

const RiskRecord& RiskState::get(AccountId account) const {
  auto it = records_.find(account);
  if (it == records_.end()) fail(Errc::state, "risk state: unknown account " + std::to_string(account));
  return it->second;
}

RiskRecord& RiskState::get(AccountId account) {
  auto it = records_.find(account);
  if (it == records_.end()) fail(Errc::state, "risk state: unknown account " + std::to_string(account));
  return it->second;
}

void RiskState::put(const RiskRecord& record) {
  if (!in_unit(record.r_offline) || !in_unit(record.last_r_total)) {
    fail(Errc::contract, "risk state: risk outside [0, 1] for account " + std::to_string(record.account));
  }
  records_[record.account] = record;
}

std::vector<RiskRecord> RiskState::sorted() const {
  std::vector<RiskRecord> out;
  out.reserve(records_.size());
  for (const auto& [id, r] : records_) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const RiskRecord& a, const RiskRecord& b) { return a.account < b.account; });
  return out;
}

void RiskState::save(std::ostream& out) const {
  out << "account,r_offline,last_r_total,last_batch,last_ordinal\n";
  for (const auto& r : sorted()) {
    out << r.account << ',' << csv::format_double(r.r_offline) << ',' << csv::format_double(r.last_r_total) << ','
        << r.last_batch << ',' << r.last_ordinal << '\n';
  }
}

void RiskState::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  save(out);
  csv::write_atomic(path, out.str());
}

RiskState RiskState::load(std::istream& in, const std::string& origin) {
  std::string line;
  if (!csv::read_line(in, line) || csv::trim(line) != "account,r_offline,last_r_total,last_batch,last_ordinal") {
    fail(Errc::state, origin + ": missing or unexpected risk state header");
  }
  RiskState state;
  std::size_t row = 0;
  while (csv::read_line(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto c = csv::split_line(line);
    const std::string where = origin + ": row " + std::to_string(row);
    std::int64_t account = 0, batch = 0, ordinal = 0;
    double r_off = 0, r_tot = 0;
    if (c.size() != 5 || !csv::parse_int(c[0], account) || !csv::parse_double(c[1], r_off) ||
        !csv::parse_double(c[2], r_tot) || !csv::parse_int(c[3], batch) || !csv::parse_int(c[4], ordinal)) {
      fail(Errc::state, where + ": malformed record");
    }
    if (!in_unit(r_off) || !in_unit(r_tot)) fail(Errc::state, where + ": risk outside [0, 1]");
    if (state.contains(account)) fail(Errc::state, where + ": duplicate account " + std::to_string(account));
    state.put({account, r_off, r_tot, static_cast<int>(batch), ordinal, false});
  }
  return state;
}

RiskState RiskState::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::state, "cannot open risk state " + path.string());
  return load(in, path.string());
}

RiskState init_offline_risk(std::span<const double> probabilities, const OfflineBatch& batch) {
  if (probabilities.size() != batch.size()) fail(Errc::contract, "init: probability count differs from batch size");
  RiskState state;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p = probabilities[i];
    if (!in_unit(p)) {
      fail(Errc::prediction, "init: probability " + csv::format_double(p) + " for account " +
                                 std::to_string(batch[i].account) + " outside [0, 1]");
    }
    state.put({batch[i].account, p, p, 0, 0, false});
  }
  return state;
}

RiskState init_offline_risk(const ExtraTreesModel& model, const OfflineBatch& batch) {
  return init_offline_risk(ModelScorer(model).score(batch), batch);
}

double combine(double r_online, double r_offline, double lambda) {
  if (!in_unit(r_online) || !in_unit(r_offline) || !in_unit(lambda)) {
    fail(Errc::contract, "combine: inputs must lie in [0, 1]");
  }
  const double total = lambda * r_online + (1.0 - lambda) * r_offline;
  return std::clamp(total, std::min(r_online, r_offline), std::max(r_online, r_offline));
}

double apply_transaction(RiskState& state, const OnlineTransaction& txn, double r_online, const ScoringConfig& config,
                         int batch, std::int64_t ordinal) {
  RiskRecord& r = state.get(txn.account);
  const double total = combine(r_online, r.r_offline, config.lambda);
  if (r_online > 0.0) {
    r.r_offline = total;
    r.active = true;
  }
  r.last_r_total = total;
  r.last_batch = batch;
  r.last_ordinal = ordinal;
  return total;
}

void month_end_sync(RiskState& state, std::span<const double> fresh, const OfflineBatch& next) {
  if (fresh.size() != next.size()) fail(Errc::sync, "sync: probability count differs from batch size");
  if (next.size() != state.size()) {
    fail(Errc::sync, "sync: batch has " + std::to_string(next.size()) + " accounts, state has " +
                         std::to_string(state.size()));
  }
  for (const auto& a : next)
    if (!state.contains(a.account)) fail(Errc::sync, "sync: account " + std::to_string(a.account) + " not in state");
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!in_unit(fresh[i])) fail(Errc::sync, "sync: probability outside [0, 1]");
    RiskRecord& r = state.get(next[i].account);
    r.r_offline = r.active ? std::max(r.r_offline, fresh[i]) : fresh[i];
    r.active = false;
  }
}

void month_end_sync(RiskState& state, const ExtraTreesModel& model, const OfflineBatch& next) {
  month_end_sync(state, ModelScorer(model).score(next), next);
}

std::vector<double> ModelScorer::score(const OfflineBatch& batch) const {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& a : batch) {
    try {
      out.push_back(model_.predict_proba(a));
    } catch (const Error& e) {
      fail(e.code(), "account " + std::to_string(a.account) + ": " + e.what());
    }
  }
  return out;
}

std::vector<double> CrossFitScorer::score(const OfflineBatch& batch) const {
  return cross_fit_proba(make_dataset(batch), params_, folds_, seed_, threads_);
}

void check_alignment(std::span<const OfflineBatch> offline, std::span<const OnlineBatch> online,
                     const ScoringConfig& config) {
  if (offline.size() != online.size() || offline.empty()) {
    fail(Errc::run, "run: " + std::to_string(offline.size()) + " offline and " + std::to_string(online.size()) +
                        " online batches; they must pair up");
  }
  if (offline.size() > static_cast<std::size_t>(13 - config.first_month)) fail(Errc::run, "run: too many batches");
  std::unordered_set<AccountId> accounts;
  for (const auto& a : offline[0]) {
    if (!accounts.insert(a.account).second) fail(Errc::run, "run: duplicate account " + std::to_string(a.account));
  }
  for (std::size_t b = 0; b < offline.size(); ++b) {
    const std::string tag = "run: batch " + std::to_string(b + 1);
    if (offline[b].size() != accounts.size()) fail(Errc::run, tag + ": offline account count differs from batch 1");
    for (const auto& a : offline[b])
      if (!accounts.count(a.account)) fail(Errc::run, tag + ": account " + std::to_string(a.account) + " not in batch 1");
    const int month = config.first_month + static_cast<int>(b);
    for (const auto& t : online[b]) {
      if (!accounts.count(t.account)) fail(Errc::run, tag + ": online account " + std::to_string(t.account) + " unknown");
      if (t.date.year != config.year || t.date.month != month) {
        fail(Errc::run, tag + ": transaction " + std::to_string(t.tid) + " dated " + t.date.to_string() +
                            " outside the batch month");
      }
    }
  }
}

std::size_t stream_online(const RuleCatalog& catalog, std::span<const OnlineTransaction> batch, ContextBook& book,
                          RiskState& state, const ScoringConfig& config, int batch_index,
                          std::vector<std::string>* errors) {
  const auto scores = risk(catalog, batch, book);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i].ok) {
      ++failed;
      if (errors) errors->push_back("tid " + std::to_string(scores[i].tid) + ": " + scores[i].error);
      continue;
    }
    apply_transaction(state, batch[i], scores[i].r_online, config, batch_index, static_cast<std::int64_t>(i + 1));
  }
  return failed;
}

RunResult run_batches(std::span<const OfflineBatch> offline, std::span<const OnlineBatch> online,
                      const OfflineScorer& scorer, const RuleCatalog& catalog, const ScoringConfig& config,
                      const std::function<void(int, const RiskState&)>& after_batch) {
  config.validate();
  check_alignment(offline, online, config);
  for (const auto& c : catalog.causes) {
    if (!(c.impact_coefficient > 0.0)) fail(Errc::run, "run: cause '" + c.id + "' has no resolved impact coefficient");
  }

  using clock = std::chrono::steady_clock;
  RunResult result;
  ContextBook book;
  for (std::size_t b = 0; b < offline.size(); ++b) {
    const int batch_no = static_cast<int>(b) + 1;
    BatchReport report;
    report.batch = batch_no;

    auto t0 = clock::now();
    const auto fresh = scorer.score(offline[b]);
    if (b == 0) {
      result.state = init_offline_risk(fresh, offline[b]);
    } else {
      month_end_sync(result.state, fresh, offline[b]);
    }
    report.offline_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    book.load(offline[b], b == 0 ? nullptr : &offline[b - 1]);
    std::vector<std::string> errors;
    t0 = clock::now();
    const std::size_t failed = stream_online(catalog, online[b], book, result.state, config, batch_no, &errors);
    report.online_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (failed) {
      fail(Errc::run, "run: batch " + std::to_string(batch_no) + ": " + std::to_string(failed) +
                          " transactions failed; first: " + errors.front());
    }

    ConfusionMatrix cm;
    for (const auto& a : offline[b]) {
      cm.add(result.state.get(a.account).r_offline >= config.threshold ? 1 : 0, a.default_flag);
    }
    report.metrics = compute_metrics(cm);
    result.reports.push_back(report);
    if (after_batch) after_batch(batch_no, result.state);
  }
  return result;
}

}  // namespace cdmine
