#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "cdmine/decompose.hpp"
#include "cdmine/error.hpp"
#include "cdmine/orchestrator.hpp"
#include "cdmine/rng.hpp"
#include "cdmine/synth.hpp"
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

OfflineBatch accounts(std::initializer_list<AccountId> ids) {
  OfflineBatch b;
  for (auto id : ids) {
    OfflineAccount a;
    a.account = id;
    a.balance_limit = 1000;
    b.push_back(a);
  }
  return b;
}

OnlineTransaction txn(AccountId account, std::int64_t tid = 1) {
  return {tid, account, 10, Date{2005, 5, 1}, TxnType::exp};
}

// Returns a fixed probability per account id.
class TableScorer final : public OfflineScorer {
 public:
  explicit TableScorer(double (*fn)(const OfflineAccount&)) : fn_(fn) {}
  std::vector<double> score(const OfflineBatch& batch) const override {
    std::vector<double> p;
    for (const auto& a : batch) p.push_back(fn_(a));
    return p;
  }

 private:
  double (*fn_)(const OfflineAccount&);
};

Decomposition small_decomposition(std::size_t rows, std::uint64_t seed) {
  SynthOptions o;
  o.rows = rows;
  o.defaults = rows / 5;
  o.seed = seed;
  const auto records = synthesize_source(o);
  SyntheticTemplateParams p;
  p.count = 5000;
  TemplateSettings s;
  s.mean_parts_per_bill = 4.0;
  const auto tmpl = DistributionTemplate::prepare(synthetic_template_amounts(p), online_month_bills(records), s);
  return decompose_dataset(records, tmpl, seed);
}

RuleCatalog resolved_defaults() {
  auto cat = default_rules();
  cat.resolve_impacts(FeatureScores::uniform(offline_feature_names()));
  return cat;
}

}  // namespace

TEST_CASE("combine: weighted sum and contract") {
  CHECK(combine(1.0, 0.2, 0.5) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(combine(0.0, 0.7, 0.0) == 0.7);
  CHECK(combine(0.3, 0.7, 1.0) == 0.3);
  CHECK(combine(0.4, 0.4, 0.37) == 0.4);
  CHECK(code_of([] { combine(1.1, 0.2, 0.5); }) == Errc::contract);
  CHECK(code_of([] { combine(0.5, -0.1, 0.5); }) == Errc::contract);
  CHECK(code_of([] { combine(0.5, 0.5, 2.0); }) == Errc::contract);
}

TEST_CASE("combine: bounded by its inputs") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(), b = rng.uniform(), l = rng.uniform();
    const double t = combine(a, b, l);
    CHECK(t >= std::min(a, b));
    CHECK(t <= std::max(a, b));
  }
}

TEST_CASE("apply_transaction: risk carries forward") {
  RiskState state;
  state.put({1, 0.2});
  ScoringConfig cfg;
  cfg.lambda = 0.5;
  const double expected[] = {0.6, 0.8, 0.9, 0.95};
  for (int i = 0; i < 4; ++i) {
    const double total = apply_transaction(state, txn(1, i + 1), 1.0, cfg, 1, i + 1);
    CHECK(total == doctest::Approx(expected[i]).epsilon(1e-15));
    CHECK(state.get(1).r_offline == doctest::Approx(expected[i]).epsilon(1e-15));
  }
  CHECK(state.get(1).last_ordinal == 4);
  CHECK(state.get(1).active);
}

TEST_CASE("apply_transaction: zero online risk keeps the offline risk") {
  RiskState state;
  state.put({1, 0.3});
  ScoringConfig cfg;
  const double total = apply_transaction(state, txn(1), 0.0, cfg, 2, 7);
  CHECK(total == doctest::Approx(0.15));
  CHECK(state.get(1).r_offline == 0.3);
  CHECK(state.get(1).last_r_total == doctest::Approx(0.15));
  CHECK(state.get(1).last_batch == 2);
  CHECK_FALSE(state.get(1).active);
  CHECK(code_of([&] { apply_transaction(state, txn(2), 0.5, cfg); }) == Errc::state);
}

TEST_CASE("month_end_sync: fresh values, active accounts keep the maximum") {
  RiskState state;
  state.put({1, 0.2});
  state.put({2, 0.2});
  state.put({3, 0.2});
  ScoringConfig cfg;
  apply_transaction(state, txn(2), 1.0, cfg);  // 0.6
  apply_transaction(state, txn(3), 1.0, cfg);  // 0.6
  const auto next = accounts({1, 2, 3});
  const std::vector<double> fresh{0.9, 0.1, 0.7};
  month_end_sync(state, fresh, next);
  CHECK(state.get(1).r_offline == 0.9);
  CHECK(state.get(2).r_offline == doctest::Approx(0.6));
  CHECK(state.get(3).r_offline == 0.7);
  for (AccountId id : {1, 2, 3}) CHECK_FALSE(state.get(id).active);

  CHECK(code_of([&] { month_end_sync(state, std::vector<double>{0.1, 0.2}, next); }) == Errc::sync);
  CHECK(code_of([&] { month_end_sync(state, std::vector<double>{0.1, 0.2, 0.3}, accounts({1, 2, 4})); }) ==
        Errc::sync);
  CHECK(code_of([&] { month_end_sync(state, std::vector<double>{0.1, 0.2}, accounts({1, 2})); }) == Errc::sync);
}

TEST_CASE("RiskState: save and load round trip exactly") {
  RiskState state;
  Rng rng(5);
  for (AccountId id = 1; id <= 200; ++id) {
    RiskRecord r;
    r.account = id * 7;
    r.r_offline = rng.uniform();
    r.last_r_total = rng.uniform();
    r.last_batch = static_cast<int>(id % 6);
    r.last_ordinal = static_cast<std::int64_t>(id * 31);
    state.put(r);
  }
  std::ostringstream out;
  state.save(out);
  CHECK(out.str().rfind("account,r_offline,last_r_total,last_batch,last_ordinal\n", 0) == 0);
  std::istringstream in(out.str());
  const auto back = RiskState::load(in);
  REQUIRE(back.size() == state.size());
  for (const auto& r : state.sorted()) {
    const auto& b = back.get(r.account);
    CHECK(b.r_offline == r.r_offline);
    CHECK(b.last_r_total == r.last_r_total);
    CHECK(b.last_batch == r.last_batch);
    CHECK(b.last_ordinal == r.last_ordinal);
  }

  testing::TempDir dir("state");
  state.save(dir / "state.csv");
  CHECK(RiskState::load(dir / "state.csv").size() == 200);
  testing::spit(dir / "bad.csv", "account,r_offline,last_r_total,last_batch,last_ordinal\n1,1.5,0,0,0\n");
  CHECK_THROWS_AS(RiskState::load(dir / "bad.csv"), Error);
  CHECK(code_of([&] { state.put({1, 1.2}); }) == Errc::contract);
}

TEST_CASE("stream_online: per-account order alone determines the state") {
  const auto d = small_decomposition(120, 9);
  const auto cat = resolved_defaults();
  ScoringConfig cfg;
  const auto& online = d.online[1];
  REQUIRE(online.size() > 100);

  auto run = [&](const OnlineBatch& batch) {
    ContextBook book;
    book.load(d.offline[1], &d.offline[0]);
    RiskState state = init_offline_risk(std::vector<double>(d.offline[1].size(), 0.25), d.offline[1]);
    CHECK(stream_online(cat, batch, book, state, cfg, 2) == 0);
    return state;
  };
  const auto reference = run(online);

  // Interleave accounts differently while keeping each account's own order.
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    std::map<AccountId, std::uint64_t> account_key;
    for (const auto& t : online)
      if (!account_key.count(t.account)) account_key[t.account] = rng.next();
    std::vector<std::size_t> order(online.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return account_key[online[a].account] < account_key[online[b].account];
    });
    OnlineBatch shuffled;
    for (auto i : order) shuffled.push_back(online[i]);
    const auto state = run(shuffled);
    for (const auto& r : reference.sorted()) {
      CHECK(state.get(r.account).r_offline == r.r_offline);
      CHECK(state.get(r.account).last_r_total == r.last_r_total);
    }
  }
}

TEST_CASE("stream_online: failed transactions are counted") {
  const auto cat = resolved_defaults();
  ContextBook book;
  const auto batch = accounts({1});
  book.load(batch);
  RiskState state = init_offline_risk(std::vector<double>{0.5}, batch);
  std::vector<std::string> errors;
  const OnlineBatch online{txn(1, 1), txn(2, 2)};
  CHECK(stream_online(cat, online, book, state, ScoringConfig{}, 1, &errors) == 1);
  REQUIRE(errors.size() == 1);
}

TEST_CASE("run_batches: one report per batch and boundary callbacks") {
  const auto d = small_decomposition(150, 4);
  const auto cat = resolved_defaults();
  const TableScorer scorer([](const OfflineAccount& a) { return a.default_flag ? 0.9 : 0.1; });
  ScoringConfig cfg;
  cfg.lambda = 0.0;  // online risk never moves the carried score
  std::vector<int> seen;
  const auto result = run_batches(d.offline, d.online, scorer, cat, cfg,
                                  [&](int b, const RiskState& s) {
                                    seen.push_back(b);
                                    CHECK(s.size() == 150);
                                  });
  REQUIRE(result.reports.size() == 5);
  CHECK(seen == std::vector<int>{1, 2, 3, 4, 5});
  for (int b = 0; b < 5; ++b) {
    const auto& r = result.reports[b];
    CHECK(r.batch == b + 1);
    CHECK(r.metrics.accuracy == 1.0);
    CHECK(r.metrics.recall == 1.0);
    CHECK(r.offline_seconds >= 0.0);
    CHECK(r.online_seconds >= 0.0);
  }
  CHECK(result.state.size() == 150);
}

TEST_CASE("run_batches: misaligned input is a run error") {
  const auto d = small_decomposition(60, 2);
  const auto cat = resolved_defaults();
  const TableScorer scorer([](const OfflineAccount&) { return 0.5; });

  std::vector<OfflineBatch> offline(d.offline.begin(), d.offline.end());
  std::vector<OnlineBatch> online(d.online.begin(), d.online.end());
  CHECK(code_of([&] { run_batches(std::span(offline).first(4), online, scorer, cat, ScoringConfig{}); }) ==
        Errc::run);

  auto stray = online;
  stray[2].push_back(stray[2].front());
  stray[2].back().account = 99999;
  CHECK(code_of([&] { run_batches(offline, stray, scorer, cat, ScoringConfig{}); }) == Errc::run);

  auto unresolved = default_rules();
  CHECK(code_of([&] { run_batches(offline, online, scorer, unresolved, ScoringConfig{}); }) == Errc::run);

  ScoringConfig bad;
  bad.lambda = 1.5;
  CHECK(code_of([&] { run_batches(offline, online, scorer, cat, bad); }) == Errc::config);
}
