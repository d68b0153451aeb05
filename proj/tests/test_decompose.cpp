#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "cdmine/decompose.hpp"
#include "cdmine/error.hpp"
#include "cdmine/ingest.hpp"
#include "cdmine/synth.hpp"
#include "support.hpp"

using namespace cdmine;

namespace {

std::vector<CustomerRecord> small_source(std::size_t rows = 400) {
  SynthOptions opts;
  opts.rows = rows;
  opts.defaults = rows / 5;
  opts.seed = 11;
  opts.pinned = parse_source(testing::fixture("pinned_rows.csv")).records;
  std::erase_if(opts.pinned, [&](const CustomerRecord& r) { return r.id > static_cast<AccountId>(rows); });
  return synthesize_source(opts);
}

DistributionTemplate small_template(const std::vector<CustomerRecord>& records, double mean_parts = 6.0) {
  SyntheticTemplateParams p;
  p.count = 5000;
  TemplateSettings s;
  s.mean_parts_per_bill = mean_parts;
  return DistributionTemplate::prepare(synthetic_template_amounts(p), online_month_bills(records), s);
}

std::string serialize(const Decomposition& d) {
  std::ostringstream out;
  for (int b = 0; b < kBatches; ++b) {
    write_offline(out, d.offline[b]);
    write_online(out, d.online[b]);
  }
  return out.str();
}

}  // namespace

TEST_CASE("rescale: endpoints and midpoint") {
  const RescaleRange r{0, 10, 0, 100};
  CHECK(rescale(0, r) == 0.0);
  CHECK(rescale(10, r) == 100.0);
  CHECK(rescale(5, r) == 50.0);

  const RescaleRange s{3.5, 7.25, -2.0, 9.0};
  CHECK(rescale(s.min1, s) == s.min2);
  CHECK(rescale(s.max1, s) == s.max2);
}

TEST_CASE("rescale: clamps outside the source range") {
  const RescaleRange r{0, 10, 0, 100};
  CHECK(rescale(-4, r) == 0.0);
  CHECK(rescale(12, r) == 100.0);
}

TEST_CASE("rescale: errors") {
  CHECK_THROWS_WITH_AS(rescale(1, {2, 2, 0, 1}), doctest::Contains("degenerate"), Error);
  try {
    rescale(1, {2, 2, 0, 1});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_range);
  }
  CHECK_THROWS_AS(rescale(1, {3, 2, 0, 1}), Error);
  CHECK_THROWS_AS(rescale(1, {0, 2, 1, 0}), Error);
}

TEST_CASE("rescale: monotone non-decreasing") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double lo = rng.uniform(-100, 100);
    const RescaleRange r{lo, lo + rng.uniform(0.1, 50), rng.uniform(-10, 10), 0};
    RescaleRange t = r;
    t.max2 = t.min2 + rng.uniform(0, 20);
    const double a = rng.uniform(r.min1 - 5, r.max1 + 5);
    const double b = rng.uniform(r.min1 - 5, r.max1 + 5);
    if (a <= b) CHECK(rescale(a, t) <= rescale(b, t));
  }
}

TEST_CASE("equal_frequency_bins: 1..12 into 4") {
  std::vector<double> s(12);
  std::iota(s.begin(), s.end(), 1.0);
  const auto e = equal_frequency_bins(s, 4);
  CHECK(e == std::vector<double>{1, 4, 7, 10, 12});
  for (std::size_t j = 0; j < 4; ++j) CHECK(bin_index_range(12, 4, j).size() == 3);
}

TEST_CASE("equal_frequency_bins: single bin") {
  const std::vector<double> s{2, 3, 8, 9};
  CHECK(equal_frequency_bins(s, 1) == std::vector<double>{2, 9});
  CHECK(bin_index_range(4, 1, 0).size() == 4);
}

TEST_CASE("equal_frequency_bins: ties split by index") {
  const std::vector<double> s{5, 5, 5, 5};
  const auto e = equal_frequency_bins(s, 2);
  CHECK(e == std::vector<double>{5, 5, 5});

  // Oracle: of all contiguous splits of four samples into two bins, only the
  // ones with counts differing by at most one are equal-frequency.
  std::vector<std::size_t> admissible;
  for (std::size_t cut = 0; cut <= s.size(); ++cut) {
    const std::size_t left = cut, right = s.size() - cut;
    if ((left > right ? left - right : right - left) <= 1) admissible.push_back(cut);
  }
  REQUIRE(admissible == std::vector<std::size_t>{2});
  CHECK(bin_index_range(4, 2, 0).end == admissible[0]);
  CHECK(bin_index_range(4, 2, 1).size() == 2);
}

TEST_CASE("equal_frequency_bins: counts are floor or ceil, edges monotone") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    const std::size_t k = 1 + rng.below(n);
    std::vector<double> s(n);
    for (auto& v : s) v = std::floor(rng.uniform(0, 20));  // plenty of ties
    std::sort(s.begin(), s.end());
    const auto e = equal_frequency_bins(s, k);
    REQUIRE(e.size() == k + 1);
    CHECK(std::is_sorted(e.begin(), e.end()));
    CHECK(e.front() == s.front());
    CHECK(e.back() == s.back());
    std::size_t covered = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto r = bin_index_range(n, k, j);
      CHECK(r.begin == covered);
      covered = r.end;
      CHECK((r.size() == n / k || r.size() == (n + k - 1) / k));
      CHECK(e[j] == s[r.begin]);
    }
    CHECK(covered == n);
  }
}

TEST_CASE("equal_frequency_bins: errors") {
  const std::vector<double> s{1, 2, 3};
  CHECK_THROWS_AS(equal_frequency_bins(s, 4), Error);
  CHECK_THROWS_AS(equal_frequency_bins(s, 0), Error);
  CHECK_THROWS_AS(equal_frequency_bins(std::vector<double>{}, 1), Error);
  CHECK_THROWS_AS(equal_frequency_bins(std::vector<double>{3, 1}, 1), Error);
}

TEST_CASE("locate_bin") {
  const std::vector<double> e{1, 4, 7, 10, 12};
  CHECK(locate_bin(e, 0) == 0);
  CHECK(locate_bin(e, 3.9) == 0);
  CHECK(locate_bin(e, 4) == 1);
  CHECK(locate_bin(e, 11) == 3);
  CHECK(locate_bin(e, 99) == 3);
}

TEST_CASE("split_bill: non-positive bills stay whole") {
  const auto records = small_source(100);
  const auto t = small_template(records);
  Rng rng(1);
  CHECK(split_bill(0, t, rng) == std::vector<Amount>{0});
  CHECK(split_bill(-7, t, rng) == std::vector<Amount>{-7});
}

TEST_CASE("split_bill: parts re-sum exactly") {
  // Two reference amounts and identical bills of 100 calibrated to four
  // expected parts per bill.
  TemplateSettings s;
  s.bins = 1;
  s.mean_parts_per_bill = 4.0;
  const std::vector<Amount> bills(50, 100);
  const auto t = DistributionTemplate::prepare({10.0, 30.0}, bills, s);
  CHECK(t.counts_per_bin()[0] == doctest::Approx(4.0).epsilon(1e-6));

  Rng rng(99);
  double parts = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto p = split_bill(100, t, rng);
    CHECK(std::accumulate(p.begin(), p.end(), Amount{0}) == 100);
    CHECK(std::all_of(p.begin(), p.end(), [](Amount a) { return a >= 1; }));
    parts += static_cast<double>(p.size());
  }
  CHECK(parts / 2000 > 1.5);
}

TEST_CASE("split_bill: exact sums over random bills, max_parts cap") {
  const auto records = small_source(200);
  auto t = small_template(records);
  Rng rng(4);
  for (int i = 0; i < 3000; ++i) {
    const Amount bill = static_cast<Amount>(rng.below(400000)) + 1;
    const auto p = split_bill(bill, t, rng);
    REQUIRE(!p.empty());
    CHECK(std::accumulate(p.begin(), p.end(), Amount{0}) == bill);
    CHECK(p.size() <= t.settings().max_parts);
  }

  TemplateSettings capped;
  capped.max_parts = 3;
  capped.mean_parts_per_bill = 50;
  const auto tc = DistributionTemplate::prepare(synthetic_template_amounts({}), online_month_bills(records), capped);
  for (int i = 0; i < 200; ++i) {
    const auto p = split_bill(500000, tc, rng);
    CHECK(p.size() <= 3);
    CHECK(std::accumulate(p.begin(), p.end(), Amount{0}) == 500000);
  }
}

TEST_CASE("template: calibrated mean parts and equal-frequency bins") {
  const auto records = small_source(2000);
  const auto bills = online_month_bills(records);
  const auto t = small_template(records, 12.0);
  const auto& counts = t.counts_per_bin();
  REQUIRE(counts.size() == t.settings().bins);
  // Size-weighted mean of the per-bin means is the overall mean.
  double mean = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j)
    mean += counts[j] * static_cast<double>(bin_index_range(bills.size(), counts.size(), j).size());
  mean /= static_cast<double>(bills.size());
  CHECK(mean == doctest::Approx(12.0).epsilon(1e-6));
  CHECK(std::is_sorted(t.bin_boundaries().begin(), t.bin_boundaries().end()));
  CHECK(std::is_sorted(t.bill_boundaries().begin(), t.bill_boundaries().end()));

  // Realized parts track the calibration target.
  Rng rng(8);
  double parts = 0;
  for (Amount b : bills) parts += static_cast<double>(split_bill(b, t, rng).size());
  CHECK(parts / static_cast<double>(bills.size()) == doctest::Approx(12.0).epsilon(0.15));
}

TEST_CASE("template: amounts file with header") {
  testing::TempDir dir("tmpl");
  testing::spit(dir / "amounts.csv", "amount\n12.5\n3\n\n40.25\n");
  CHECK(load_template_amounts(dir / "amounts.csv") == std::vector<double>{12.5, 3, 40.25});
  testing::spit(dir / "bad.csv", "amount\n12.5\nx\n");
  CHECK_THROWS_AS(load_template_amounts(dir / "bad.csv"), Error);
  CHECK_THROWS_AS(load_template_amounts(dir / "missing.csv"), Error);
}

TEST_CASE("offline_row: account 4663 first batch") {
  const auto data = parse_source(testing::fixture("pinned_rows.csv"));
  const auto it = std::find_if(data.records.begin(), data.records.end(), [](auto& r) { return r.id == 4663; });
  REQUIRE(it != data.records.end());
  const auto a = offline_row(*it, 0);
  CHECK(a.account == 4663);
  CHECK(a.balance_limit == 50000);
  CHECK(a.sex == 2);
  CHECK(a.education == 3);
  CHECK(a.marriage == 2);
  CHECK(a.age == 23);
  CHECK(a.total_bill == 28718);
  CHECK(a.total_payment == 1028);
  CHECK(a.repayment == 0);
  CHECK(a.default_flag == 0);
}

TEST_CASE("offline_row: running totals") {
  const auto records = small_source(50);
  for (const auto& r : records) {
    for (int b = 0; b < kBatches; ++b) {
      const auto a = offline_row(r, b);
      CHECK(a.total_bill == std::accumulate(r.bill_amt.begin(), r.bill_amt.begin() + b + 1, Amount{0}));
      CHECK(a.total_payment == std::accumulate(r.pay_amt.begin(), r.pay_amt.begin() + b + 1, Amount{0}));
      CHECK(a.repayment == r.pay_status[b]);
    }
  }
}

TEST_CASE("decompose_dataset: conservation, coverage, ordering") {
  const auto records = small_source();
  const auto t = small_template(records);
  const auto d = decompose_dataset(records, t, 42, 2005);

  std::int64_t expected_tid = 1;
  for (int b = 0; b < kBatches; ++b) {
    REQUIRE(d.offline[b].size() == records.size());
    const int month = batch_month(b);
    std::map<AccountId, Amount> exp_sum;
    std::map<AccountId, int> pays;
    std::map<AccountId, Amount> pay_amount;
    for (std::size_t i = 0; i < d.online[b].size(); ++i) {
      const auto& txn = d.online[b][i];
      CHECK(txn.tid == expected_tid++);
      CHECK(txn.date.year == 2005);
      CHECK(txn.date.month == month);
      CHECK(txn.date.day >= 1);
      CHECK(txn.date.day <= days_in_month(2005, month));
      if (i > 0) CHECK(d.online[b][i - 1].date <= txn.date);
      if (txn.type == TxnType::pay) {
        ++pays[txn.account];
        pay_amount[txn.account] = txn.amount;
      } else {
        exp_sum[txn.account] += txn.amount;
      }
    }
    for (const auto& r : records) {
      const int m = b + 1;  // April (index 0) only feeds the offline totals
      CHECK(pays[r.id] == 1);
      CHECK(pay_amount[r.id] == r.pay_amt[m]);
      CHECK(exp_sum[r.id] == r.bill_amt[m]);
      CHECK(d.offline[b][&r - records.data()] == offline_row(r, b));
    }
  }
}

TEST_CASE("decompose_dataset: deterministic and thread-count independent") {
  const auto records = small_source(300);
  const auto t = small_template(records);
  const auto one = serialize(decompose_dataset(records, t, 5, 2005, 1));
  CHECK(one == serialize(decompose_dataset(records, t, 5, 2005, 1)));
  CHECK(one == serialize(decompose_dataset(records, t, 5, 2005, 4)));
  CHECK(one != serialize(decompose_dataset(records, t, 6, 2005, 1)));
}

TEST_CASE("batch files: exact headers and round trip") {
  const auto records = small_source(120);
  const auto t = small_template(records);
  const auto d = decompose_dataset(records, t, 1, 2005);
  std::ostringstream off, on;
  write_offline(off, d.offline[2]);
  write_online(on, d.online[2]);
  CHECK(off.str().rfind("account,balance_limit,sex,education,marriage,age,total_bill,total_payment,repayment,default\n",
                        0) == 0);
  CHECK(on.str().rfind("tid,account,amount,date,type\n", 0) == 0);
  std::istringstream off_in(off.str()), on_in(on.str());
  CHECK(read_offline(off_in, "off") == d.offline[2]);
  CHECK(read_online(on_in, "on") == d.online[2]);

  std::istringstream wrong("tid,account,amount,date\n");
  CHECK_THROWS_AS(read_online(wrong, "x"), Error);
}
