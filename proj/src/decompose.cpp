#include "cdmine/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>

#include "cdmine/csv.hpp"
#include "cdmine/error.hpp"
#include "cdmine/parallel.hpp"

namespace cdmine {

double rescale(double v, const RescaleRange& r) {
  if (!(r.max1 > r.min1)) {
    if (r.max1 == r.min1) fail(Errc::degenerate_range, "rescale: source range is degenerate (max1 == min1)");
    fail(Errc::contract, "rescale: source range inverted (max1 < min1)");
  }
  if (r.max2 < r.min2) fail(Errc::contract, "rescale: target range inverted (max2 < min2)");
  const double clamped = std::clamp(v, r.min1, r.max1);
  return (r.max2 - r.min2) * (clamped - r.min1) / (r.max1 - r.min1) + r.min2;
}

IndexRange bin_index_range(std::size_t n, std::size_t n_bins, std::size_t bin) {
  return {bin * n / n_bins, (bin + 1) * n / n_bins};
}

std::vector<double> equal_frequency_bins(std::span<const double> sorted, std::size_t n_bins) {
  if (sorted.empty()) fail(Errc::binning, "equal_frequency_bins: no samples");
  if (n_bins == 0) fail(Errc::binning, "equal_frequency_bins: bin count must be positive");
  if (n_bins > sorted.size()) {
    fail(Errc::binning, "equal_frequency_bins: " + std::to_string(n_bins) + " bins requested for " +
                            std::to_string(sorted.size()) + " samples");
  }
  if (!std::is_sorted(sorted.begin(), sorted.end())) fail(Errc::binning, "equal_frequency_bins: samples not sorted");
  std::vector<double> edges(n_bins + 1);
  for (std::size_t j = 0; j < n_bins; ++j) edges[j] = sorted[bin_index_range(sorted.size(), n_bins, j).begin];
  edges[n_bins] = sorted.back();
  return edges;
}

std::size_t locate_bin(std::span<const double> boundaries, double v) {
  if (boundaries.size() < 2) return 0;
  const auto interior = boundaries.subspan(1, boundaries.size() - 2);
  return static_cast<std::size_t>(std::upper_bound(interior.begin(), interior.end(), v) - interior.begin());
}

namespace {

double expected_parts(double bill, double unit_mean, double ceiling) {
  const double mean_amount = (ceiling - 1.0) * unit_mean + 1.0;
  return std::max(1.0, bill / mean_amount + 0.5);
}

}  // namespace

DistributionTemplate DistributionTemplate::prepare(std::vector<double> amounts, std::span<const Amount> bills,
                                                   const TemplateSettings& settings) {
  if (settings.bins == 0) fail(Errc::config, "template: bin count must be positive");
  if (!(settings.mean_parts_per_bill >= 1.0)) fail(Errc::config, "template: mean_parts_per_bill must be >= 1");
  if (settings.max_parts == 0) fail(Errc::config, "template: max_parts must be positive");
  std::erase_if(amounts, [](double a) { return !std::isfinite(a); });
  if (amounts.empty()) fail(Errc::input, "template: no reference amounts");
  std::sort(amounts.begin(), amounts.end());

  std::vector<double> positive;
  for (Amount b : bills)
    if (b > 0) positive.push_back(static_cast<double>(b));
  std::sort(positive.begin(), positive.end());

  DistributionTemplate t;
  t.settings_ = settings;
  std::size_t bins = std::min(settings.bins, amounts.size());
  if (!positive.empty()) bins = std::min(bins, positive.size());
  else bins = 1;

  t.range_ = RescaleRange{amounts.front(), amounts.back(), 1.0, 1.0};
  if (!(t.range_.max1 > t.range_.min1)) fail(Errc::degenerate_range, "template: all reference amounts are equal");
  t.amounts_ = std::move(amounts);
  t.bin_boundaries_ = equal_frequency_bins(t.amounts_, bins);
  t.bill_boundaries_ = positive.empty() ? std::vector<double>{1.0, 1.0} : equal_frequency_bins(positive, bins);

  const double span = t.range_.max1 - t.range_.min1;
  t.bin_mean_unit_.assign(bins, 0.0);
  for (std::size_t j = 0; j < bins; ++j) {
    const auto r = bin_index_range(t.amounts_.size(), bins, j);
    double sum = 0.0;
    for (std::size_t i = r.begin; i < r.end; ++i) sum += (t.amounts_[i] - t.range_.min1) / span;
    t.bin_mean_unit_[j] = sum / static_cast<double>(r.size());
  }

  // Bills are grouped by the same index split as the boundaries.
  auto mean_parts = [&](double ceiling) {
    double total = 0.0;
    for (std::size_t j = 0; j < bins; ++j) {
      const auto r = bin_index_range(positive.size(), bins, j);
      for (std::size_t i = r.begin; i < r.end; ++i) total += expected_parts(positive[i], t.bin_mean_unit_[j], ceiling);
    }
    return total / static_cast<double>(positive.size());
  };

  double ceiling = 1.0;
  if (!positive.empty()) {
    double lo = 1.0;
    double hi = std::max(2.0, positive.back() * 4.0);
    if (mean_parts(lo) <= settings.mean_parts_per_bill) {
      ceiling = lo;
    } else if (mean_parts(hi) >= settings.mean_parts_per_bill) {
      ceiling = hi;
    } else {
      for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
        const double mid = std::sqrt(lo * hi);
        (mean_parts(mid) > settings.mean_parts_per_bill ? lo : hi) = mid;
      }
      ceiling = hi;
    }
  }
  t.range_.max2 = ceiling;

  t.counts_per_bin_.assign(bins, 0.0);
  for (std::size_t j = 0; j < bins && !positive.empty(); ++j) {
    const auto r = bin_index_range(positive.size(), bins, j);
    double sum = 0.0;
    for (std::size_t i = r.begin; i < r.end; ++i) sum += expected_parts(positive[i], t.bin_mean_unit_[j], ceiling);
    t.counts_per_bin_[j] = sum / static_cast<double>(r.size());
  }
  return t;
}

std::size_t DistributionTemplate::bin_for_bill(Amount bill) const {
  return locate_bin(bill_boundaries_, static_cast<double>(bill));
}

double DistributionTemplate::draw_amount(std::size_t bin, Rng& rng) const {
  const auto r = bin_index_range(amounts_.size(), bin_boundaries_.size() - 1, bin);
  return rescale(amounts_[r.begin + rng.below(r.size())], range_);
}

std::vector<double> load_template_amounts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::input, "cannot open template file " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (csv::read_line(in, line)) {
    ++line_no;
    const auto cells = csv::split_line(line);
    const std::string cell = csv::trim(cells.front());
    if (cell.empty()) continue;
    double v = 0;
    if (!csv::parse_double(cell, v) || !std::isfinite(v)) {
      if (line_no == 1) continue;  // header
      fail(Errc::row, path.string() + ": line " + std::to_string(line_no) + ": non-numeric amount '" + cell + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) fail(Errc::input, path.string() + ": no amounts");
  return out;
}

std::vector<double> synthetic_template_amounts(const SyntheticTemplateParams& p) {
  if (p.count < 2 || !(p.sigma > 0)) fail(Errc::config, "synthetic template: count >= 2 and sigma > 0 required");
  Rng rng(derive_seed(p.seed, 0x7e3a));
  std::vector<double> out(p.count);
  for (auto& a : out) a = std::round(rng.lognormal(p.mu, p.sigma) * 100.0) / 100.0;
  return out;
}

std::vector<Amount> online_month_bills(const std::vector<CustomerRecord>& records) {
  std::vector<Amount> out;
  out.reserve(records.size() * kBatches);
  for (const auto& r : records)
    for (int m = 1; m < kMonths; ++m)
      if (r.bill_amt[m] > 0) out.push_back(r.bill_amt[m]);
  return out;
}

std::vector<Amount> split_bill(Amount bill, const DistributionTemplate& tmpl, Rng& rng) {
  if (bill <= 0) return {bill};
  const std::size_t bin = tmpl.bin_for_bill(bill);
  const std::size_t cap = tmpl.settings().max_parts;
  std::vector<Amount> parts;
  Amount remaining = bill;
  while (true) {
    const Amount a = std::max<Amount>(1, std::llround(tmpl.draw_amount(bin, rng)));
    if (a >= remaining || parts.size() + 1 >= cap) {
      parts.push_back(remaining);
      break;
    }
    parts.push_back(a);
    remaining -= a;
  }
  return parts;
}

OfflineAccount offline_row(const CustomerRecord& r, int batch_index) {
  OfflineAccount a;
  a.account = r.id;
  a.balance_limit = r.limit_bal;
  a.sex = r.sex;
  a.education = r.education;
  a.marriage = r.marriage;
  a.age = r.age;
  for (int m = 0; m <= batch_index; ++m) {
    a.total_bill += r.bill_amt[m];
    a.total_payment += r.pay_amt[m];
  }
  a.repayment = r.pay_status[batch_index];
  a.default_flag = r.label;
  return a;
}

namespace {

struct PendingTxn {
  Date date;
  AccountId account;
  std::uint32_t seq;
  Amount amount;
  TxnType type;
};

}  // namespace

Decomposition decompose_dataset(const std::vector<CustomerRecord>& records, const DistributionTemplate& tmpl,
                                std::uint64_t seed, int year, unsigned threads) {
  if (year < 1 || year > 9999) fail(Errc::config, "decompose: year out of range");
  Decomposition out;
  for (int b = 0; b < kBatches; ++b) {
    out.offline[b].reserve(records.size());
    for (const auto& r : records) out.offline[b].push_back(offline_row(r, b));
  }

  std::vector<std::array<std::vector<PendingTxn>, kBatches>> per_account(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto& r = records[i];
    for (int b = 0; b < kBatches; ++b) {
      const int source_month = b + 1;
      const int month = batch_month(b);
      const int days = days_in_month(year, month);
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r.id), static_cast<std::uint64_t>(source_month)));
      auto& txns = per_account[i][b];
      std::uint32_t seq = 0;
      txns.push_back({Date{year, month, static_cast<int>(rng.between(1, days))}, r.id, seq++,
                      r.pay_amt[source_month], TxnType::pay});
      for (Amount part : split_bill(r.bill_amt[source_month], tmpl, rng)) {
        txns.push_back({Date{year, month, static_cast<int>(rng.between(1, days))}, r.id, seq++, part, TxnType::exp});
      }
    }
  });

  std::int64_t next_tid = 1;
  for (int b = 0; b < kBatches; ++b) {
    std::vector<PendingTxn> all;
    std::size_t total = 0;
    for (const auto& acc : per_account) total += acc[b].size();
    all.reserve(total);
    for (auto& acc : per_account) {
      all.insert(all.end(), acc[b].begin(), acc[b].end());
      acc[b] = {};
    }
    std::sort(all.begin(), all.end(), [](const PendingTxn& x, const PendingTxn& y) {
      if (x.date != y.date) return x.date < y.date;
      if (x.account != y.account) return x.account < y.account;
      return x.seq < y.seq;
    });
    auto& batch = out.online[b];
    batch.reserve(all.size());
    for (const auto& p : all) batch.push_back({next_tid++, p.account, p.amount, p.date, p.type});
  }
  return out;
}

void write_offline(std::ostream& out, const OfflineBatch& batch) {
  out << kOfflineHeader << '\n';
  for (const auto& a : batch) {
    out << a.account << ',' << a.balance_limit << ',' << a.sex << ',' << a.education << ',' << a.marriage << ','
        << a.age << ',' << a.total_bill << ',' << a.total_payment << ',' << a.repayment << ',' << a.default_flag
        << '\n';
  }
}

void write_online(std::ostream& out, const OnlineBatch& batch) {
  out << kOnlineHeader << '\n';
  for (const auto& t : batch) {
    out << t.tid << ',' << t.account << ',' << t.amount << ',' << t.date.to_string() << ',' << to_string(t.type)
        << '\n';
  }
}

namespace {

std::vector<std::string> expect_header(std::istream& in, const std::string& origin, const char* expected) {
  std::string line;
  if (!csv::read_line(in, line)) fail(Errc::input, origin + ": empty file");
  if (csv::trim(line) != expected) {
    fail(Errc::schema, origin + ": unexpected header '" + line + "', expected '" + expected + "'");
  }
  return csv::split_line(line);
}

std::int64_t cell_int(const std::vector<std::string>& cells, std::size_t i, const std::string& where) {
  std::int64_t v = 0;
  if (!csv::parse_int(cells[i], v)) fail(Errc::row, where + ": non-numeric value '" + cells[i] + "'");
  return v;
}

}  // namespace

OfflineBatch read_offline(std::istream& in, const std::string& origin) {
  expect_header(in, origin, kOfflineHeader);
  OfflineBatch out;
  std::string line;
  std::size_t row = 0;
  while (csv::read_line(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto c = csv::split_line(line);
    const std::string where = origin + ": row " + std::to_string(row);
    if (c.size() != 10) fail(Errc::row, where + ": expected 10 cells");
    OfflineAccount a;
    a.account = cell_int(c, 0, where);
    a.balance_limit = cell_int(c, 1, where);
    a.sex = static_cast<int>(cell_int(c, 2, where));
    a.education = static_cast<int>(cell_int(c, 3, where));
    a.marriage = static_cast<int>(cell_int(c, 4, where));
    a.age = static_cast<int>(cell_int(c, 5, where));
    a.total_bill = cell_int(c, 6, where);
    a.total_payment = cell_int(c, 7, where);
    a.repayment = static_cast<int>(cell_int(c, 8, where));
    a.default_flag = static_cast<int>(cell_int(c, 9, where));
    if (a.default_flag != 0 && a.default_flag != 1) fail(Errc::row, where + ": default must be 0 or 1");
    out.push_back(a);
  }
  return out;
}

OnlineBatch read_online(std::istream& in, const std::string& origin) {
  expect_header(in, origin, kOnlineHeader);
  OnlineBatch out;
  std::string line;
  std::size_t row = 0;
  while (csv::read_line(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto c = csv::split_line(line);
    const std::string where = origin + ": row " + std::to_string(row);
    if (c.size() != 5) fail(Errc::row, where + ": expected 5 cells");
    OnlineTransaction t;
    t.tid = cell_int(c, 0, where);
    t.account = cell_int(c, 1, where);
    t.amount = cell_int(c, 2, where);
    try {
      t.date = Date::parse(csv::trim(c[3]));
      t.type = parse_txn_type(csv::trim(c[4]));
    } catch (const Error& e) {
      fail(Errc::row, where + ": " + e.what());
    }
    out.push_back(t);
  }
  return out;
}

OfflineBatch read_offline(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::input, "cannot open offline batch " + path.string());
  return read_offline(in, path.string());
}

OnlineBatch read_online(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::input, "cannot open online batch " + path.string());
  return read_online(in, path.string());
}

}  // namespace cdmine
