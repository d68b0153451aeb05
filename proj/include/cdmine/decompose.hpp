#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cdmine/records.hpp"
#include "cdmine/rng.hpp"

namespace cdmine {

struct RescaleRange {
  double min1 = 0.0;
  double max1 = 1.0;
  double min2 = 0.0;
  double max2 = 1.0;
};

/// Affine map of v from [min1, max1] onto [min2, max2]. Values outside the
/// source range are clamped first. Throws Errc::degenerate_range when
/// max1 == min1 and Errc::contract for an inverted range.
double rescale(double v, const RescaleRange& range);

/// Quantile (inverse-CDF) edges for equal-frequency binning of sorted
/// samples. Returns n_bins + 1 non-decreasing boundaries; boundary j is the
/// sample at index floor(j * n / n_bins) and the last boundary is the maximum.
/// Bin j owns sample indices bin_index_range(n, n_bins, j), so bins keep equal
/// counts even when boundaries tie.
std::vector<double> equal_frequency_bins(std::span<const double> sorted_samples, std::size_t n_bins);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

IndexRange bin_index_range(std::size_t n, std::size_t n_bins, std::size_t bin);

/// Bin holding value v given boundaries from equal_frequency_bins. Values
/// below the first or above the last boundary land in the outer bins.
std::size_t locate_bin(std::span<const double> boundaries, double v);

struct TemplateSettings {
  std::size_t bins = 10;
  /// Calibration target: mean number of expenditure transactions per
  /// positive monthly bill.
  double mean_parts_per_bill = 12.0;
  /// Safety cap on parts for one bill; the last part absorbs the remainder.
  std::size_t max_parts = 1000;
};

struct SyntheticTemplateParams {
  double mu = 3.3;
  double sigma = 0.9;
  std::size_t count = 100000;
  std::uint64_t seed = 2018;
};

/// Per-transaction amount model derived from a reference amount sample.
///
/// Reference amounts and the bills to be split are both cut into the same
/// number of equal-frequency bins; a bill in bill-bin j draws its parts from
/// reference bin j, so large bills are made of large transactions. Drawn
/// amounts are mapped into the bill currency with rescale(), whose target
/// ceiling is calibrated so that the expected number of parts per positive
/// bill matches TemplateSettings::mean_parts_per_bill.
class DistributionTemplate {
 public:
  static DistributionTemplate prepare(std::vector<double> amounts, std::span<const Amount> bills,
                                      const TemplateSettings& settings = {});

  const std::vector<double>& amounts() const { return amounts_; }
  const std::vector<double>& bin_boundaries() const { return bin_boundaries_; }
  const std::vector<double>& bill_boundaries() const { return bill_boundaries_; }
  /// Expected transactions per bill, keyed by bill-size bin.
  const std::vector<double>& counts_per_bin() const { return counts_per_bin_; }
  const RescaleRange& amount_range() const { return range_; }
  const TemplateSettings& settings() const { return settings_; }

  std::size_t bin_for_bill(Amount bill) const;
  /// One transaction amount from reference bin `bin`, in bill currency.
  double draw_amount(std::size_t bin, Rng& rng) const;

 private:
  std::vector<double> amounts_;
  std::vector<double> bin_boundaries_;
  std::vector<double> bill_boundaries_;
  std::vector<double> counts_per_bin_;
  std::vector<double> bin_mean_unit_;  // mean of (a - min1) / (max1 - min1) per bin
  RescaleRange range_;
  TemplateSettings settings_;
};

std::vector<double> load_template_amounts(const std::filesystem::path& path);
std::vector<double> synthetic_template_amounts(const SyntheticTemplateParams& params);

/// Positive monthly bills of the online months; the sample the template is
/// calibrated against.
std::vector<Amount> online_month_bills(const std::vector<CustomerRecord>& records);

/// Splits a monthly bill into expenditure amounts that sum exactly to the
/// bill. Non-positive bills are returned unsplit.
std::vector<Amount> split_bill(Amount bill, const DistributionTemplate& tmpl, Rng& rng);

struct Decomposition {
  std::array<OfflineBatch, kBatches> offline;
  std::array<OnlineBatch, kBatches> online;
};

/// Calendar month (1-12) of batch index 0..4: May through September.
constexpr int batch_month(int batch_index) { return 5 + batch_index; }

/// Builds five offline batches (profile with running totals through the
/// month before the batch month) and five online batches (one pay and the
/// exp splits of the month's bill per account, chronologically ordered, tids
/// sequential across batches). Per-account random streams depend only on
/// (seed, account, month), so the thread count never changes the output.
Decomposition decompose_dataset(const std::vector<CustomerRecord>& records, const DistributionTemplate& tmpl,
                                std::uint64_t seed, int year = 2005, unsigned threads = 1);

OfflineAccount offline_row(const CustomerRecord& r, int batch_index);

void write_offline(std::ostream& out, const OfflineBatch& batch);
void write_online(std::ostream& out, const OnlineBatch& batch);
OfflineBatch read_offline(const std::filesystem::path& path);
OnlineBatch read_online(const std::filesystem::path& path);
OfflineBatch read_offline(std::istream& in, const std::string& origin);
OnlineBatch read_online(std::istream& in, const std::string& origin);

inline constexpr const char* kOfflineHeader =
    "account,balance_limit,sex,education,marriage,age,total_bill,total_payment,repayment,default";
inline constexpr const char* kOnlineHeader = "tid,account,amount,date,type";

}  // namespace cdmine
