#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cdmine {

using Amount = std::int64_t;  // whole currency units
using AccountId = std::int64_t;

inline constexpr int kMonths = 6;
inline constexpr int kBatches = 5;

/// One row of the source dataset. Month-indexed arrays run oldest first:
/// index 0 is April (PAY_6 / BILL_AMT6 / PAY_AMT6), index 5 is September
/// (PAY_0 / BILL_AMT1 / PAY_AMT1).
struct CustomerRecord {
  AccountId id = 0;
  Amount limit_bal = 0;
  int sex = 0;
  int education = 0;
  int marriage = 0;
  int age = 0;
  std::array<int, kMonths> pay_status{};
  std::array<Amount, kMonths> bill_amt{};
  std::array<Amount, kMonths> pay_amt{};
  int label = 0;

  friend bool operator==(const CustomerRecord&, const CustomerRecord&) = default;
};

/// Summarized account profile, one row of an offline batch.
struct OfflineAccount {
  AccountId account = 0;
  Amount balance_limit = 0;
  int sex = 0;
  int education = 0;
  int marriage = 0;
  int age = 0;
  Amount total_bill = 0;
  Amount total_payment = 0;
  int repayment = 0;
  int default_flag = 0;

  friend bool operator==(const OfflineAccount&, const OfflineAccount&) = default;
};

inline constexpr std::size_t kOfflineFeatureCount = 8;

/// Classifier features of an offline row. The account key and the label are
/// not features.
std::array<double, kOfflineFeatureCount> offline_features(const OfflineAccount& a);
const std::array<std::string_view, kOfflineFeatureCount>& offline_feature_names();

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  std::string to_string() const;  // YYYY-MM-DD
  static Date parse(std::string_view text);
  friend auto operator<=>(const Date&, const Date&) = default;
};

int days_in_month(int year, int month);

enum class TxnType : std::uint8_t { pay, exp };

std::string_view to_string(TxnType t);
TxnType parse_txn_type(std::string_view text);

struct OnlineTransaction {
  std::int64_t tid = 0;
  AccountId account = 0;
  Amount amount = 0;
  Date date;
  TxnType type = TxnType::exp;

  friend bool operator==(const OnlineTransaction&, const OnlineTransaction&) = default;
};

using OfflineBatch = std::vector<OfflineAccount>;
using OnlineBatch = std::vector<OnlineTransaction>;

}  // namespace cdmine
