#include "cdmine/records.hpp"

#include <charconv>
#include <cstdio>

#include "cdmine/error.hpp"

namespace cdmine {

std::array<double, kOfflineFeatureCount> offline_features(const OfflineAccount& a) {
  return {static_cast<double>(a.balance_limit), static_cast<double>(a.sex),
          static_cast<double>(a.education),     static_cast<double>(a.marriage),
          static_cast<double>(a.age),           static_cast<double>(a.total_bill),
          static_cast<double>(a.total_payment), static_cast<double>(a.repayment)};
}

const std::array<std::string_view, kOfflineFeatureCount>& offline_feature_names() {
  static const std::array<std::string_view, kOfflineFeatureCount> names = {
      "balance_limit", "sex", "education", "marriage", "age", "total_bill", "total_payment", "repayment"};
  return names;
}

int days_in_month(int year, int month) {
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) fail(Errc::invalid_argument, "month out of range: " + std::to_string(month));
  if (month == 2) {
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return leap ? 29 : 28;
  }
  return days[month - 1];
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse(std::string_view text) {
  Date d;
  auto field = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    auto r = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return r.ec == std::errc{} && r.ptr == text.data() + pos + len;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !field(0, 4, d.year) || !field(5, 2, d.month) ||
      !field(8, 2, d.day) || d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    fail(Errc::row, "invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  return d;
}

std::string_view to_string(TxnType t) { return t == TxnType::pay ? "pay" : "exp"; }

TxnType parse_txn_type(std::string_view text) {
  if (text == "pay") return TxnType::pay;
  if (text == "exp") return TxnType::exp;
  fail(Errc::row, "invalid transaction type '" + std::string(text) + "'");
}

}  // namespace cdmine
