#include "cdmine/ingest.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cdmine/csv.hpp"
#include "cdmine/error.hpp"

namespace cdmine {
namespace {

// Source month index (0 = April) for the suffixed column families. PAY_1 does
// not exist in the source; September's repayment status is PAY_0.
constexpr int kPayStatusSuffix[kMonths] = {6, 5, 4, 3, 2, 0};
constexpr int kAmountSuffix[kMonths] = {6, 5, 4, 3, 2, 1};

enum Col : int {
  kId,
  kLimit,
  kSex,
  kEducation,
  kMarriage,
  kAge,
  kPayStatus0,                        // 6 entries, oldest first
  kBill0 = kPayStatus0 + kMonths,     // 6 entries
  kPayAmt0 = kBill0 + kMonths,        // 6 entries
  kLabel = kPayAmt0 + kMonths,
  kColumnCount
};

std::vector<std::string> build_columns() {
  std::vector<std::string> cols(kColumnCount);
  cols[kId] = "ID";
  cols[kLimit] = "LIMIT_BAL";
  cols[kSex] = "SEX";
  cols[kEducation] = "EDUCATION";
  cols[kMarriage] = "MARRIAGE";
  cols[kAge] = "AGE";
  for (int m = 0; m < kMonths; ++m) {
    cols[kPayStatus0 + m] = "PAY_" + std::to_string(kPayStatusSuffix[m]);
    cols[kBill0 + m] = "BILL_AMT" + std::to_string(kAmountSuffix[m]);
    cols[kPayAmt0 + m] = "PAY_AMT" + std::to_string(kAmountSuffix[m]);
  }
  cols[kLabel] = kLabelColumn;
  return cols;
}

// Canonical file order: the source spreadsheet lists newest month first.
std::vector<int> canonical_order() {
  std::vector<int> order = {kId, kLimit, kSex, kEducation, kMarriage, kAge};
  for (int m = kMonths - 1; m >= 0; --m) order.push_back(kPayStatus0 + m);
  for (int m = kMonths - 1; m >= 0; --m) order.push_back(kBill0 + m);
  for (int m = kMonths - 1; m >= 0; --m) order.push_back(kPayAmt0 + m);
  order.push_back(kLabel);
  return order;
}

}  // namespace

const std::vector<std::string>& source_columns() {
  static const std::vector<std::string> cols = [] {
    const auto by_role = build_columns();
    std::vector<std::string> out;
    for (int c : canonical_order()) out.push_back(by_role[c]);
    return out;
  }();
  return cols;
}

SourceData parse_source(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::input, "cannot open source file " + path.string());
  return parse_source(in, path.string());
}

SourceData parse_source(std::istream& in, const std::string& origin) {
  std::string line;
  if (!csv::read_line(in, line) || csv::trim(line).empty()) fail(Errc::input, origin + ": empty file");

  const auto header = csv::split_line(line);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(csv::trim(header[i]), i);

  const auto names = build_columns();
  std::vector<std::size_t> index(kColumnCount);
  for (int c = 0; c < kColumnCount; ++c) {
    auto it = position.find(names[c]);
    if (it == position.end()) fail(Errc::schema, origin + ": missing column '" + names[c] + "'");
    index[c] = it->second;
  }

  SourceData data;
  std::unordered_set<AccountId> seen;
  std::size_t row = 0;
  while (csv::read_line(in, line)) {
    if (csv::trim(line).empty()) continue;
    ++row;
    const auto cells = csv::split_line(line);
    auto where = [&] { return origin + ": row " + std::to_string(row); };
    if (cells.size() != header.size()) {
      fail(Errc::row, where() + ": expected " + std::to_string(header.size()) + " cells, got " +
                          std::to_string(cells.size()));
    }
    auto get = [&](int c) {
      std::int64_t v = 0;
      if (!csv::parse_int(cells[index[c]], v)) {
        fail(Errc::row, where() + ": non-numeric value '" + cells[index[c]] + "' in column '" + names[c] + "'");
      }
      return v;
    };

    CustomerRecord r;
    r.id = get(kId);
    r.limit_bal = get(kLimit);
    r.sex = static_cast<int>(get(kSex));
    r.education = static_cast<int>(get(kEducation));
    r.marriage = static_cast<int>(get(kMarriage));
    r.age = static_cast<int>(get(kAge));
    for (int m = 0; m < kMonths; ++m) {
      r.pay_status[m] = static_cast<int>(get(kPayStatus0 + m));
      r.bill_amt[m] = get(kBill0 + m);
      r.pay_amt[m] = get(kPayAmt0 + m);
    }
    r.label = static_cast<int>(get(kLabel));

    if (r.id <= 0) fail(Errc::row, where() + ": ID must be positive");
    if (r.label != 0 && r.label != 1) fail(Errc::row, where() + ": label must be 0 or 1");
    if (r.limit_bal <= 0) fail(Errc::row, where() + ": LIMIT_BAL must be positive");
    if (r.age <= 0) fail(Errc::row, where() + ": AGE must be positive");
    if (!seen.insert(r.id).second) fail(Errc::row, where() + ": duplicate ID " + std::to_string(r.id));

    data.default_count += static_cast<std::size_t>(r.label);
    data.records.push_back(r);
  }
  if (data.records.empty()) fail(Errc::input, origin + ": no data rows");
  return data;
}

void write_source(std::ostream& out, const std::vector<CustomerRecord>& records) {
  const auto& cols = source_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const auto order = canonical_order();
  std::vector<std::int64_t> v(kColumnCount);
  for (const auto& r : records) {
    v[kId] = r.id;
    v[kLimit] = r.limit_bal;
    v[kSex] = r.sex;
    v[kEducation] = r.education;
    v[kMarriage] = r.marriage;
    v[kAge] = r.age;
    for (int m = 0; m < kMonths; ++m) {
      v[kPayStatus0 + m] = r.pay_status[m];
      v[kBill0 + m] = r.bill_amt[m];
      v[kPayAmt0 + m] = r.pay_amt[m];
    }
    v[kLabel] = r.label;
    for (std::size_t i = 0; i < order.size(); ++i) out << (i ? "," : "") << v[order[i]];
    out << '\n';
  }
}

void write_source(const std::filesystem::path& path, const std::vector<CustomerRecord>& records) {
  std::ostringstream out;
  write_source(out, records);
  csv::write_atomic(path, out.str());
}

}  // namespace cdmine
