#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdmine/records.hpp"

namespace cdmine {

struct SourceData {
  std::vector<CustomerRecord> records;
  std::size_t default_count = 0;

  double default_rate() const {
    return records.empty() ? 0.0 : static_cast<double>(default_count) / static_cast<double>(records.size());
  }
};

/// Header names of the source CSV in canonical column order.
const std::vector<std::string>& source_columns();
inline constexpr const char* kLabelColumn = "default payment next month";

/// Parses the source CSV. Columns are matched by header name, so their order
/// in the file does not matter. Throws Error with Errc::input (missing or
/// empty file), Errc::schema (missing column) or Errc::row (bad cell, with the
/// 1-based data row index in the message).
SourceData parse_source(const std::filesystem::path& path);
SourceData parse_source(std::istream& in, const std::string& origin = "<stream>");

/// Writes records in canonical column order; parse_source reads them back
/// unchanged.
void write_source(std::ostream& out, const std::vector<CustomerRecord>& records);
void write_source(const std::filesystem::path& path, const std::vector<CustomerRecord>& records);

}  // namespace cdmine
