#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace cdmine::csv {

/// Splits one CSV line. Handles double-quoted fields and a trailing CR.
std::vector<std::string> split_line(std::string_view line);

/// Reads the next line into `line`; returns false at EOF. Strips a UTF-8 BOM
/// on the first call for a given stream position 0.
bool read_line(std::istream& in, std::string& line);

std::string trim(std::string_view s);

/// Strict integer parse. Accepts an optional sign and an integral decimal
/// form such as "20000.0"; rejects anything else.
bool parse_int(std::string_view text, std::int64_t& out);
bool parse_double(std::string_view text, double& out);

/// Shortest text that round-trips the double exactly.
std::string format_double(double v);

/// Writes `content` to `path` through a sibling temporary and a rename.
void write_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace cdmine::csv
