#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace qtel::util {

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);

/// Write via a sibling temp file and rename, so readers never observe a
/// partially written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

/// FNV-1a 64-bit hash, returned as 16 hex digits.
std::string fnv1a64_hex(const std::string& bytes);

/// Split one CSV line on commas (no quoting; our formats never need it).
std::vector<std::string> split_csv_line(const std::string& line);

/// Parse a CSV file: first line must equal `expected_header`, remaining
/// lines are returned as string cells.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               const std::string& expected_header);

double parse_double(const std::string& s);

} // namespace qtel::util
