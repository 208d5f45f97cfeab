// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hcgst {

using CsvRows = std::vector<std::vector<std::string>>;

/// Comma-separated, LF (or CRLF) terminated; blank lines are skipped.
CsvRows read_csv(const std::filesystem::path& path, bool has_header);

long long parse_int(std::string_view text, std::size_t row);
double parse_double(std::string_view text, std::size_t row);

/// Shortest representation that round-trips exactly.
std::string format_double(double value);

}  // namespace hcgst
