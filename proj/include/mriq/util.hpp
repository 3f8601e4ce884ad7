#pragma once

#include <string>
#include <vector>

namespace mriq {

/// Shortest decimal form that round-trips the exact double (std::to_chars).
std::string fmt_double(double v);

/// Split one CSV line on commas. No quoting: fields written by this project
/// never contain commas, and save_manifest rejects ones that would.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace mriq
