#pragma once

#include <string>
#include <vector>

namespace tend {

// Shortest round-trippable decimal form of a double (printf %.17g trimmed by
// the runtime); used everywhere CSV determinism matters.
std::string format_double(double v);

// Write-to-temp-then-rename so readers never observe partial files.
void atomic_write_file(const std::string& path, const std::string& contents);

void ensure_parent_dir(const std::string& path);
void ensure_dir(const std::string& path);

std::string read_text_file(const std::string& path);

// Split a comma-separated list, trimming whitespace, dropping empty items.
std::vector<std::string> split_csv_list(const std::string& s);
std::string trim(const std::string& s);

}  // namespace tend
