#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace relabel::csv {

// Splits one CSV line on commas. No quoting: identifiers and attribute names
// are validated to be comma-free where they enter the system.
std::vector<std::string> split_line(std::string_view line);

struct Row {
    std::size_t line_number;  // 1-based, in the physical file
    std::vector<std::string> fields;
};

// Reads a CSV file. Lines starting with '#' are artifact headers and are
// skipped; the first remaining line is returned as `header`.
struct File {
    std::vector<std::string> header;
    std::vector<Row> rows;
};
File read_file(const std::string& path);

// Shortest text that round-trips the exact double ("%.17g").
std::string format_double(double v);

double parse_double(std::string_view text, const std::string& path, std::size_t line_number);
int parse_int(std::string_view text, const std::string& path, std::size_t line_number);

// Writes via temp file + rename so partially written artifacts never appear
// under the final name.
void atomic_write(const std::string& path, const std::string& content);

// One-line '#' header stamped into every artifact: command, seed, config hash.
std::string artifact_header(std::string_view command, std::uint64_t seed, std::uint64_t config_hash);

std::uint64_t fnv1a64(std::string_view text);

}  // namespace relabel::csv
