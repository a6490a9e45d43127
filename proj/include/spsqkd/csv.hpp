#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace spsqkd::io {

// Format a double with shortest round-trip representation, locale-independent.
std::string format_double(double v);

// Parse a double, locale-independent; throws IoError with context on failure.
double parse_double(const std::string& token, const std::string& context);

// Two-column numeric CSV with a mandatory exact header line. Used for the
// histogram (delay_ns,counts), power sweep (power_uw,counts_per_s) and
// stability (time_s,counts_per_s) inputs.
struct TwoColumns {
    std::vector<double> first;
    std::vector<double> second;
};

TwoColumns read_two_column_csv(const std::filesystem::path& path,
                               const std::string& header_a, const std::string& header_b);

// Atomically write text to `path` (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace spsqkd::io
