#include "spsqkd/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "spsqkd/errors.hpp"

namespace spsqkd::io {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& token, const std::string& context) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw IoError(context + ": '" + token + "' is not a number");
    }
    return v;
}

namespace {

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

TwoColumns read_two_column_csv(const std::filesystem::path& path,
                               const std::string& header_a, const std::string& header_b) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    const std::string expected = header_a + "," + header_b;
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("'" + path.string() + "' is empty, expected header '" + expected + "'");
    }
    line = strip_cr(line);
    if (line != expected) {
        throw IoError("'" + path.string() + "': expected header '" + expected + "', got '" +
                      line + "'");
    }

    TwoColumns out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw IoError("'" + path.string() + "' row " + std::to_string(row) +
                          ": expected two comma-separated columns");
        }
        const std::string ctx = "'" + path.string() + "' row " + std::to_string(row);
        out.first.push_back(parse_double(line.substr(0, comma), ctx + " column 1"));
        out.second.push_back(parse_double(line.substr(comma + 1), ctx + " column 2"));
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() +
                      "': " + ec.message());
    }
}

}  // namespace spsqkd::io
