#include "relabel/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "relabel/errors.hpp"

namespace relabel::csv {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

File read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_data("cannot open file: " + path);
    File file;
    std::string line;
    std::size_t line_number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            file.header = split_line(line);
            have_header = true;
            continue;
        }
        file.rows.push_back({line_number, split_line(line)});
    }
    if (!have_header) throw_data("file has no header row: " + path);
    return file;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(std::string_view text, const std::string& path, std::size_t line_number) {
    std::string s(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        throw_data(path + ":" + std::to_string(line_number) + ": malformed number '" + s + "'");
    return v;
}

int parse_int(std::string_view text, const std::string& path, std::size_t line_number) {
    std::string s(text);
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        throw_data(path + ":" + std::to_string(line_number) + ": malformed integer '" + s + "'");
    return static_cast<int>(v);
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw_stage("cannot write file: " + tmp.string());
        out << content;
        if (!out) throw_stage("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw_stage("rename failed for " + target.string() + ": " + ec.message());
}

std::string artifact_header(std::string_view command, std::uint64_t seed, std::uint64_t config_hash) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# relabel %.*s seed=%llu config=%016llx\n",
                  static_cast<int>(command.size()), command.data(),
                  static_cast<unsigned long long>(seed),
                  static_cast<unsigned long long>(config_hash));
    return buf;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace relabel::csv
