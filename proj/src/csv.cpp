#include "shsic/csv.hpp"

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace shsic {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
        ++a;
    }
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
        --b;
    }
    return s.substr(a, b - a);
}

bool parse_double(const std::string& field, double& out) {
    const std::string t = trim(field);
    if (t.empty()) {
        return false;
    }
    const char* begin = t.data();
    const char* end = begin + t.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

} // namespace

CsvTable read_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) {
        throw data_error("cannot open " + path);
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        rows.push_back(split_line(line));
    }
    if (rows.empty()) {
        throw data_error(path + ": empty file");
    }

    // Header detection: keep the first row as a header when any of its fields
    // is not numeric.
    CsvTable table;
    std::size_t first_data = 0;
    {
        double tmp;
        bool numeric = true;
        for (const std::string& f : rows[0]) {
            if (!parse_double(f, tmp)) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            table.header = rows[0];
            first_data = 1;
        }
    }
    if (first_data >= rows.size()) {
        throw data_error(path + ": no data rows");
    }

    const std::size_t skip = opts.index_column ? 1 : 0;
    const std::size_t width = rows[first_data].size();
    if (width <= skip) {
        throw data_error(path + ": no value columns");
    }
    if (opts.index_column && !table.header.empty()) {
        table.header.erase(table.header.begin());
    }

    table.values.resize(static_cast<Eigen::Index>(rows.size() - first_data),
                        static_cast<Eigen::Index>(width - skip));
    for (std::size_t r = first_data; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            throw data_error(path + ":" + std::to_string(r + 1) + ": expected " +
                             std::to_string(width) + " fields, got " +
                             std::to_string(rows[r].size()));
        }
        for (std::size_t c = skip; c < width; ++c) {
            double v;
            if (!parse_double(rows[r][c], v)) {
                throw data_error(path + ":" + std::to_string(r + 1) + ":" +
                                 std::to_string(c + 1) + ": cannot parse '" + rows[r][c] +
                                 "' as a number");
            }
            table.values(static_cast<Eigen::Index>(r - first_data),
                         static_cast<Eigen::Index>(c - skip)) = v;
        }
    }
    return table;
}

void write_csv(const std::string& path, const Eigen::Ref<const Eigen::MatrixXd>& m,
               const std::vector<std::string>& header, const CsvOptions& opts) {
    std::ofstream out(path);
    if (!out) {
        throw data_error("cannot write " + path);
    }
    if (!header.empty()) {
        if (opts.index_column) {
            out << "index,";
        }
        for (std::size_t i = 0; i < header.size(); ++i) {
            out << header[i] << (i + 1 < header.size() ? "," : "");
        }
        out << "\n";
    }
    char buf[64];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (opts.index_column) {
            out << (r + 1) << ",";
        }
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
            out << buf << (c + 1 < m.cols() ? "," : "");
        }
        out << "\n";
    }
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open " + path);
    }
    std::uint64_t h = 1469598103934665603ULL;
    char chunk[4096];
    while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(chunk[i]);
            h *= 1099511628211ULL;
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace shsic
