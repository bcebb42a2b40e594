#include "nfi/labels.hpp"

#include "nfi/csv.hpp"
#include "nfi/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <tuple>

namespace nfi {

LabelFile::LabelFile(std::vector<LabelRow> rows) : rows_{std::move(rows)} {
    std::map<std::pair<FlowKey, Micros>, std::size_t> seen;
    std::string duplicates;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto [it, inserted] = seen.emplace(std::pair{rows_[i].key, rows_[i].first_ts}, i);
        if (!inserted) {
            duplicates += "\n  " + rows_[i].key.to_string() + " first_ts=" + std::to_string(rows_[i].first_ts) +
                          " on lines " + std::to_string(rows_[it->second].line) + " and " +
                          std::to_string(rows_[i].line);
        }
        by_key_.emplace(rows_[i].key, i);
    }
    if (!duplicates.empty()) {
        throw FormatError{"duplicate label keys:" + duplicates};
    }
}

std::optional<std::string> LabelFile::lookup(const FlowKey &key, Micros first_ts, Micros tolerance) const {
    const auto [lo, hi] = by_key_.equal_range(key);
    const LabelRow *best = nullptr;
    Micros best_gap = 0;
    for (auto it = lo; it != hi; ++it) {
        const LabelRow &row = rows_[it->second];
        const Micros gap = row.first_ts > first_ts ? row.first_ts - first_ts : first_ts - row.first_ts;
        if (gap <= tolerance && (!best || gap < best_gap)) {
            best = &row;
            best_gap = gap;
        }
    }
    if (!best) {
        return std::nullopt;
    }
    return best->label;
}

namespace {

template <typename T>
T parse_int(const std::string &cell, const char *column, std::size_t line) {
    T value{};
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
        throw FormatError{"label file line " + std::to_string(line) + ": invalid " + column + " '" + cell + "'"};
    }
    return value;
}

Protocol parse_proto(const std::string &cell, std::size_t line) {
    if (cell == "6" || cell == "tcp" || cell == "TCP") {
        return Protocol::tcp;
    }
    if (cell == "17" || cell == "udp" || cell == "UDP") {
        return Protocol::udp;
    }
    throw FormatError{"label file line " + std::to_string(line) + ": invalid proto '" + cell + "'"};
}

} // namespace

LabelFile parse_labels(std::istream &in, const std::optional<std::vector<std::string>> &alphabet) {
    std::string line;
    if (!std::getline(in, line) || csv::join(csv::split(line)) != LabelFile::header) {
        throw FormatError{"label file header must be '" + std::string{LabelFile::header} + "'"};
    }
    std::set<std::string> allowed;
    if (alphabet) {
        allowed.insert(alphabet->begin(), alphabet->end());
    }

    std::vector<LabelRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = csv::split(line);
        if (cells.size() != 7) {
            throw FormatError{"label file line " + std::to_string(line_no) + ": expected 7 columns, got " +
                              std::to_string(cells.size())};
        }
        std::uint32_t ip_a = 0;
        std::uint32_t ip_b = 0;
        try {
            ip_a = parse_ipv4(cells[0]);
            ip_b = parse_ipv4(cells[2]);
        } catch (const FormatError &e) {
            throw FormatError{"label file line " + std::to_string(line_no) + ": " + e.what()};
        }
        auto port_a = parse_int<std::uint16_t>(cells[1], "port_lo", line_no);
        auto port_b = parse_int<std::uint16_t>(cells[3], "port_hi", line_no);
        if (std::tie(ip_a, port_a) > std::tie(ip_b, port_b)) {
            std::swap(ip_a, ip_b);
            std::swap(port_a, port_b);
        }
        LabelRow row;
        row.key = FlowKey{ip_a, ip_b, port_a, port_b, parse_proto(cells[4], line_no)};
        row.first_ts = parse_int<Micros>(cells[5], "first_ts", line_no);
        row.label = cells[6];
        row.line = line_no;
        if (row.label.empty()) {
            throw FormatError{"label file line " + std::to_string(line_no) + ": empty label"};
        }
        if (alphabet && !allowed.contains(row.label)) {
            throw FormatError{"label file line " + std::to_string(line_no) + ": label '" + row.label +
                              "' not in declared alphabet"};
        }
        rows.push_back(std::move(row));
    }
    return LabelFile{std::move(rows)};
}

LabelFile load_labels(const std::filesystem::path &path, const std::optional<std::vector<std::string>> &alphabet) {
    std::ifstream in{path};
    if (!in) {
        throw IoError{"cannot open label file " + path.string()};
    }
    try {
        return parse_labels(in, alphabet);
    } catch (const FormatError &e) {
        throw FormatError{path.string() + ": " + e.what()};
    }
}

void write_labels(const std::filesystem::path &path, const std::vector<LabelRow> &rows) {
    std::ofstream out{path, std::ios::trunc};
    if (!out) {
        throw IoError{"cannot write " + path.string()};
    }
    out << LabelFile::header << '\n';
    for (const LabelRow &r : rows) {
        out << format_ipv4(r.key.ip_lo) << ',' << r.key.port_lo << ',' << format_ipv4(r.key.ip_hi) << ','
            << r.key.port_hi << ',' << static_cast<int>(r.key.proto) << ',' << r.first_ts << ',' << r.label << '\n';
    }
}

} // namespace nfi
