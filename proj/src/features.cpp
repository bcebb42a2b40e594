#include "nfi/features.hpp"

#include "nfi/csv.hpp"
#include "nfi/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace nfi {

namespace {

constexpr std::array<std::string_view, feature_count> names = {
    "lport",     "hport",     "duration",  "transproto", "tcpflags_fwd", "tcpflags_bwd",  "pps", "bps",
    "mean_iat",  "pkt_ratio", "byte_ratio", "pktlen_ratio", "bidir_packets", "bidir_bytes", "tos", "mean_pkt_len",
};

} // namespace

Feature feature_from_id(int id) {
    if (id < 1 || id > static_cast<int>(feature_count)) {
        throw ContractViolation{"feature id " + std::to_string(id) + " outside 1..16"};
    }
    return static_cast<Feature>(id);
}

std::string_view feature_name(Feature f) { return names[feature_index(f)]; }

std::optional<Feature> feature_from_name(std::string_view name) {
    for (std::size_t i = 0; i < feature_count; ++i) {
        if (names[i] == name) {
            return static_cast<Feature>(i + 1);
        }
    }
    return std::nullopt;
}

std::vector<Feature> all_features() {
    std::vector<Feature> out;
    for (int id = 1; id <= static_cast<int>(feature_count); ++id) {
        out.push_back(static_cast<Feature>(id));
    }
    return out;
}

Dataset Dataset::from_rows(std::vector<FeatureVector> rows) {
    std::set<std::string> labels;
    for (const auto &r : rows) {
        if (r.label) {
            labels.insert(*r.label);
        }
    }
    return Dataset{std::move(rows), {labels.begin(), labels.end()}};
}

std::optional<std::size_t> Dataset::class_index(std::string_view label) const {
    const auto it = std::find(alphabet.begin(), alphabet.end(), label);
    if (it == alphabet.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - alphabet.begin());
}

void Dataset::validate() const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].label && !class_index(*rows[i].label)) {
            throw ContractViolation{"row " + std::to_string(i) + " label '" + *rows[i].label + "' not in alphabet"};
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.alphabet = alphabet;
    out.rows.reserve(indices.size());
    for (std::size_t i : indices) {
        out.rows.push_back(rows.at(i));
    }
    return out;
}

FeatureVector featurize(const FlowRecord &flow) {
    const auto packets = static_cast<double>(flow.packets());
    if (packets < 1) {
        throw ContractViolation{"cannot featurize an empty flow"};
    }
    const auto fwd_pkts = static_cast<double>(flow.fwd_packets);
    const auto bwd_pkts = static_cast<double>(flow.bwd_packets);
    const auto fwd_bytes = static_cast<double>(flow.fwd_bytes);
    const auto bwd_bytes = static_cast<double>(flow.bwd_bytes);
    const auto bytes = fwd_bytes + bwd_bytes;
    const double duration =
        std::max(static_cast<double>(flow.last_ts - flow.first_ts) / static_cast<double>(micros_per_second),
                 min_duration_s);

    const double mean_fwd_len = fwd_bytes / std::max(fwd_pkts, 1.0);
    const double mean_bwd_len = bwd_pkts > 0 ? bwd_bytes / bwd_pkts : 0.0;

    FeatureVector v;
    v[Feature::lport] = std::min(flow.key.port_lo, flow.key.port_hi);
    v[Feature::hport] = std::max(flow.key.port_lo, flow.key.port_hi);
    v[Feature::duration] = duration;
    v[Feature::transproto] = static_cast<double>(flow.key.proto);
    v[Feature::tcpflags_fwd] = flow.key.proto == Protocol::tcp ? flow.tcp_flags_fwd : 0;
    v[Feature::tcpflags_bwd] = flow.key.proto == Protocol::tcp ? flow.tcp_flags_bwd : 0;
    v[Feature::pps] = packets / duration;
    v[Feature::bps] = bytes / duration;
    v[Feature::mean_iat] = duration / packets;
    v[Feature::pkt_ratio] = fwd_pkts / std::max(bwd_pkts, 1.0);
    v[Feature::byte_ratio] = fwd_bytes / std::max(bwd_bytes, 1.0);
    v[Feature::pktlen_ratio] = mean_fwd_len / std::max(mean_bwd_len, 1.0);
    v[Feature::bidir_packets] = packets;
    v[Feature::bidir_bytes] = bytes;
    v[Feature::tos] = flow.tos_or;
    v[Feature::mean_pkt_len] = bytes / packets;
    return v;
}

std::string dataset_header() {
    std::vector<std::string> cols{names.begin(), names.end()};
    cols.emplace_back("label");
    return csv::join(cols);
}

std::string format_number(double v) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), end};
}

void write_dataset(std::ostream &out, const Dataset &ds) {
    out << dataset_header() << '\n';
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const FeatureVector &row = ds.rows[i];
        for (double v : row.values) {
            if (!std::isfinite(v)) {
                throw ContractViolation{"row " + std::to_string(i) + " has a non-finite feature value"};
            }
            out << format_number(v) << ',';
        }
        if (row.label) {
            if (row.label->find_first_of(",\n\r") != std::string::npos) {
                throw ContractViolation{"label '" + *row.label + "' contains a CSV separator"};
            }
            out << *row.label;
        }
        out << '\n';
    }
}

void write_dataset(const std::filesystem::path &path, const Dataset &ds) {
    std::ofstream out{path, std::ios::trunc};
    if (!out) {
        throw IoError{"cannot write " + path.string()};
    }
    write_dataset(out, ds);
    if (!out) {
        throw IoError{"write failed for " + path.string()};
    }
}

Dataset read_dataset(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError{"dataset is empty (missing header)"};
    }
    const auto header = csv::split(line);

    // column position for each feature plus label (index 16)
    std::array<std::size_t, feature_count + 1> position{};
    std::vector<bool> found(feature_count + 1, false);
    std::vector<std::string> extra;
    for (std::size_t col = 0; col < header.size(); ++col) {
        std::size_t slot = 0;
        if (header[col] == "label") {
            slot = feature_count;
        } else if (auto f = feature_from_name(header[col])) {
            slot = feature_index(*f);
        } else {
            extra.push_back(header[col]);
            continue;
        }
        if (found[slot]) {
            extra.push_back(header[col] + " (duplicate)");
            continue;
        }
        found[slot] = true;
        position[slot] = col;
    }
    std::vector<std::string> missing;
    for (std::size_t slot = 0; slot <= feature_count; ++slot) {
        if (!found[slot]) {
            missing.emplace_back(slot == feature_count ? "label" : names[slot]);
        }
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "dataset schema mismatch:";
        if (!missing.empty()) {
            msg += " missing columns [" + csv::join(missing) + "]";
        }
        if (!extra.empty()) {
            msg += " extra columns [" + csv::join(extra) + "]";
        }
        throw FormatError{msg};
    }

    std::vector<FeatureVector> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = csv::split(line);
        if (cells.size() != header.size()) {
            throw FormatError{"dataset line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " columns, got " + std::to_string(cells.size())};
        }
        FeatureVector row;
        for (std::size_t slot = 0; slot < feature_count; ++slot) {
            const std::string &cell = cells[position[slot]];
            double v = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v) ||
                v < 0) {
                throw FormatError{"dataset line " + std::to_string(line_no) + ": invalid value '" + cell +
                                  "' in column " + std::string{names[slot]}};
            }
            row.values[slot] = v;
        }
        if (const std::string &label = cells[position[feature_count]]; !label.empty()) {
            row.label = label;
        }
        rows.push_back(std::move(row));
    }
    return Dataset::from_rows(std::move(rows));
}

Dataset read_dataset(const std::filesystem::path &path) {
    std::ifstream in{path};
    if (!in) {
        throw IoError{"cannot open dataset " + path.string()};
    }
    try {
        return read_dataset(in);
    } catch (const FormatError &e) {
        throw FormatError{path.string() + ": " + e.what()};
    }
}

} // namespace nfi
