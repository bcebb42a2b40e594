#ifndef NFI_CSV_HPP
#define NFI_CSV_HPP

#include <string>
#include <string_view>
#include <vector>

namespace nfi::csv {

/// Splits one unquoted CSV line. A trailing CR is dropped.
inline std::vector<std::string> split(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.emplace_back(line.substr(start));
            break;
        }
        cells.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

inline std::string join(const std::vector<std::string> &cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) {
            out.push_back(',');
        }
        out += cells[i];
    }
    return out;
}

} // namespace nfi::csv

#endif // NFI_CSV_HPP
