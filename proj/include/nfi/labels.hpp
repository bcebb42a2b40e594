#ifndef NFI_LABELS_HPP
#define NFI_LABELS_HPP

#include "nfi/flow.hpp"

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nfi {

struct LabelRow {
    FlowKey key;
    Micros first_ts = 0;
    std::string label;
    std::size_t line = 0; ///< 1-based source line
};

/// Ground-truth application labels keyed by (FlowKey, first_ts).
class LabelFile {
public:
    static constexpr const char *header = "ip_lo,port_lo,ip_hi,port_hi,proto,first_ts,label";

    /// Throws FormatError when (key, first_ts) repeats; the message
    /// lists every offending pair of lines.
    explicit LabelFile(std::vector<LabelRow> rows);

    const std::vector<LabelRow> &rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }

    /// Label whose key matches and whose first_ts lies within `tolerance`
    /// of `first_ts` (nearest wins).
    std::optional<std::string> lookup(const FlowKey &key, Micros first_ts, Micros tolerance = 0) const;

private:
    std::vector<LabelRow> rows_;
    std::multimap<FlowKey, std::size_t> by_key_;
};

/// Parses the label CSV. When `alphabet` is given every label must belong
/// to it. Malformed rows raise FormatError carrying the line number.
LabelFile parse_labels(std::istream &in, const std::optional<std::vector<std::string>> &alphabet = std::nullopt);
LabelFile load_labels(const std::filesystem::path &path,
                      const std::optional<std::vector<std::string>> &alphabet = std::nullopt);
void write_labels(const std::filesystem::path &path, const std::vector<LabelRow> &rows);

} // namespace nfi

#endif // NFI_LABELS_HPP
