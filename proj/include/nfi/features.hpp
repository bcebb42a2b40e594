#ifndef NFI_FEATURES_HPP
#define NFI_FEATURES_HPP

#include "nfi/flow.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nfi {

inline constexpr std::size_t feature_count = 16;

/// The sixteen flow metrics, numbered 1..16 in column order.
enum class Feature : std::uint8_t {
    lport = 1,
    hport,
    duration,
    transproto,
    tcpflags_fwd,
    tcpflags_bwd,
    pps,
    bps,
    mean_iat,
    pkt_ratio,
    byte_ratio,
    pktlen_ratio,
    bidir_packets,
    bidir_bytes,
    tos,
    mean_pkt_len,
};

inline constexpr int feature_id(Feature f) { return static_cast<int>(f); }
inline constexpr std::size_t feature_index(Feature f) { return static_cast<std::size_t>(f) - 1; }

/// Throws ContractViolation outside 1..16.
Feature feature_from_id(int id);
std::string_view feature_name(Feature f);
std::optional<Feature> feature_from_name(std::string_view name);
std::vector<Feature> all_features();

/// Floor applied to zero-length flows before dividing by duration.
inline constexpr double min_duration_s = 0.001;

struct FeatureVector {
    std::array<double, feature_count> values{};
    std::optional<std::string> label;

    double operator[](Feature f) const { return values[feature_index(f)]; }
    double &operator[](Feature f) { return values[feature_index(f)]; }

    bool operator==(const FeatureVector &) const = default;
};

/// Ordered feature vectors plus the class alphabet.
struct Dataset {
    std::vector<FeatureVector> rows;
    std::vector<std::string> alphabet;

    /// Alphabet becomes the sorted set of labels present.
    static Dataset from_rows(std::vector<FeatureVector> rows);

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }

    /// Index of `label` in the alphabet; nullopt if absent.
    std::optional<std::size_t> class_index(std::string_view label) const;

    /// Throws ContractViolation on a label outside the alphabet.
    void validate() const;

    /// Rows at `indices`, sharing this dataset's alphabet.
    Dataset subset(std::span<const std::size_t> indices) const;

    bool operator==(const Dataset &) const = default;
};

FeatureVector featurize(const FlowRecord &flow);

/// Canonical CSV column list (16 features then `label`).
std::string dataset_header();

void write_dataset(std::ostream &out, const Dataset &ds);
void write_dataset(const std::filesystem::path &path, const Dataset &ds);
/// Columns may appear in any order but must be exactly the canonical set;
/// otherwise a FormatError names the missing and extra columns.
Dataset read_dataset(std::istream &in);
Dataset read_dataset(const std::filesystem::path &path);

/// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

} // namespace nfi

#endif // NFI_FEATURES_HPP
