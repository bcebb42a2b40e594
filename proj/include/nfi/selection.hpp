#ifndef NFI_SELECTION_HPP
#define NFI_SELECTION_HPP

#include "nfi/features.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace nfi {

/// Equal-frequency binning into at most `bins` codes. Values are ranked;
/// rank r lands in bin floor(r * bins / n), and tied values all take the
/// bin of their lowest rank. Codes are renumbered densely from 0.
std::vector<int> discretize(std::span<const double> column, int bins);

/// Shannon entropy in bits of a discrete variable.
double entropy(std::span<const int> codes);

/// 2 I(X;Y) / (H(X) + H(Y)), defined as 0 when both entropies vanish.
double symmetrical_uncertainty(std::span<const int> x, std::span<const int> y);

struct SuScore {
    Feature feature;
    double su_with_label = 0;
};

struct RemovedFeature {
    Feature feature;
    double su_with_label = 0;
    /// Retained higher-ranked feature that made this one redundant; empty
    /// when the feature fell below the relevance threshold instead.
    std::optional<Feature> peer;
    double su_with_peer = 0;
};

struct SelectionResult {
    std::vector<Feature> selected; ///< descending SU with the label
    std::vector<RemovedFeature> removed;
    std::vector<SuScore> scores; ///< every candidate, in feature-id order
    int bins = 10;
    double delta = 0;
};

struct FcbfOptions {
    int bins = 10;
    double delta = 0;
    /// Empty means all sixteen features.
    std::vector<Feature> candidates;
};

/// Fast correlation-based filter. Features are ranked by SU with the class
/// (ties to the lower id); a feature is dropped when a retained,
/// higher-ranked feature has pairwise SU >= its SU with the class.
SelectionResult fcbf_select(const Dataset &ds, const FcbfOptions &opts = {});

nlohmann::json to_json(const SelectionResult &result);
SelectionResult selection_from_json(const nlohmann::json &doc);

} // namespace nfi

#endif // NFI_SELECTION_HPP
