#include "nfi/selection.hpp"

#include "nfi/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nfi {

std::vector<int> discretize(std::span<const double> column, int bins) {
    if (bins < 2) {
        throw ContractViolation{"discretize needs at least 2 bins"};
    }
    if (column.empty()) {
        throw ContractViolation{"discretize needs a non-empty column"};
    }
    const std::size_t n = column.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });

    std::vector<int> codes(n);
    std::size_t rank = 0;
    while (rank < n) {
        std::size_t end = rank + 1;
        while (end < n && column[order[end]] == column[order[rank]]) {
            ++end;
        }
        const auto bin = static_cast<int>(rank * static_cast<std::size_t>(bins) / n);
        for (std::size_t r = rank; r < end; ++r) {
            codes[order[r]] = bin;
        }
        rank = end;
    }

    // ties can empty a bin; renumber to 0..k-1 preserving order
    std::vector<int> used(codes);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (int &c : codes) {
        c = static_cast<int>(std::lower_bound(used.begin(), used.end(), c) - used.begin());
    }
    return codes;
}

namespace {

// Dense 0..k-1 relabelling so counts can live in flat vectors.
std::vector<std::size_t> densify(std::span<const int> codes, std::size_t &levels) {
    std::vector<int> values(codes.begin(), codes.end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    levels = values.size();
    std::vector<std::size_t> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        out[i] = static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), codes[i]) - values.begin());
    }
    return out;
}

double entropy_of_counts(std::span<const std::size_t> counts, double n) {
    double h = 0;
    for (std::size_t c : counts) {
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log2(p);
        }
    }
    return h;
}

} // namespace

double entropy(std::span<const int> codes) {
    if (codes.empty()) {
        return 0;
    }
    std::size_t levels = 0;
    const auto dense = densify(codes, levels);
    std::vector<std::size_t> counts(levels, 0);
    for (std::size_t c : dense) {
        ++counts[c];
    }
    return entropy_of_counts(counts, static_cast<double>(codes.size()));
}

double symmetrical_uncertainty(std::span<const int> x, std::span<const int> y) {
    if (x.size() != y.size() || x.empty()) {
        throw ContractViolation{"symmetrical_uncertainty needs equal-length, non-empty inputs"};
    }
    std::size_t kx = 0;
    std::size_t ky = 0;
    const auto dx = densify(x, kx);
    const auto dy = densify(y, ky);
    std::vector<std::size_t> cx(kx, 0);
    std::vector<std::size_t> cy(ky, 0);
    std::vector<std::size_t> joint(kx * ky, 0);
    for (std::size_t i = 0; i < dx.size(); ++i) {
        ++cx[dx[i]];
        ++cy[dy[i]];
        ++joint[dx[i] * ky + dy[i]];
    }
    const auto n = static_cast<double>(x.size());
    const double hx = entropy_of_counts(cx, n);
    const double hy = entropy_of_counts(cy, n);
    if (hx + hy <= 0) {
        return 0;
    }
    const double hxy = entropy_of_counts(joint, n);
    const double info = hx + hy - hxy;
    return std::clamp(2.0 * info / (hx + hy), 0.0, 1.0);
}

SelectionResult fcbf_select(const Dataset &ds, const FcbfOptions &opts) {
    if (ds.empty()) {
        throw DegenerateInput{"feature selection needs a non-empty dataset"};
    }
    std::vector<int> label_codes;
    label_codes.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto &label = ds.rows[i].label;
        if (!label) {
            throw ContractViolation{"feature selection needs a fully labeled dataset (row " + std::to_string(i) + ")"};
        }
        const auto idx = ds.class_index(*label);
        if (!idx) {
            throw ContractViolation{"label '" + *label + "' not in dataset alphabet"};
        }
        label_codes.push_back(static_cast<int>(*idx));
    }
    if (std::adjacent_find(label_codes.begin(), label_codes.end(), std::not_equal_to<>{}) == label_codes.end()) {
        throw DegenerateInput{"degenerate dataset: feature selection needs at least 2 classes"};
    }

    const std::vector<Feature> candidates = opts.candidates.empty() ? all_features() : opts.candidates;
    std::vector<std::vector<int>> codes;
    codes.reserve(candidates.size());
    std::vector<double> column(ds.size());
    for (Feature f : candidates) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            column[i] = ds.rows[i][f];
        }
        codes.push_back(discretize(column, opts.bins));
    }

    SelectionResult result;
    result.bins = opts.bins;
    result.delta = opts.delta;
    std::vector<double> su_class(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        su_class[c] = symmetrical_uncertainty(codes[c], label_codes);
    }

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (su_class[a] != su_class[b]) {
            return su_class[a] > su_class[b];
        }
        return feature_id(candidates[a]) < feature_id(candidates[b]);
    });

    std::vector<std::size_t> kept;
    for (std::size_t c : order) {
        if (su_class[c] < opts.delta) {
            result.removed.push_back({candidates[c], su_class[c], std::nullopt, 0});
            continue;
        }
        bool redundant = false;
        for (std::size_t k : kept) {
            const double su_pair = symmetrical_uncertainty(codes[k], codes[c]);
            if (su_pair >= su_class[c]) {
                result.removed.push_back({candidates[c], su_class[c], candidates[k], su_pair});
                redundant = true;
                break;
            }
        }
        if (!redundant) {
            kept.push_back(c);
            result.selected.push_back(candidates[c]);
        }
    }

    std::vector<std::size_t> by_id(candidates.size());
    std::iota(by_id.begin(), by_id.end(), std::size_t{0});
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return feature_id(candidates[a]) < feature_id(candidates[b]); });
    for (std::size_t c : by_id) {
        result.scores.push_back({candidates[c], su_class[c]});
    }
    return result;
}

nlohmann::json to_json(const SelectionResult &result) {
    nlohmann::json doc;
    doc["bins"] = result.bins;
    doc["delta"] = result.delta;
    auto &su = doc["su"] = nlohmann::json::array();
    for (const auto &s : result.scores) {
        su.push_back({{"id", feature_id(s.feature)}, {"name", feature_name(s.feature)}, {"su", s.su_with_label}});
    }
    auto &selected = doc["selected"] = nlohmann::json::array();
    for (Feature f : result.selected) {
        selected.push_back(feature_id(f));
    }
    auto &removed = doc["removed"] = nlohmann::json::array();
    for (const auto &r : result.removed) {
        nlohmann::json item{{"id", feature_id(r.feature)}, {"name", feature_name(r.feature)}, {"su", r.su_with_label}};
        if (r.peer) {
            item["peer"] = feature_id(*r.peer);
            item["su_with_peer"] = r.su_with_peer;
            item["reason"] = "redundant";
        } else {
            item["peer"] = nullptr;
            item["reason"] = "below_delta";
        }
        removed.push_back(item);
    }
    return doc;
}

SelectionResult selection_from_json(const nlohmann::json &doc) {
    try {
        SelectionResult r;
        r.bins = doc.value("bins", 10);
        r.delta = doc.value("delta", 0.0);
        for (const auto &id : doc.at("selected")) {
            r.selected.push_back(feature_from_id(id.get<int>()));
        }
        if (doc.contains("su")) {
            for (const auto &s : doc.at("su")) {
                r.scores.push_back({feature_from_id(s.at("id").get<int>()), s.at("su").get<double>()});
            }
        }
        if (doc.contains("removed")) {
            for (const auto &item : doc.at("removed")) {
                RemovedFeature rf{feature_from_id(item.at("id").get<int>()), item.value("su", 0.0), std::nullopt, 0};
                if (item.contains("peer") && !item.at("peer").is_null()) {
                    rf.peer = feature_from_id(item.at("peer").get<int>());
                    rf.su_with_peer = item.value("su_with_peer", 0.0);
                }
                r.removed.push_back(rf);
            }
        }
        return r;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError{std::string{"invalid selection report: "} + e.what()};
    } catch (const ContractViolation &e) {
        throw FormatError{std::string{"invalid selection report: "} + e.what()};
    }
}

} // namespace nfi
