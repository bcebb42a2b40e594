#include "nfi/classifier.hpp"

#include "nfi/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nfi {

FeaturePosterior FeaturePosterior::absorb(std::span<const double> xs) const {
    if (xs.empty()) {
        return *this;
    }
    const auto n = static_cast<double>(xs.size());
    double mean = 0;
    for (double x : xs) {
        mean += x;
    }
    mean /= n;
    double ss = 0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    const double d = mean - mu;
    FeaturePosterior next;
    next.kappa = kappa + n;
    next.mu = (kappa * mu + n * mean) / next.kappa;
    next.alpha = alpha + n / 2.0;
    next.beta = beta + 0.5 * ss + kappa * n * d * d / (2.0 * next.kappa);
    return next;
}

double FeaturePosterior::variance(double floor) const {
    if (alpha <= 1.0) {
        return floor;
    }
    return std::max(beta / (alpha - 1.0), floor);
}

double ClassifierModel::class_prior(std::size_t j) const {
    double total = 0;
    for (const auto &c : classes) {
        total += static_cast<double>(c.count);
    }
    return total > 0 ? static_cast<double>(classes.at(j).count) / total : 0.0;
}

namespace {

void check_prior(const FeaturePosterior &p, double floor) {
    if (!(p.kappa > 0 && p.alpha > 0 && p.beta > 0) || !std::isfinite(p.mu)) {
        throw ContractViolation{"prior needs kappa, alpha, beta > 0 and a finite mu"};
    }
    if (!(floor > 0)) {
        throw ContractViolation{"variance floor must be positive"};
    }
}

// Per-class, per-feature value columns for the labeled rows of `ds`, in the
// class order of `alphabet`.
std::vector<std::vector<std::vector<double>>> columns_by_class(const Dataset &ds,
                                                               const std::vector<std::string> &alphabet,
                                                               std::span<const Feature> features) {
    std::vector<std::vector<std::vector<double>>> cols(alphabet.size(),
                                                       std::vector<std::vector<double>>(features.size()));
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const FeatureVector &row = ds.rows[i];
        if (!row.label) {
            throw ContractViolation{"row " + std::to_string(i) + " is unlabeled"};
        }
        const auto it = std::find(alphabet.begin(), alphabet.end(), *row.label);
        if (it == alphabet.end()) {
            throw DegenerateInput{"unknown class '" + *row.label + "' (row " + std::to_string(i) + ")"};
        }
        const auto c = static_cast<std::size_t>(it - alphabet.begin());
        for (std::size_t f = 0; f < features.size(); ++f) {
            const double v = row[features[f]];
            if (!std::isfinite(v)) {
                throw ContractViolation{"row " + std::to_string(i) + " has a non-finite feature value"};
            }
            cols[c][f].push_back(v);
        }
    }
    return cols;
}

} // namespace

ClassifierModel train(const Dataset &ds, std::span<const Feature> features, const TrainOptions &opts) {
    check_prior(opts.prior, opts.variance_floor);
    if (features.empty()) {
        throw ContractViolation{"training needs at least one feature"};
    }
    if (std::set<Feature>(features.begin(), features.end()).size() != features.size()) {
        throw ContractViolation{"selected features must be distinct"};
    }
    if (ds.alphabet.empty()) {
        throw DegenerateInput{"training dataset has no labeled classes"};
    }

    ClassifierModel model;
    model.alphabet = ds.alphabet;
    model.features.assign(features.begin(), features.end());
    model.prior = opts.prior;
    model.variance_floor = opts.variance_floor;

    const auto cols = columns_by_class(ds, model.alphabet, features);
    for (std::size_t c = 0; c < model.alphabet.size(); ++c) {
        const std::size_t n = cols[c].front().size();
        if (n < 2) {
            throw DegenerateInput{"insufficient data: class '" + model.alphabet[c] + "' has " + std::to_string(n) +
                                  " flow(s), need at least 2"};
        }
        ClassState state;
        state.label = model.alphabet[c];
        state.count = n;
        for (std::size_t f = 0; f < features.size(); ++f) {
            const auto &xs = cols[c][f];
            double mean = 0;
            for (double x : xs) {
                mean += x;
            }
            mean /= static_cast<double>(n);
            double ss = 0;
            for (double x : xs) {
                ss += (x - mean) * (x - mean);
            }
            state.mean.push_back(mean);
            state.variance.push_back(std::max(ss / static_cast<double>(n - 1), opts.variance_floor));
            state.posterior.push_back(opts.prior.absorb(xs));
        }
        model.classes.push_back(std::move(state));
    }
    return model;
}

ClassifierModel update(const ClassifierModel &model, const Dataset &fresh) {
    ClassifierModel next = model;
    if (fresh.empty()) {
        return next;
    }
    const auto cols = columns_by_class(fresh, model.alphabet, model.features);
    for (std::size_t c = 0; c < next.classes.size(); ++c) {
        const std::size_t n = cols[c].front().size();
        if (n == 0) {
            continue;
        }
        ClassState &state = next.classes[c];
        state.count += n;
        for (std::size_t f = 0; f < next.features.size(); ++f) {
            state.posterior[f] = state.posterior[f].absorb(cols[c][f]);
            state.mean[f] = state.posterior[f].mu;
            state.variance[f] = state.posterior[f].variance(next.variance_floor);
        }
    }
    return next;
}

ClassScores score(const ClassifierModel &model, const FeatureVector &x) {
    ClassScores out;
    out.log_scores.reserve(model.classes.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        const ClassState &state = model.classes[c];
        double s = std::log(static_cast<double>(state.count));
        for (std::size_t f = 0; f < model.features.size(); ++f) {
            const double v = x[model.features[f]];
            if (!std::isfinite(v)) {
                throw ContractViolation{"feature " + std::string{feature_name(model.features[f])} + " is not finite"};
            }
            const double var = std::max(state.variance[f], model.variance_floor);
            const double d = v - state.mean[f];
            s -= 0.5 * std::log(var) + 0.5 * d * d / var;
        }
        out.log_scores.push_back(s);
        if (c == 0 || s > out.log_scores[out.best]) {
            out.best = c;
        }
    }
    return out;
}

std::vector<std::string> predict(const ClassifierModel &model, const Dataset &flows) {
    std::vector<std::string> labels;
    labels.reserve(flows.size());
    for (const auto &row : flows.rows) {
        labels.push_back(model.alphabet[score(model, row).best]);
    }
    return labels;
}

nlohmann::json to_json(const ClassifierModel &model) {
    nlohmann::json doc;
    doc["format"] = model_format;
    doc["alphabet"] = model.alphabet;
    auto &features = doc["selected_features"] = nlohmann::json::array();
    for (Feature f : model.features) {
        features.push_back(feature_id(f));
    }
    doc["prior"] = {{"mu", model.prior.mu},
                    {"kappa", model.prior.kappa},
                    {"alpha", model.prior.alpha},
                    {"beta", model.prior.beta}};
    doc["variance_floor"] = model.variance_floor;
    auto &classes = doc["classes"] = nlohmann::json::array();
    for (const auto &c : model.classes) {
        nlohmann::json posts = nlohmann::json::array();
        for (const auto &p : c.posterior) {
            posts.push_back({{"mu", p.mu}, {"kappa", p.kappa}, {"alpha", p.alpha}, {"beta", p.beta}});
        }
        classes.push_back(
            {{"label", c.label}, {"n", c.count}, {"mean", c.mean}, {"variance", c.variance}, {"posterior", posts}});
    }
    return doc;
}

ClassifierModel model_from_json(const nlohmann::json &doc) {
    const std::string format = doc.is_object() ? doc.value("format", std::string{"<missing>"}) : "<not an object>";
    if (format != model_format) {
        throw FormatError{"model version mismatch: expected " + std::string{model_format} + ", got " + format};
    }
    try {
        ClassifierModel m;
        m.alphabet = doc.at("alphabet").get<std::vector<std::string>>();
        for (const auto &id : doc.at("selected_features")) {
            const int v = id.get<int>();
            if (v < 1 || v > static_cast<int>(feature_count)) {
                throw FormatError{"model schema mismatch: selected feature id " + std::to_string(v) +
                                  " is not one of the 16 dataset columns"};
            }
            m.features.push_back(static_cast<Feature>(v));
        }
        auto read_post = [](const nlohmann::json &j) {
            return FeaturePosterior{j.at("mu").get<double>(), j.at("kappa").get<double>(), j.at("alpha").get<double>(),
                                    j.at("beta").get<double>()};
        };
        m.prior = read_post(doc.at("prior"));
        m.variance_floor = doc.at("variance_floor").get<double>();
        for (const auto &jc : doc.at("classes")) {
            ClassState c;
            c.label = jc.at("label").get<std::string>();
            c.count = jc.at("n").get<std::uint64_t>();
            c.mean = jc.at("mean").get<std::vector<double>>();
            c.variance = jc.at("variance").get<std::vector<double>>();
            for (const auto &jp : jc.at("posterior")) {
                c.posterior.push_back(read_post(jp));
            }
            m.classes.push_back(std::move(c));
        }

        if (m.features.empty() || m.classes.size() != m.alphabet.size()) {
            throw FormatError{"model schema mismatch: class list does not match alphabet"};
        }
        for (std::size_t i = 0; i < m.classes.size(); ++i) {
            const ClassState &c = m.classes[i];
            if (c.label != m.alphabet[i] || c.mean.size() != m.features.size() ||
                c.variance.size() != m.features.size() || c.posterior.size() != m.features.size() || c.count == 0) {
                throw FormatError{"model schema mismatch in class '" + c.label + "'"};
            }
            for (const auto &p : c.posterior) {
                if (!(p.kappa > 0 && p.alpha > 0 && p.beta > 0)) {
                    throw FormatError{"model posterior for class '" + c.label + "' violates kappa, alpha, beta > 0"};
                }
            }
        }
        return m;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError{std::string{"invalid model document: "} + e.what()};
    }
}

} // namespace nfi
