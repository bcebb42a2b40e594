#ifndef NFI_CLASSIFIER_HPP
#define NFI_CLASSIFIER_HPP

#include "nfi/features.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nfi {

inline constexpr const char *model_format = "nfi-model/1";

/// Normal-Inverse-Gamma hyperparameters for one class/feature pair:
/// mu | sigma^2 ~ N(mu, sigma^2 / kappa), sigma^2 ~ IG(alpha, beta).
struct FeaturePosterior {
    double mu = 0.0;
    double kappa = 1e-3;
    double alpha = 1.001;
    double beta = 1e-3;

    /// Conjugate update with a batch of observations.
    FeaturePosterior absorb(std::span<const double> xs) const;

    /// Posterior mean of sigma^2 (beta / (alpha - 1)), or `floor` when that
    /// is undefined; never below `floor`.
    double variance(double floor) const;

    bool operator==(const FeaturePosterior &) const = default;
};

/// Weakly informative default prior.
inline constexpr FeaturePosterior default_prior{};
inline constexpr double default_variance_floor = 1e-9;

struct ClassState {
    std::string label;
    std::uint64_t count = 0;
    std::vector<FeaturePosterior> posterior; ///< one per selected feature
    std::vector<double> mean;                ///< plug-in means used for scoring
    std::vector<double> variance;            ///< plug-in variances used for scoring

    bool operator==(const ClassState &) const = default;
};

/// Per-class Gaussian naive-Bayes state over a fixed feature subset.
struct ClassifierModel {
    std::vector<std::string> alphabet;
    std::vector<Feature> features;
    FeaturePosterior prior = default_prior;
    double variance_floor = default_variance_floor;
    std::vector<ClassState> classes; ///< parallel to alphabet

    /// p(c_j) = n_j / sum(n).
    double class_prior(std::size_t j) const;

    bool operator==(const ClassifierModel &) const = default;
};

struct TrainOptions {
    FeaturePosterior prior = default_prior;
    double variance_floor = default_variance_floor;
};

/// Fits per-class sample means and (n-1)-divisor variances for scoring and
/// folds the same data into the prior to seed the posteriors. Every class
/// in the alphabet needs at least two flows.
ClassifierModel train(const Dataset &ds, std::span<const Feature> features, const TrainOptions &opts = {});

/// Returns a new model whose posteriors absorb `fresh`. Classes that received
/// data switch their plug-in parameters to the posterior means; a label
/// outside the model alphabet raises DegenerateInput.
ClassifierModel update(const ClassifierModel &model, const Dataset &fresh);

struct ClassScores {
    /// log n_i - 1/2 sum log var - 1/2 sum (x - mean)^2 / var
    std::vector<double> log_scores;
    std::size_t best = 0; ///< argmax, lowest index on ties
};

ClassScores score(const ClassifierModel &model, const FeatureVector &x);
std::vector<std::string> predict(const ClassifierModel &model, const Dataset &flows);

nlohmann::json to_json(const ClassifierModel &model);
/// Rejects documents whose `format` is not nfi-model/1 or whose contents do
/// not satisfy the model invariants.
ClassifierModel model_from_json(const nlohmann::json &doc);

} // namespace nfi

#endif // NFI_CLASSIFIER_HPP
