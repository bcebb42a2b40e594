#ifndef NFI_EVAL_HPP
#define NFI_EVAL_HPP

#include "nfi/features.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace nfi {

/// One-vs-rest counts for a target class.
struct ConfusionCounts {
    std::string target;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts &) const = default;
};

ConfusionCounts confusion(std::span<const std::string> predicted, std::span<const std::string> truth,
                          const std::string &target);

/// A rate whose denominator may be zero; then value is 0 and defined false.
struct Rate {
    double value = 0;
    bool defined = false;
};

struct MetricEntry {
    ConfusionCounts counts;
    Rate tpr;
    Rate fpr;
    Rate tnr;
    Rate fnr;
    Rate precision;
    Rate recall;
    Rate oa; ///< (TP + TN) / total for this target
    Rate f_measure;
};

MetricEntry metrics(const ConfusionCounts &counts);

/// F = 2PR / (P + R); 0 when P + R = 0.
double f_measure(double precision, double recall);

struct MetricReport {
    std::vector<MetricEntry> per_class;
    std::size_t correct = 0;
    std::size_t total = 0;
    double oa = 0; ///< correct / total
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f = 0; ///< recomputed from the macro precision and recall
};

MetricReport evaluate(std::span<const std::string> predicted, std::span<const std::string> truth,
                      std::span<const std::string> alphabet);

/// train set, test set -> predicted labels for the test set
using Pipeline = std::function<std::vector<std::string>(const Dataset &, const Dataset &)>;

/// Stratified fold ids: each class is shuffled with a seed-derived stream
/// and dealt round-robin, continuing the rotation across classes. Every class
/// needs at least k flows unless k equals the dataset size (leave-one-out).
std::vector<int> stratified_folds(const Dataset &ds, int k, std::uint64_t seed);

struct FoldResult {
    int fold = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    MetricReport report;
};

struct CvReport {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<FoldResult> folds;
    double mean_oa = 0; ///< average of per-fold accuracies
    double mean_precision = 0;
    double mean_recall = 0;
    double f_measure = 0; ///< from mean_precision and mean_recall
    MetricReport pooled;  ///< all out-of-fold predictions together
};

CvReport kfold_cv(const Dataset &ds, int k, std::uint64_t seed, const Pipeline &pipeline);

nlohmann::json to_json(const MetricReport &report);
nlohmann::json to_json(const CvReport &report);

/// A row of the algorithm comparison table.
struct SummaryRow {
    std::string algorithm;
    double precision = 0;
    double recall = 0;
    double oa = 0;
    double f_measure = 0;
};

SummaryRow summary_row(const std::string &algorithm, const CvReport &report);
/// Baseline rows carry precision, recall, oa; F is recomputed.
SummaryRow baseline_row(const std::string &algorithm, double precision, double recall, double oa);
void write_summary_csv(std::ostream &out, std::span<const SummaryRow> rows);

} // namespace nfi

#endif // NFI_EVAL_HPP
