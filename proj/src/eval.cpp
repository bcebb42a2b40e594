#include "nfi/eval.hpp"

#include "nfi/error.hpp"
#include "nfi/rng.hpp"

#include <algorithm>
#include <charconv>

namespace nfi {

ConfusionCounts confusion(std::span<const std::string> predicted, std::span<const std::string> truth,
                          const std::string &target) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw ContractViolation{"confusion needs equal-length, non-empty label lists"};
    }
    ConfusionCounts c;
    c.target = target;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool said = predicted[i] == target;
        const bool is = truth[i] == target;
        if (said && is) {
            ++c.tp;
        } else if (said) {
            ++c.fp;
        } else if (is) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

namespace {

Rate ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) {
        return {};
    }
    return {static_cast<double>(num) / static_cast<double>(den), true};
}

} // namespace

double f_measure(double precision, double recall) {
    const double sum = precision + recall;
    return sum > 0 ? 2.0 * precision * recall / sum : 0.0;
}

MetricEntry metrics(const ConfusionCounts &c) {
    if (c.total() == 0) {
        throw ContractViolation{"metrics need at least one evaluated flow"};
    }
    MetricEntry e;
    e.counts = c;
    e.tpr = ratio(c.tp, c.tp + c.fn);
    e.fpr = ratio(c.fp, c.fp + c.tn);
    e.tnr = ratio(c.tn, c.tn + c.fp);
    e.fnr = ratio(c.fn, c.fn + c.tp);
    e.precision = ratio(c.tp, c.tp + c.fp);
    e.recall = e.tpr;
    e.oa = ratio(c.tp + c.tn, c.total());
    const double sum = e.precision.value + e.recall.value;
    if (e.precision.defined && e.recall.defined && sum > 0) {
        e.f_measure = {f_measure(e.precision.value, e.recall.value), true};
    }
    return e;
}

MetricReport evaluate(std::span<const std::string> predicted, std::span<const std::string> truth,
                      std::span<const std::string> alphabet) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw ContractViolation{"evaluate needs equal-length, non-empty label lists"};
    }
    MetricReport r;
    r.total = predicted.size();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        r.correct += predicted[i] == truth[i] ? 1 : 0;
    }
    r.oa = static_cast<double>(r.correct) / static_cast<double>(r.total);
    for (const auto &label : alphabet) {
        r.per_class.push_back(metrics(confusion(predicted, truth, label)));
        r.macro_precision += r.per_class.back().precision.value;
        r.macro_recall += r.per_class.back().recall.value;
    }
    if (!alphabet.empty()) {
        r.macro_precision /= static_cast<double>(alphabet.size());
        r.macro_recall /= static_cast<double>(alphabet.size());
    }
    r.macro_f = f_measure(r.macro_precision, r.macro_recall);
    return r;
}

std::vector<int> stratified_folds(const Dataset &ds, int k, std::uint64_t seed) {
    if (k < 2) {
        throw ContractViolation{"cross-validation needs k >= 2"};
    }
    if (static_cast<std::size_t>(k) > ds.size()) {
        throw DegenerateInput{"stratification error: k=" + std::to_string(k) + " exceeds dataset size " +
                              std::to_string(ds.size())};
    }
    std::vector<std::vector<std::size_t>> members(ds.alphabet.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto &label = ds.rows[i].label;
        const auto c = label ? ds.class_index(*label) : std::nullopt;
        if (!c) {
            throw ContractViolation{"cross-validation needs every row labeled within the alphabet"};
        }
        members[*c].push_back(i);
    }
    const bool leave_one_out = static_cast<std::size_t>(k) == ds.size();
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (!leave_one_out && members[c].size() < static_cast<std::size_t>(k)) {
            throw DegenerateInput{"stratification error: class '" + ds.alphabet[c] + "' has " +
                                  std::to_string(members[c].size()) + " flows, fewer than k=" + std::to_string(k)};
        }
    }

    std::vector<int> fold(ds.size(), 0);
    std::size_t dealt = 0;
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto &idx = members[c];
        Rng rng{derive_seed(seed, c)};
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        for (std::size_t i : idx) {
            fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
        }
    }
    return fold;
}

CvReport kfold_cv(const Dataset &ds, int k, std::uint64_t seed, const Pipeline &pipeline) {
    const auto fold = stratified_folds(ds, k, seed);
    CvReport out;
    out.k = k;
    out.seed = seed;

    std::vector<std::string> truth(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        truth[i] = *ds.rows[i].label;
    }
    std::vector<std::string> pooled_pred(ds.size());

    for (int f = 0; f < k; ++f) {
        std::vector<std::size_t> train_idx;
        std::vector<std::size_t> test_idx;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            (fold[i] == f ? test_idx : train_idx).push_back(i);
        }
        const Dataset train = ds.subset(train_idx);
        const Dataset test = ds.subset(test_idx);
        const auto predicted = pipeline(train, test);
        if (predicted.size() != test.size()) {
            throw ContractViolation{"pipeline returned " + std::to_string(predicted.size()) + " labels for " +
                                    std::to_string(test.size()) + " test flows"};
        }
        std::vector<std::string> fold_truth;
        for (std::size_t j = 0; j < test_idx.size(); ++j) {
            pooled_pred[test_idx[j]] = predicted[j];
            fold_truth.push_back(truth[test_idx[j]]);
        }
        FoldResult fr;
        fr.fold = f;
        fr.train_size = train.size();
        fr.test_size = test.size();
        fr.report = evaluate(predicted, fold_truth, ds.alphabet);
        out.mean_oa += fr.report.oa;
        out.mean_precision += fr.report.macro_precision;
        out.mean_recall += fr.report.macro_recall;
        out.folds.push_back(std::move(fr));
    }
    out.mean_oa /= k;
    out.mean_precision /= k;
    out.mean_recall /= k;
    out.f_measure = f_measure(out.mean_precision, out.mean_recall);
    out.pooled = evaluate(pooled_pred, truth, ds.alphabet);
    return out;
}

namespace {

nlohmann::json rate_json(const Rate &r) {
    if (!r.defined) {
        return {{"value", 0.0}, {"undefined", true}};
    }
    return r.value;
}

} // namespace

nlohmann::json to_json(const MetricReport &report) {
    nlohmann::json doc;
    doc["oa"] = report.oa;
    doc["correct"] = report.correct;
    doc["total"] = report.total;
    doc["macro_precision"] = report.macro_precision;
    doc["macro_recall"] = report.macro_recall;
    doc["macro_f_measure"] = report.macro_f;
    auto &classes = doc["classes"] = nlohmann::json::array();
    for (const auto &e : report.per_class) {
        classes.push_back({{"class", e.counts.target},
                           {"tp", e.counts.tp},
                           {"fp", e.counts.fp},
                           {"tn", e.counts.tn},
                           {"fn", e.counts.fn},
                           {"tpr", rate_json(e.tpr)},
                           {"fpr", rate_json(e.fpr)},
                           {"tnr", rate_json(e.tnr)},
                           {"fnr", rate_json(e.fnr)},
                           {"precision", rate_json(e.precision)},
                           {"recall", rate_json(e.recall)},
                           {"oa", rate_json(e.oa)},
                           {"f_measure", rate_json(e.f_measure)}});
    }
    return doc;
}

nlohmann::json to_json(const CvReport &report) {
    nlohmann::json doc;
    doc["k"] = report.k;
    doc["seed"] = report.seed;
    doc["mean_oa"] = report.mean_oa;
    doc["mean_precision"] = report.mean_precision;
    doc["mean_recall"] = report.mean_recall;
    doc["f_measure"] = report.f_measure;
    auto &folds = doc["folds"] = nlohmann::json::array();
    for (const auto &f : report.folds) {
        auto item = to_json(f.report);
        item["fold"] = f.fold;
        item["train_size"] = f.train_size;
        item["test_size"] = f.test_size;
        folds.push_back(std::move(item));
    }
    doc["pooled"] = to_json(report.pooled);
    return doc;
}

SummaryRow summary_row(const std::string &algorithm, const CvReport &report) {
    return {algorithm, report.mean_precision, report.mean_recall, report.mean_oa, report.f_measure};
}

SummaryRow baseline_row(const std::string &algorithm, double precision, double recall, double oa) {
    return {algorithm, precision, recall, oa, f_measure(precision, recall)};
}

void write_summary_csv(std::ostream &out, std::span<const SummaryRow> rows) {
    auto num = [](double v) {
        char buf[64];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, end);
    };
    out << "algorithm,precision,recall,oa,f_measure\n";
    for (const auto &r : rows) {
        out << r.algorithm << ',' << num(r.precision) << ',' << num(r.recall) << ',' << num(r.oa) << ','
            << num(r.f_measure) << '\n';
    }
}

} // namespace nfi
