#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfi/error.hpp"
#include "nfi/eval.hpp"
#include "nfi/rng.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

using namespace nfi;

namespace {

std::vector<std::string> repeat(const std::string &s, std::size_t n) { return std::vector<std::string>(n, s); }

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string> &b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

Dataset labeled(const std::vector<std::pair<std::string, std::size_t>> &classes) {
    std::vector<FeatureVector> rows;
    double x = 0;
    for (const auto &[label, n] : classes) {
        for (std::size_t i = 0; i < n; ++i) {
            FeatureVector v;
            v[Feature::pps] = x++;
            v.label = label;
            rows.push_back(v);
        }
    }
    return Dataset::from_rows(std::move(rows));
}

} // namespace

TEST_CASE("one-vs-rest example: TP 8, FN 2, FP 1, TN 9") {
    const auto truth = cat(repeat("a", 10), repeat("b", 10));
    const auto pred = cat(cat(repeat("a", 8), repeat("b", 2)), cat(repeat("a", 1), repeat("b", 9)));
    const auto c = confusion(pred, truth, "a");
    CHECK(c.tp == 8);
    CHECK(c.fn == 2);
    CHECK(c.fp == 1);
    CHECK(c.tn == 9);
    const auto e = metrics(c);
    CHECK(e.tpr.value == doctest::Approx(0.8));
    CHECK(e.fnr.value == doctest::Approx(0.2));
    CHECK(e.fpr.value == doctest::Approx(0.1));
    CHECK(e.tnr.value == doctest::Approx(0.9));
    CHECK(e.precision.value == doctest::Approx(8.0 / 9));
    CHECK(e.recall.value == doctest::Approx(0.8));
    CHECK(e.oa.value == doctest::Approx(0.85));
    CHECK(e.f_measure.value == doctest::Approx(2 * (8.0 / 9) * 0.8 / (8.0 / 9 + 0.8)));
}

TEST_CASE("perfect classifier") {
    const auto truth = cat(repeat("a", 5), cat(repeat("b", 3), repeat("c", 2)));
    const std::vector<std::string> alphabet{"a", "b", "c"};
    const auto r = evaluate(truth, truth, alphabet);
    CHECK(r.oa == 1);
    CHECK(r.macro_precision == 1);
    CHECK(r.macro_recall == 1);
    CHECK(r.macro_f == 1);
    for (const auto &e : r.per_class) {
        CHECK(e.fpr.value == 0);
        CHECK(e.fnr.value == 0);
    }
}

TEST_CASE("zero denominators are flagged undefined") {
    const auto truth = repeat("a", 4);
    const auto pred = repeat("a", 4);
    const auto e = metrics(confusion(pred, truth, "b"));
    CHECK_FALSE(e.precision.defined);
    CHECK_FALSE(e.recall.defined);
    CHECK_FALSE(e.f_measure.defined);
    CHECK(e.precision.value == 0);
    CHECK(e.tnr.defined);
    CHECK(e.tnr.value == 1);
    CHECK_THROWS_AS(metrics(ConfusionCounts{}), ContractViolation);
    CHECK_THROWS_AS(confusion(pred, repeat("a", 3), "a"), ContractViolation);
}

TEST_CASE("random label vectors: counts match a direct tally and rate identities hold") {
    Rng rng{1};
    const std::vector<std::string> alphabet{"a", "b", "c", "d"};
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = 1 + rng.below(300);
        std::vector<std::string> truth, pred;
        for (std::size_t i = 0; i < n; ++i) {
            truth.push_back(alphabet[rng.below(4)]);
            pred.push_back(rng.bernoulli(0.6) ? truth.back() : alphabet[rng.below(4)]);
        }
        const auto r = evaluate(pred, truth, alphabet);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) correct += pred[i] == truth[i];
        CHECK(r.correct == correct);
        CHECK(r.oa == doctest::Approx(double(correct) / double(n)));
        double mp = 0, mr = 0;
        for (const auto &e : r.per_class) {
            const auto &t = e.counts.target;
            std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool p = pred[i] == t, y = truth[i] == t;
                tp += p && y;
                fp += p && !y;
                fn += !p && y;
                tn += !p && !y;
            }
            CHECK(e.counts.tp == tp);
            CHECK(e.counts.fp == fp);
            CHECK(e.counts.fn == fn);
            CHECK(e.counts.tn == tn);
            CHECK(e.counts.total() == n);
            if (e.tpr.defined) CHECK(e.tpr.value + e.fnr.value == doctest::Approx(1.0));
            if (e.fpr.defined) CHECK(e.fpr.value + e.tnr.value == doctest::Approx(1.0));
            for (const Rate *rate : {&e.tpr, &e.fpr, &e.tnr, &e.fnr, &e.precision, &e.recall, &e.oa, &e.f_measure}) {
                CHECK(rate->value >= 0);
                CHECK(rate->value <= 1);
            }
            mp += e.precision.value;
            mr += e.recall.value;
        }
        CHECK(r.macro_precision == doctest::Approx(mp / 4));
        CHECK(r.macro_recall == doctest::Approx(mr / 4));
        CHECK(r.macro_f == doctest::Approx(f_measure(r.macro_precision, r.macro_recall)));

        // permuting both lists together changes nothing
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        std::vector<std::string> pt, pp;
        for (std::size_t i : perm) {
            pt.push_back(truth[i]);
            pp.push_back(pred[i]);
        }
        const auto q = evaluate(pp, pt, alphabet);
        for (std::size_t c = 0; c < 4; ++c) CHECK(q.per_class[c].counts == r.per_class[c].counts);
    }
}

TEST_CASE("binary case: FPR of one class is the FNR of the other") {
    Rng rng{2};
    for (int round = 0; round < 50; ++round) {
        std::vector<std::string> truth, pred;
        for (int i = 0; i < 100; ++i) {
            truth.push_back(rng.bernoulli(0.4) ? "x" : "y");
            pred.push_back(rng.bernoulli(0.5) ? "x" : "y");
        }
        const auto a = metrics(confusion(pred, truth, "x"));
        const auto b = metrics(confusion(pred, truth, "y"));
        CHECK(a.fpr.value == doctest::Approx(b.fnr.value));
        CHECK(a.oa.value == doctest::Approx(b.oa.value));
    }
}

TEST_CASE("F-measure from precision and recall") {
    CHECK(f_measure(0, 0) == 0);
    CHECK(f_measure(1, 1) == 1);
    CHECK(f_measure(0.5, 1) == doctest::Approx(2.0 / 3));
    // P 0.936 and R 0.940 give F ~ 0.938 (not 0.946)
    CHECK(baseline_row("row", 0.936, 0.940, 0.95).f_measure == doctest::Approx(0.937996).epsilon(1e-6));
}

TEST_CASE("stratified folds keep class proportions within one") {
    const auto ds = labeled({{"a", 53}, {"b", 27}, {"c", 11}});
    const int k = 10;
    const auto fold = stratified_folds(ds, k, 99);
    std::map<std::pair<int, std::string>, int> per;
    std::map<int, int> sizes;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(fold[i] >= 0);
        CHECK(fold[i] < k);
        ++per[{fold[i], *ds.rows[i].label}];
        ++sizes[fold[i]];
    }
    for (const auto &[label, n] : std::map<std::string, int>{{"a", 53}, {"b", 27}, {"c", 11}}) {
        for (int f = 0; f < k; ++f) {
            CHECK(std::abs(per[{f, label}] - n / double(k)) < 1.0);
        }
    }
    for (const auto &[f, s] : sizes) CHECK(std::abs(s - 91 / double(k)) < 1.0);
    CHECK(stratified_folds(ds, k, 99) == fold);
    CHECK(stratified_folds(ds, k, 100) != fold);
}

TEST_CASE("class smaller than k is a stratification error; k == n is leave-one-out") {
    const auto ds = labeled({{"a", 12}, {"b", 8}});
    CHECK_THROWS_WITH_AS(stratified_folds(ds, 10, 1), doctest::Contains("stratification"), DegenerateInput);
    CHECK_THROWS_AS(stratified_folds(ds, 1, 1), ContractViolation);
    CHECK_THROWS_AS(stratified_folds(ds, 21, 1), DegenerateInput);
    const auto loo = stratified_folds(ds, 20, 1);
    CHECK(std::set<int>(loo.begin(), loo.end()).size() == 20);
}

TEST_CASE("k-fold CV drives the pipeline on disjoint folds") {
    const auto ds = labeled({{"a", 30}, {"b", 20}});
    std::vector<int> seen(ds.size(), 0);
    const Pipeline echo = [&](const Dataset &train, const Dataset &test) {
        CHECK(train.size() + test.size() == ds.size());
        CHECK(train.alphabet == ds.alphabet);
        std::vector<std::string> out;
        for (const auto &r : test.rows) {
            ++seen[static_cast<std::size_t>(r[Feature::pps])];
            out.push_back(*r.label);
        }
        return out;
    };
    const auto rep = kfold_cv(ds, 5, 3, echo);
    CHECK(rep.folds.size() == 5);
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(rep.mean_oa == 1);
    CHECK(rep.f_measure == 1);
    CHECK(rep.pooled.correct == ds.size());
    const auto doc = to_json(rep);
    CHECK(doc.at("seed") == 3);
    CHECK(doc.at("folds").size() == 5);
    CHECK(doc.at("folds")[0].at("classes").size() == 2);

    const auto loo = kfold_cv(ds, 50, 3, echo);
    CHECK(loo.folds.size() == 50);
    for (const auto &f : loo.folds) CHECK(f.test_size == 1);

    const Pipeline wrong_size = [](const Dataset &, const Dataset &) { return std::vector<std::string>{}; };
    CHECK_THROWS_AS(kfold_cv(ds, 5, 3, wrong_size), ContractViolation);
}

TEST_CASE("CV summary averages per-fold metrics and recomputes F") {
    const auto ds = labeled({{"a", 20}, {"b", 20}});
    const Pipeline always_a = [](const Dataset &, const Dataset &test) { return repeat("a", test.size()); };
    const auto rep = kfold_cv(ds, 4, 1, always_a);
    CHECK(rep.mean_oa == doctest::Approx(0.5));
    CHECK(rep.mean_recall == doctest::Approx(0.5));
    CHECK(rep.mean_precision == doctest::Approx(0.25));
    CHECK(rep.f_measure == doctest::Approx(f_measure(0.25, 0.5)));
    const auto row = summary_row("NFI", rep);
    std::vector<SummaryRow> rows{row, baseline_row("C4.5", 0.9, 0.8, 0.85)};
    std::ostringstream out;
    write_summary_csv(out, rows);
    CHECK(out.str() == "algorithm,precision,recall,oa,f_measure\n"
                       "NFI,0.25,0.5,0.5,0.3333333333333333\n"
                       "C4.5,0.9,0.8,0.85,0.8470588235294118\n");
}
