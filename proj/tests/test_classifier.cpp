#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfi/classifier.hpp"
#include "nfi/error.hpp"
#include "nfi/rng.hpp"

#include <cmath>
#include <numbers>

using namespace nfi;

namespace {

FeatureVector row(std::initializer_list<std::pair<Feature, double>> vals, std::optional<std::string> label) {
    FeatureVector v;
    for (auto [f, x] : vals) v[f] = x;
    v.label = std::move(label);
    return v;
}

// Gaussian classes on pps and bps with the given means (stddev 1).
Dataset gaussian_classes(const std::vector<std::pair<double, double>> &means, std::size_t per_class, Rng &rng,
                         double shift = 0) {
    std::vector<FeatureVector> rows;
    for (std::size_t c = 0; c < means.size(); ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            rows.push_back(row({{Feature::pps, means[c].first + shift + rng.normal()},
                                {Feature::bps, means[c].second + shift + rng.normal()}},
                               "k" + std::to_string(c)));
        }
    }
    return Dataset::from_rows(std::move(rows));
}

const std::vector<Feature> two{Feature::pps, Feature::bps};

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

} // namespace

TEST_CASE("two observations 2 and 4: mean 3, variance 2") {
    const auto ds = Dataset::from_rows({row({{Feature::pps, 2}}, "a"), row({{Feature::pps, 4}}, "a"),
                                        row({{Feature::pps, 10}}, "b"), row({{Feature::pps, 12}}, "b")});
    const std::vector<Feature> f{Feature::pps};
    const auto m = train(ds, f);
    CHECK(m.classes[0].mean[0] == 3);
    CHECK(m.classes[0].variance[0] == 2);
    CHECK(m.classes[1].mean[0] == 11);
}

TEST_CASE("class priors are count fractions") {
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 3; ++i) rows.push_back(row({{Feature::pps, double(i)}}, "a"));
    for (int i = 0; i < 7; ++i) rows.push_back(row({{Feature::pps, double(i)}}, "b"));
    const std::vector<Feature> f{Feature::pps};
    const auto m = train(Dataset::from_rows(rows), f);
    CHECK(m.class_prior(0) == doctest::Approx(0.3));
    CHECK(m.class_prior(1) == doctest::Approx(0.7));
}

TEST_CASE("trained parameters match a brute-force mean and unbiased variance") {
    Rng rng{3};
    for (int round = 0; round < 20; ++round) {
        std::vector<FeatureVector> rows;
        const std::size_t n = 2 + rng.below(50);
        std::vector<double> xs;
        for (std::size_t i = 0; i < n; ++i) {
            xs.push_back(rng.normal(100, 30));
            rows.push_back(row({{Feature::duration, xs.back()}}, "only"));
        }
        const std::vector<Feature> f{Feature::duration};
        const auto m = train(Dataset::from_rows(rows), f);
        double mean = 0;
        for (double x : xs) mean += x;
        mean /= double(n);
        double ss = 0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        CHECK(m.classes[0].mean[0] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(m.classes[0].variance[0] == doctest::Approx(ss / double(n - 1)).epsilon(1e-12));
        CHECK(m.classes[0].count == n);
    }
}

TEST_CASE("zero-variance class is floored, not divided by zero") {
    const auto ds = Dataset::from_rows({row({{Feature::pps, 5}}, "a"), row({{Feature::pps, 5}}, "a"),
                                        row({{Feature::pps, 1}}, "b"), row({{Feature::pps, 2}}, "b")});
    const std::vector<Feature> f{Feature::pps};
    const auto m = train(ds, f);
    CHECK(m.classes[0].variance[0] == default_variance_floor);
    const auto s = score(m, row({{Feature::pps, 5}}, std::nullopt));
    CHECK(std::isfinite(s.log_scores[0]));
    CHECK(s.best == 0);
    const auto far = score(m, row({{Feature::pps, 1e6}}, std::nullopt));
    CHECK(std::isfinite(far.log_scores[0]));
}

TEST_CASE("batch and sequential conjugate updates agree") {
    Rng rng{4};
    for (int round = 0; round < 50; ++round) {
        std::vector<double> xs;
        const std::size_t n = 1 + rng.below(200);
        for (std::size_t i = 0; i < n; ++i) xs.push_back(rng.normal(rng.uniform(-50, 50), 1 + rng.uniform() * 20));
        const FeaturePosterior batch = default_prior.absorb(xs);
        FeaturePosterior seq = default_prior;
        std::size_t i = 0;
        while (i < n) {
            const std::size_t take = std::min<std::size_t>(n - i, 1 + rng.below(7));
            seq = seq.absorb(std::span{xs}.subspan(i, take));
            i += take;
        }
        CHECK(close(batch.mu, seq.mu, 1e-9));
        CHECK(close(batch.kappa, seq.kappa, 1e-9));
        CHECK(close(batch.alpha, seq.alpha, 1e-9));
        CHECK(close(batch.beta, seq.beta, 1e-9));
    }
}

TEST_CASE("posterior limits of the prior strength") {
    const std::vector<double> xs{1, 2, 3, 4, 10};
    const double mean = 4, ss = 9 + 4 + 1 + 0 + 36;
    const FeaturePosterior weak{50, 1e-12, 1, 1};
    const auto pw = weak.absorb(xs);
    CHECK(pw.mu == doctest::Approx(mean));
    CHECK(pw.beta == doctest::Approx(1 + ss / 2));
    CHECK(pw.alpha == doctest::Approx(3.5));
    CHECK(pw.variance(1e-9) == doctest::Approx((1 + ss / 2) / 2.5));
    const FeaturePosterior strong{50, 1e12, 1, 1};
    CHECK(strong.absorb(xs).mu == doctest::Approx(50));
    CHECK(default_prior.absorb({}) == default_prior);
    CHECK(FeaturePosterior{0, 1, 0.5, 1}.variance(0.25) == 0.25);
}

TEST_CASE("symmetric two-class midpoint goes to the lower index") {
    const auto ds = Dataset::from_rows({row({{Feature::pps, -2}}, "a"), row({{Feature::pps, 0}}, "a"),
                                        row({{Feature::pps, 0}}, "b"), row({{Feature::pps, 2}}, "b")});
    const std::vector<Feature> f{Feature::pps};
    const auto m = train(ds, f);
    const auto s = score(m, row({{Feature::pps, 0}}, std::nullopt));
    CHECK(s.log_scores[0] == s.log_scores[1]);
    CHECK(s.best == 0);
    CHECK(score(m, row({{Feature::pps, 0.01}}, std::nullopt)).best == 1);
}

TEST_CASE("score differences match a log-density oracle") {
    Rng rng{5};
    const auto ds = gaussian_classes({{0, 0}, {2, 1}, {-1, 3}}, 40, rng);
    const auto m = train(ds, two);
    for (int i = 0; i < 200; ++i) {
        const auto x = row({{Feature::pps, rng.normal(0, 3)}, {Feature::bps, rng.normal(1, 3)}}, std::nullopt);
        std::vector<double> oracle;
        for (const auto &c : m.classes) {
            double lp = std::log(m.class_prior(&c - m.classes.data()));
            for (std::size_t f = 0; f < two.size(); ++f) {
                const double v = c.variance[f], d = x[two[f]] - c.mean[f];
                lp += -0.5 * std::log(2 * std::numbers::pi * v) - d * d / (2 * v);
            }
            oracle.push_back(lp);
        }
        const auto s = score(m, x);
        std::size_t best = 0;
        for (std::size_t c = 1; c < oracle.size(); ++c) {
            if (oracle[c] > oracle[best]) best = c;
            CHECK(s.log_scores[c] - s.log_scores[0] == doctest::Approx(oracle[c] - oracle[0]).epsilon(1e-9));
        }
        CHECK(s.best == best);
    }
}

TEST_CASE("prediction ignores features outside the model and scales with counts") {
    Rng rng{6};
    const auto ds = gaussian_classes({{0, 0}, {3, 3}}, 50, rng);
    const auto m = train(ds, two);
    auto doubled = m;
    for (auto &c : doubled.classes) c.count *= 2;
    for (int i = 0; i < 100; ++i) {
        auto x = row({{Feature::pps, rng.normal(1.5, 2)}, {Feature::bps, rng.normal(1.5, 2)}}, std::nullopt);
        const auto best = score(m, x).best;
        CHECK(score(doubled, x).best == best);
        x[Feature::duration] = 1e9;
        CHECK(score(m, x).best == best);
    }
}

TEST_CASE("separable classes are recovered") {
    Rng rng{7};
    const auto train_ds = gaussian_classes({{0, 0}, {10, 0}, {0, 10}}, 200, rng);
    const auto test_ds = gaussian_classes({{0, 0}, {10, 0}, {0, 10}}, 200, rng);
    const auto m = train(train_ds, two);
    const auto pred = predict(m, test_ds);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == *test_ds.rows[i].label;
    CHECK(double(ok) / double(pred.size()) >= 0.99);
    CHECK(predict(m, Dataset{{}, m.alphabet}).empty());
}

TEST_CASE("identical query rows get identical predictions") {
    Rng rng{8};
    const auto m = train(gaussian_classes({{0, 0}, {1, 1}}, 30, rng), two);
    const auto x = row({{Feature::pps, 0.4}, {Feature::bps, 0.6}}, std::nullopt);
    const auto pred = predict(m, Dataset{{x, x, x}, {}});
    CHECK(pred[0] == pred[1]);
    CHECK(pred[1] == pred[2]);
}

TEST_CASE("update: sequential batches equal one combined batch") {
    Rng rng{9};
    const auto base = train(gaussian_classes({{0, 0}, {5, 5}}, 30, rng), two);
    const auto d1 = gaussian_classes({{1, 1}, {6, 6}}, 20, rng);
    const auto d2 = gaussian_classes({{1, 1}, {6, 6}}, 25, rng);
    auto both = d1;
    both.rows.insert(both.rows.end(), d2.rows.begin(), d2.rows.end());
    const auto seq = update(update(base, d1), d2);
    const auto once = update(base, both);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(seq.classes[c].count == once.classes[c].count);
        CHECK(seq.classes[c].count == 30 + 45);
        for (std::size_t f = 0; f < 2; ++f) {
            CHECK(close(seq.classes[c].mean[f], once.classes[c].mean[f], 1e-9));
            CHECK(close(seq.classes[c].variance[f], once.classes[c].variance[f], 1e-9));
            CHECK(seq.classes[c].mean[f] == seq.classes[c].posterior[f].mu);
        }
    }
}

TEST_CASE("update tracks a shifted distribution") {
    Rng rng{10};
    const auto m = train(gaussian_classes({{0, 0}, {8, 8}}, 100, rng), two);
    const auto fresh = gaussian_classes({{0, 0}, {8, 8}}, 2000, rng, 4);
    const auto u = update(m, fresh);
    // posterior mean ~ (100 * 0 + 2000 * 4) / 2100
    CHECK(u.classes[0].mean[0] == doctest::Approx(4 * 2000.0 / 2100).epsilon(0.02));
    CHECK(update(m, Dataset{{}, m.alphabet}) == m);
}

TEST_CASE("update with only one class leaves the other untouched") {
    Rng rng{11};
    const auto m = train(gaussian_classes({{0, 0}, {8, 8}}, 50, rng), two);
    const auto u = update(m, Dataset::from_rows({row({{Feature::pps, 1}, {Feature::bps, 1}}, "k1")}));
    CHECK(u.classes[0] == m.classes[0]);
    CHECK(u.classes[1].count == 51);
}

TEST_CASE("error paths") {
    Rng rng{12};
    const auto ds = gaussian_classes({{0, 0}, {5, 5}}, 10, rng);
    const auto m = train(ds, two);
    CHECK_THROWS_AS(update(m, Dataset::from_rows({row({{Feature::pps, 1}}, "stranger")})), DegenerateInput);
    const auto thin = Dataset::from_rows({row({{Feature::pps, 1}}, "a"), row({{Feature::pps, 2}}, "a"),
                                          row({{Feature::pps, 3}}, "b")});
    CHECK_THROWS_WITH_AS(train(thin, two), doctest::Contains("insufficient"), DegenerateInput);
    CHECK_THROWS_AS(train(ds, std::vector<Feature>{}), ContractViolation);
    CHECK_THROWS_AS(train(ds, std::vector<Feature>{Feature::pps, Feature::pps}), ContractViolation);
    TrainOptions bad;
    bad.prior.kappa = 0;
    CHECK_THROWS_AS(train(ds, two, bad), ContractViolation);
    auto nan = row({{Feature::pps, std::nan("")}}, std::nullopt);
    CHECK_THROWS_AS(score(m, nan), ContractViolation);
}

TEST_CASE("model JSON round trip and schema checks") {
    Rng rng{13};
    const auto m = update(train(gaussian_classes({{0, 0}, {5, 5}, {9, 1}}, 20, rng), two),
                          gaussian_classes({{0, 0}, {5, 5}, {9, 1}}, 5, rng));
    const auto doc = to_json(m);
    CHECK(doc.at("format") == "nfi-model/1");
    CHECK(model_from_json(nlohmann::json::parse(doc.dump())) == m);

    auto wrong = doc;
    wrong["format"] = "nfi-model/2";
    CHECK_THROWS_WITH_AS(model_from_json(wrong), doctest::Contains("version"), FormatError);
    auto bad_id = doc;
    bad_id["selected_features"][0] = 17;
    CHECK_THROWS_WITH_AS(model_from_json(bad_id), doctest::Contains("schema"), FormatError);
    auto short_mean = doc;
    short_mean["classes"][1]["mean"] = {1.0};
    CHECK_THROWS_AS(model_from_json(short_mean), FormatError);
    auto neg = doc;
    neg["classes"][0]["posterior"][0]["beta"] = -1.0;
    CHECK_THROWS_AS(model_from_json(neg), FormatError);
    CHECK_THROWS_AS(model_from_json(nlohmann::json::array()), FormatError);
}
