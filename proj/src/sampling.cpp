#include "nfi/sampling.hpp"

#include "nfi/error.hpp"
#include "nfi/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace nfi {

void SamplingConfig::validate() const {
    if (!(p > 0.0 && p <= 1.0)) {
        throw ContractViolation{"sampling probability must lie in (0, 1], got " + std::to_string(p)};
    }
}

namespace {

// Visits the indices of a Bernoulli(p) subset of [0, n) by drawing the
// geometric gaps between survivors, so cost scales with n*p rather than n.
template <typename Fn>
void for_each_sampled(std::size_t n, double p, Rng &rng, Fn &&fn) {
    if (p >= 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    const double log_q = std::log1p(-p);
    auto gap = [&]() -> double { return std::floor(std::log(rng.uniform_open0()) / log_q); };
    double pos = gap();
    while (pos < static_cast<double>(n)) {
        fn(static_cast<std::size_t>(pos));
        pos += 1.0 + gap();
    }
}

struct Welford {
    double mean = 0;
    double m2 = 0;
    std::size_t n = 0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

struct FlowTruth {
    double length = 0;
    double size = 0;
    double duration = 0;
};

FlowTruth truth_of(std::span<const PacketRecord> flow) {
    FlowTruth t;
    t.length = static_cast<double>(flow.size());
    Micros lo = std::numeric_limits<Micros>::max();
    Micros hi = std::numeric_limits<Micros>::min();
    for (const auto &pkt : flow) {
        t.size += pkt.length;
        lo = std::min(lo, pkt.ts);
        hi = std::max(hi, pkt.ts);
    }
    t.duration = flow.empty() ? 0.0 : static_cast<double>(hi - lo) / static_cast<double>(micros_per_second);
    return t;
}

struct DreTriple {
    double length = 0;
    double size = 0;
    double duration = 0;

    double pick(Metric m) const {
        switch (m) {
        case Metric::length: return length;
        case Metric::size: return size;
        case Metric::duration: return duration;
        }
        throw ContractViolation{"unknown metric"};
    }
};

// One Monte Carlo pass shared by all three metrics.
DreTriple simulate(std::span<const PacketRecord> flow, const SamplingConfig &cfg, int trials) {
    cfg.validate();
    if (flow.empty()) {
        throw ContractViolation{"DRE needs a non-empty flow"};
    }
    if (trials < min_trials) {
        throw ContractViolation{"Monte Carlo DRE needs at least " + std::to_string(min_trials) + " trials"};
    }
    const FlowTruth truth = truth_of(flow);
    Welford len_err;
    Welford size_err;
    Welford dur_err;
    for (int t = 0; t < trials; ++t) {
        Rng rng{derive_seed(cfg.seed, static_cast<std::uint64_t>(t))};
        std::size_t count = 0;
        double bytes = 0;
        Micros lo = std::numeric_limits<Micros>::max();
        Micros hi = std::numeric_limits<Micros>::min();
        for_each_sampled(flow.size(), cfg.p, rng, [&](std::size_t i) {
            ++count;
            bytes += flow[i].length;
            lo = std::min(lo, flow[i].ts);
            hi = std::max(hi, flow[i].ts);
        });
        const double l_hat = static_cast<double>(count) / cfg.p;
        const double s_hat = bytes / cfg.p;
        const double fd_hat = count >= 2 ? static_cast<double>(hi - lo) / static_cast<double>(micros_per_second) : 0.0;
        len_err.add((truth.length - l_hat) / truth.length);
        size_err.add(truth.size > 0 ? (truth.size - s_hat) / truth.size : 0.0);
        dur_err.add(truth.duration - fd_hat);
    }
    return {len_err.variance(), size_err.variance(), dur_err.mean};
}

} // namespace

std::vector<PacketRecord> bernoulli_sample(std::span<const PacketRecord> packets, const SamplingConfig &cfg) {
    cfg.validate();
    std::vector<PacketRecord> out;
    Rng rng{cfg.seed};
    for_each_sampled(packets.size(), cfg.p, rng, [&](std::size_t i) { out.push_back(packets[i]); });
    return out;
}

FlowEstimates estimate(std::span<const PacketRecord> sampled, double p) {
    if (!(p > 0.0)) {
        throw ContractViolation{"estimate needs p > 0"};
    }
    FlowEstimates e;
    if (sampled.empty()) {
        return e;
    }
    const FlowTruth seen = truth_of(sampled);
    e.sampled_count = sampled.size();
    e.l_hat = seen.length / p;
    e.s_hat = seen.size / p;
    e.fd_hat = sampled.size() >= 2 ? seen.duration : 0.0;
    return e;
}

std::string_view metric_name(Metric m) {
    switch (m) {
    case Metric::length: return "flow_length";
    case Metric::size: return "flow_size";
    case Metric::duration: return "flow_duration";
    }
    return "unknown";
}

bool is_biased(Metric m) { return m == Metric::duration; }

double relative_error_variance(Metric m, std::span<const PacketRecord> flow, double p) {
    SamplingConfig{p, 0}.validate();
    if (flow.empty()) {
        throw ContractViolation{"relative_error_variance needs a non-empty flow"};
    }
    switch (m) {
    case Metric::length:
        return (1.0 - p) / (static_cast<double>(flow.size()) * p);
    case Metric::size: {
        double sum = 0;
        double sum_sq = 0;
        for (const auto &pkt : flow) {
            const double s = pkt.length;
            sum += s;
            sum_sq += s * s;
        }
        return (1.0 - p) / p * sum_sq / (sum * sum);
    }
    case Metric::duration:
        break;
    }
    throw ContractViolation{"no closed-form relative error variance for a biased metric"};
}

double dre(Metric m, std::span<const PacketRecord> flow, const SamplingConfig &cfg, int trials) {
    return simulate(flow, cfg, trials).pick(m);
}

double adre(Metric m, std::span<const std::vector<PacketRecord>> flows, const SamplingConfig &cfg, int trials) {
    if (flows.empty()) {
        throw ContractViolation{"ADRE needs at least one flow"};
    }
    double sum = 0;
    for (std::size_t k = 0; k < flows.size(); ++k) {
        sum += dre(m, flows[k], SamplingConfig{cfg.p, derive_seed(cfg.seed, k)}, trials);
    }
    return sum / static_cast<double>(flows.size());
}

std::uint32_t parse_ratio(std::string_view token) {
    const auto colon = token.find(':');
    if (colon == std::string_view::npos || token.substr(0, colon) != "1") {
        throw ContractViolation{"sampling ratio '" + std::string{token} + "' must look like 1:N"};
    }
    const auto rest = token.substr(colon + 1);
    std::uint32_t n = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), n);
    if (rest.empty() || ec != std::errc{} || ptr != rest.data() + rest.size() || n < 1) {
        throw ContractViolation{"sampling ratio '" + std::string{token} + "' must look like 1:N with N >= 1"};
    }
    return n;
}

std::vector<std::uint32_t> parse_ratio_list(std::string_view list) {
    std::vector<std::uint32_t> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto token = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.push_back(parse_ratio(token));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

SamplingReport sampling_report(std::span<const std::vector<PacketRecord>> flows, std::span<const std::uint32_t> ratios,
                               std::uint64_t seed, int trials) {
    if (flows.empty()) {
        throw DegenerateInput{"sampling report needs at least one flow"};
    }
    SamplingReport report;
    report.seed = seed;
    report.trials = trials;
    report.flows = flows.size();

    constexpr Metric metrics[] = {Metric::length, Metric::size, Metric::duration};
    std::vector<MetricRatioResult> by_metric[3];
    for (std::uint32_t ratio : ratios) {
        // ratio seeds match adre(m, flows, {1/ratio, derive_seed(seed, ratio)}, trials)
        const std::uint64_t ratio_seed = derive_seed(seed, ratio);
        const double p = 1.0 / static_cast<double>(ratio);
        std::vector<DreTriple> per_flow;
        per_flow.reserve(flows.size());
        for (std::size_t k = 0; k < flows.size(); ++k) {
            per_flow.push_back(simulate(flows[k], SamplingConfig{p, derive_seed(ratio_seed, k)}, trials));
        }
        for (int mi = 0; mi < 3; ++mi) {
            MetricRatioResult r{metrics[mi], ratio, 0, {}};
            double sum = 0;
            for (const auto &d : per_flow) {
                r.dre.push_back(d.pick(metrics[mi]));
                sum += r.dre.back();
            }
            r.adre = sum / static_cast<double>(per_flow.size());
            by_metric[mi].push_back(std::move(r));
        }
    }
    for (auto &group : by_metric) {
        for (auto &r : group) {
            report.results.push_back(std::move(r));
        }
    }
    return report;
}

void write_report_csv(std::ostream &out, const SamplingReport &report) {
    out << "metric,ratio,adre\n";
    for (const auto &r : report.results) {
        char buf[64];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, r.adre);
        out << metric_name(r.metric) << ",1:" << r.ratio << ',' << std::string_view(buf, end - buf) << '\n';
    }
}

nlohmann::json to_json(const SamplingReport &report) {
    nlohmann::json doc;
    doc["seed"] = report.seed;
    doc["trials"] = report.trials;
    doc["flows"] = report.flows;
    auto &rows = doc["results"] = nlohmann::json::array();
    for (const auto &r : report.results) {
        rows.push_back({{"metric", metric_name(r.metric)},
                        {"ratio", "1:" + std::to_string(r.ratio)},
                        {"p", 1.0 / r.ratio},
                        {"biased", is_biased(r.metric)},
                        {"adre", r.adre},
                        {"dre", r.dre}});
    }
    return doc;
}

} // namespace nfi
