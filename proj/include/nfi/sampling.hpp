#ifndef NFI_SAMPLING_HPP
#define NFI_SAMPLING_HPP

#include "nfi/flow.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nfi {

struct SamplingConfig {
    double p = 1.0;
    std::uint64_t seed = 0;

    /// Throws ContractViolation unless 0 < p <= 1.
    void validate() const;
};

/// Keeps each packet independently with probability p. Deterministic for a
/// fixed seed; order is preserved.
std::vector<PacketRecord> bernoulli_sample(std::span<const PacketRecord> packets, const SamplingConfig &cfg);

struct FlowEstimates {
    double l_hat = 0;  ///< packets
    double s_hat = 0;  ///< bytes
    double fd_hat = 0; ///< seconds
    std::size_t sampled_count = 0;
};

/// Inverse-probability estimates from the surviving packets of one flow.
FlowEstimates estimate(std::span<const PacketRecord> sampled, double p);

enum class Metric { length, size, duration };

std::string_view metric_name(Metric m);
/// Duration is biased (sampling can only shrink it); length and size are
/// unbiased under inverse-probability scaling.
bool is_biased(Metric m);

/// Closed-form var(l_hat / l) = (1-p)/(l p) for length and
/// ((1-p)/p) * sum(s_i^2) / (sum s_i)^2 for size.
double relative_error_variance(Metric m, std::span<const PacketRecord> flow, double p);

inline constexpr int min_trials = 1000;

/// Degree of relative error for one flow by Monte Carlo: var((M - M_hat)/M)
/// for unbiased metrics and E(M - M_hat) (seconds) for duration. Trial t
/// draws from a substream derived from (cfg.seed, t).
double dre(Metric m, std::span<const PacketRecord> flow, const SamplingConfig &cfg, int trials);

/// Mean of per-flow DRE; flow k uses seed derive_seed(cfg.seed, k).
double adre(Metric m, std::span<const std::vector<PacketRecord>> flows, const SamplingConfig &cfg, int trials);

/// Parses "1:N" (N >= 1) into N.
std::uint32_t parse_ratio(std::string_view token);
std::vector<std::uint32_t> parse_ratio_list(std::string_view list);

struct MetricRatioResult {
    Metric metric;
    std::uint32_t ratio = 1; ///< sampling 1 in `ratio`
    double adre = 0;
    std::vector<double> dre; ///< per flow
};

struct SamplingReport {
    std::uint64_t seed = 0;
    int trials = 0;
    std::size_t flows = 0;
    std::vector<MetricRatioResult> results; ///< grouped by metric, then ratio
};

SamplingReport sampling_report(std::span<const std::vector<PacketRecord>> flows, std::span<const std::uint32_t> ratios,
                               std::uint64_t seed, int trials);

/// `metric,ratio,adre` rows, ratio written as 1:N.
void write_report_csv(std::ostream &out, const SamplingReport &report);
nlohmann::json to_json(const SamplingReport &report);

} // namespace nfi

#endif // NFI_SAMPLING_HPP
