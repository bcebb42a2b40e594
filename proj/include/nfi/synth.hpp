#ifndef NFI_SYNTH_HPP
#define NFI_SYNTH_HPP

#include "nfi/features.hpp"
#include "nfi/flow.hpp"
#include "nfi/labels.hpp"
#include "nfi/rng.hpp"

#include <json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nfi {

/// Scalar generator: {"dist": "constant|uniform|normal|lognormal|exponential|pareto", ...}
/// with optional "min"/"max" clamps.
struct Distribution {
    enum class Kind { constant, uniform, normal, lognormal, exponential, pareto };
    Kind kind = Kind::constant;
    double a = 0; ///< value | lo | mean | mu | mean | scale
    double b = 0; ///< -     | hi | stddev | sigma | - | shape
    std::optional<double> min;
    std::optional<double> max;

    double draw(Rng &rng) const;
    static Distribution from_json(const nlohmann::json &j);
};

struct GaussianFeature {
    double mean = 0;
    double stddev = 0;
};

struct PacketGenerator {
    Protocol proto = Protocol::tcp;
    std::vector<std::uint16_t> server_ports{443};
    Distribution count;
    Distribution size;
    Distribution iat; ///< seconds
    double forward_fraction = 0.5;
    std::uint8_t tos = 0;
};

struct SynthClass {
    std::string label;
    std::size_t flows = 1;
    /// Features left unset are generated as constant 0.
    std::array<std::optional<GaussianFeature>, feature_count> features{};
    std::optional<PacketGenerator> packets;
};

struct SynthSpec {
    std::uint64_t seed = 0;
    Micros start_ts = 1'600'000'000LL * micros_per_second;
    double span_s = 60.0; ///< flow start times are spread over this window
    std::vector<SynthClass> classes;

    /// Throws FormatError on invalid specs (negative stddev, zero flows...).
    static SynthSpec from_json(const nlohmann::json &doc);
};

SynthSpec load_synth_spec(const std::filesystem::path &path);

/// Independent per-feature Gaussian draws, clamped at 0, class by class.
Dataset synth_dataset(const SynthSpec &spec);

struct SynthTrace {
    std::vector<PacketRecord> packets;             ///< merged, time ordered
    std::vector<std::vector<PacketRecord>> flows;  ///< per generated flow
    std::vector<LabelRow> labels;                  ///< parallel to flows
};

/// Packet-level trace; every class needs a "packets" generator. TCP flows
/// open with SYN / SYN-ACK and, from four packets up, close with a FIN in
/// each direction.
SynthTrace synth_trace(const SynthSpec &spec);

} // namespace nfi

#endif // NFI_SYNTH_HPP
