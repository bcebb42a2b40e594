#include "nfi/synth.hpp"

#include "nfi/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace nfi {

double Distribution::draw(Rng &rng) const {
    double v = 0;
    switch (kind) {
    case Kind::constant: v = a; break;
    case Kind::uniform: v = rng.uniform(a, b); break;
    case Kind::normal: v = rng.normal(a, b); break;
    case Kind::lognormal: v = std::exp(rng.normal(a, b)); break;
    case Kind::exponential: v = rng.exponential(a); break;
    case Kind::pareto: v = a / std::pow(rng.uniform_open0(), 1.0 / b); break;
    }
    if (min) {
        v = std::max(v, *min);
    }
    if (max) {
        v = std::min(v, *max);
    }
    return v;
}

Distribution Distribution::from_json(const nlohmann::json &j) {
    Distribution d;
    if (j.is_number()) {
        d.a = j.get<double>();
        return d;
    }
    const std::string kind = j.at("dist").get<std::string>();
    if (kind == "constant") {
        d.kind = Kind::constant;
        d.a = j.at("value").get<double>();
    } else if (kind == "uniform") {
        d.kind = Kind::uniform;
        d.a = j.at("lo").get<double>();
        d.b = j.at("hi").get<double>();
        if (d.b < d.a) {
            throw FormatError{"uniform distribution needs lo <= hi"};
        }
    } else if (kind == "normal") {
        d.kind = Kind::normal;
        d.a = j.at("mean").get<double>();
        d.b = j.at("stddev").get<double>();
    } else if (kind == "lognormal") {
        d.kind = Kind::lognormal;
        d.a = j.at("mu").get<double>();
        d.b = j.at("sigma").get<double>();
    } else if (kind == "exponential") {
        d.kind = Kind::exponential;
        d.a = j.at("mean").get<double>();
        if (d.a <= 0) {
            throw FormatError{"exponential distribution needs mean > 0"};
        }
    } else if (kind == "pareto") {
        d.kind = Kind::pareto;
        d.a = j.at("scale").get<double>();
        d.b = j.at("shape").get<double>();
        if (d.a <= 0 || d.b <= 0) {
            throw FormatError{"pareto distribution needs scale, shape > 0"};
        }
    } else {
        throw FormatError{"unknown distribution '" + kind + "'"};
    }
    if ((d.kind == Kind::normal || d.kind == Kind::lognormal) && d.b < 0) {
        throw FormatError{"distribution stddev/sigma must be >= 0"};
    }
    if (j.contains("min")) {
        d.min = j.at("min").get<double>();
    }
    if (j.contains("max")) {
        d.max = j.at("max").get<double>();
    }
    return d;
}

SynthSpec SynthSpec::from_json(const nlohmann::json &doc) {
    try {
        SynthSpec spec;
        spec.seed = doc.value("seed", std::uint64_t{0});
        spec.start_ts = doc.value("start_ts", spec.start_ts);
        spec.span_s = doc.value("span_s", spec.span_s);
        if (spec.span_s < 0) {
            throw FormatError{"span_s must be >= 0"};
        }
        for (const auto &jc : doc.at("classes")) {
            SynthClass c;
            c.label = jc.at("label").get<std::string>();
            if (c.label.empty() || c.label.find_first_of(",\n\r") != std::string::npos) {
                throw FormatError{"class label must be non-empty and free of separators"};
            }
            const auto flows = jc.at("flows").get<std::int64_t>();
            if (flows < 1) {
                throw FormatError{"class '" + c.label + "' needs flows >= 1"};
            }
            c.flows = static_cast<std::size_t>(flows);
            if (jc.contains("features")) {
                for (const auto &[name, g] : jc.at("features").items()) {
                    const auto f = feature_from_name(name);
                    if (!f) {
                        throw FormatError{"unknown feature '" + name + "' in class '" + c.label + "'"};
                    }
                    GaussianFeature gf{g.at("mean").get<double>(), g.at("stddev").get<double>()};
                    if (gf.stddev < 0) {
                        throw FormatError{"feature '" + name + "' in class '" + c.label + "' has stddev < 0"};
                    }
                    c.features[feature_index(*f)] = gf;
                }
            }
            if (jc.contains("packets")) {
                const auto &jp = jc.at("packets");
                PacketGenerator pg;
                const std::string proto = jp.value("proto", std::string{"tcp"});
                if (proto == "tcp") {
                    pg.proto = Protocol::tcp;
                } else if (proto == "udp") {
                    pg.proto = Protocol::udp;
                } else {
                    throw FormatError{"packet proto must be tcp or udp"};
                }
                if (jp.contains("server_ports")) {
                    pg.server_ports = jp.at("server_ports").get<std::vector<std::uint16_t>>();
                    if (pg.server_ports.empty()) {
                        throw FormatError{"server_ports must not be empty"};
                    }
                }
                pg.count = Distribution::from_json(jp.at("count"));
                pg.size = Distribution::from_json(jp.at("size"));
                pg.iat = Distribution::from_json(jp.at("iat"));
                pg.forward_fraction = jp.value("forward_fraction", 0.5);
                pg.tos = jp.value("tos", std::uint8_t{0});
                c.packets = pg;
            }
            spec.classes.push_back(std::move(c));
        }
        if (spec.classes.empty()) {
            throw FormatError{"synth spec needs at least one class"};
        }
        return spec;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError{std::string{"invalid synth spec: "} + e.what()};
    }
}

SynthSpec load_synth_spec(const std::filesystem::path &path) {
    std::ifstream in{path};
    if (!in) {
        throw IoError{"cannot open synth spec " + path.string()};
    }
    try {
        return SynthSpec::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception &e) {
        throw FormatError{path.string() + ": " + e.what()};
    } catch (const FormatError &e) {
        throw FormatError{path.string() + ": " + e.what()};
    }
}

Dataset synth_dataset(const SynthSpec &spec) {
    std::vector<FeatureVector> rows;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const SynthClass &cls = spec.classes[c];
        Rng rng{derive_seed(spec.seed, 0x5eedda7aULL, c)};
        for (std::size_t i = 0; i < cls.flows; ++i) {
            FeatureVector v;
            for (std::size_t f = 0; f < feature_count; ++f) {
                if (const auto &g = cls.features[f]) {
                    v.values[f] = std::max(0.0, rng.normal(g->mean, g->stddev));
                }
            }
            v.label = cls.label;
            rows.push_back(std::move(v));
        }
    }
    return Dataset::from_rows(std::move(rows));
}

namespace {

Micros to_micros(double seconds) {
    return static_cast<Micros>(std::llround(seconds * static_cast<double>(micros_per_second)));
}

} // namespace

SynthTrace synth_trace(const SynthSpec &spec) {
    SynthTrace trace;
    std::uint64_t endpoint_counter = 0;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const SynthClass &cls = spec.classes[c];
        if (!cls.packets) {
            throw ContractViolation{"class '" + cls.label + "' has no packet generator"};
        }
        const PacketGenerator &gen = *cls.packets;
        Rng rng{derive_seed(spec.seed, 0x7ace7aceULL, c)};
        const std::uint32_t server_base = (192u << 24) | (168u << 16) | (static_cast<std::uint32_t>(c % 256) << 8);
        const std::uint32_t min_len = gen.proto == Protocol::tcp ? 40 : 28;

        for (std::size_t i = 0; i < cls.flows; ++i) {
            const std::uint64_t e = endpoint_counter++;
            const std::uint32_t client_ip = (10u << 24) + static_cast<std::uint32_t>(e / 60000) + 1;
            const auto client_port = static_cast<std::uint16_t>(1024 + e % 60000);
            const std::uint32_t server_ip = server_base + 1 + static_cast<std::uint32_t>(rng.below(250));
            const std::uint16_t server_port = gen.server_ports[rng.below(gen.server_ports.size())];

            const auto n = static_cast<std::size_t>(std::max(1.0, std::round(gen.count.draw(rng))));
            Micros ts = spec.start_ts + to_micros(rng.uniform(0.0, spec.span_s));
            std::vector<PacketRecord> flow;
            flow.reserve(n);
            for (std::size_t k = 0; k < n; ++k) {
                if (k > 0) {
                    ts += std::max<Micros>(0, to_micros(gen.iat.draw(rng)));
                }
                bool forward = k == 0 || rng.bernoulli(gen.forward_fraction);
                std::uint8_t flags = 0;
                if (gen.proto == Protocol::tcp) {
                    flags = tcp_flag::ack | tcp_flag::psh;
                    if (k == 0) {
                        flags = tcp_flag::syn;
                    } else if (k == 1) {
                        flags = tcp_flag::syn | tcp_flag::ack;
                        forward = false;
                    } else if (n >= 4 && k == n - 2) {
                        flags = tcp_flag::fin | tcp_flag::ack;
                        forward = true;
                    } else if (n >= 4 && k == n - 1) {
                        flags = tcp_flag::fin | tcp_flag::ack;
                        forward = false;
                    }
                }
                const double size = std::clamp(std::round(gen.size.draw(rng)), static_cast<double>(min_len), 1500.0);
                PacketRecord pkt;
                pkt.ts = ts;
                pkt.src_ip = forward ? client_ip : server_ip;
                pkt.dst_ip = forward ? server_ip : client_ip;
                pkt.src_port = forward ? client_port : server_port;
                pkt.dst_port = forward ? server_port : client_port;
                pkt.proto = gen.proto;
                pkt.length = static_cast<std::uint32_t>(size);
                pkt.tcp_flags = flags;
                pkt.tos = gen.tos;
                flow.push_back(pkt);
            }
            const auto keyed = canonical_key(flow.front());
            trace.labels.push_back({keyed.key, flow.front().ts, cls.label, trace.labels.size() + 2});
            trace.flows.push_back(std::move(flow));
        }
    }

    for (const auto &flow : trace.flows) {
        trace.packets.insert(trace.packets.end(), flow.begin(), flow.end());
    }
    std::stable_sort(trace.packets.begin(), trace.packets.end(),
                     [](const PacketRecord &a, const PacketRecord &b) { return a.ts < b.ts; });
    return trace;
}

} // namespace nfi
