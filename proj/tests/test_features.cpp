#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfi/error.hpp"
#include "nfi/features.hpp"
#include "nfi/rng.hpp"
#include "test_support.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace nfi;

namespace {

FlowRecord make_flow(std::uint64_t fp, std::uint64_t fb, std::uint64_t bp, std::uint64_t bb, double dur_s,
                     std::uint16_t port_a, std::uint16_t port_b, Protocol proto) {
    FlowRecord f;
    f.key = canonical_key(test::pkt(0, "10.0.0.1", port_a, "10.0.0.2", port_b, proto)).key;
    f.fwd_packets = fp;
    f.fwd_bytes = fb;
    f.bwd_packets = bp;
    f.bwd_bytes = bb;
    f.first_ts = 1'000'000'000;
    f.last_ts = f.first_ts + static_cast<Micros>(std::llround(dur_s * 1e6));
    return f;
}

FlowRecord random_flow(Rng &rng) {
    const auto proto = rng.bernoulli(0.5) ? Protocol::tcp : Protocol::udp;
    FlowRecord f = make_flow(0, 0, 0, 0, 0, static_cast<std::uint16_t>(rng.below(65536)),
                             static_cast<std::uint16_t>(rng.below(65536)), proto);
    f.fwd_packets = 1 + rng.below(5000);
    f.fwd_bytes = f.fwd_packets * 20 + rng.below(f.fwd_packets * 1480 + 1);
    f.bwd_packets = rng.bernoulli(0.2) ? 0 : rng.below(5000);
    f.bwd_bytes = f.bwd_packets * 20 + rng.below(f.bwd_packets * 1480 + 1);
    f.last_ts = f.first_ts + (rng.bernoulli(0.1) ? 0 : static_cast<Micros>(rng.below(600'000'000)));
    if (proto == Protocol::tcp) {
        f.tcp_flags_fwd = static_cast<std::uint8_t>(rng.below(64));
        f.tcp_flags_bwd = static_cast<std::uint8_t>(rng.below(64));
    }
    f.tos_or = static_cast<std::uint8_t>(rng.below(256));
    return f;
}

Dataset random_dataset(Rng &rng, std::size_t n) {
    std::vector<FeatureVector> rows;
    const char *labels[] = {"skype", "web", "p2p"};
    for (std::size_t i = 0; i < n; ++i) {
        FeatureVector v;
        for (auto &x : v.values) {
            switch (rng.below(4)) {
            case 0: x = static_cast<double>(rng.below(65536)); break;
            case 1: x = rng.uniform() * 1e-7; break;
            case 2: x = std::exp(rng.normal(0, 10)); break;
            default: x = rng.uniform(0, 1e6); break;
            }
        }
        if (rng.below(5) != 0) {
            v.label = labels[rng.below(3)];
        }
        rows.push_back(v);
    }
    return Dataset::from_rows(std::move(rows));
}

} // namespace

TEST_CASE("feature ids, names and order") {
    CHECK(feature_count == 16);
    CHECK(feature_id(Feature::lport) == 1);
    CHECK(feature_id(Feature::mean_iat) == 9);
    CHECK(feature_id(Feature::mean_pkt_len) == 16);
    CHECK(feature_name(Feature::bps) == "bps");
    CHECK(feature_from_name("pktlen_ratio") == Feature::pktlen_ratio);
    CHECK_FALSE(feature_from_name("nope"));
    CHECK(feature_from_id(4) == Feature::transproto);
    CHECK_THROWS_AS(feature_from_id(0), ContractViolation);
    CHECK_THROWS_AS(feature_from_id(17), ContractViolation);
    CHECK(dataset_header() == "lport,hport,duration,transproto,tcpflags_fwd,tcpflags_bwd,pps,bps,mean_iat,pkt_ratio,"
                              "byte_ratio,pktlen_ratio,bidir_packets,bidir_bytes,tos,mean_pkt_len,label");
}

TEST_CASE("symmetric 2 s TCP flow") {
    const auto v = featurize(make_flow(10, 4000, 10, 4000, 2.0, 5000, 80, Protocol::tcp));
    CHECK(v[Feature::pps] == 10);
    CHECK(v[Feature::bps] == 4000);
    CHECK(v[Feature::mean_pkt_len] == 400);
    CHECK(v[Feature::pkt_ratio] == 1);
    CHECK(v[Feature::byte_ratio] == 1);
    CHECK(v[Feature::pktlen_ratio] == 1);
    CHECK(v[Feature::lport] == 80);
    CHECK(v[Feature::hport] == 5000);
    CHECK(v[Feature::duration] == 2);
    CHECK(v[Feature::transproto] == 6);
    CHECK(v[Feature::mean_iat] == 0.1);
    CHECK(v[Feature::bidir_packets] == 20);
    CHECK(v[Feature::bidir_bytes] == 8000);
}

TEST_CASE("single-packet UDP flow uses the duration floor and ratio guards") {
    FlowRecord f = make_flow(1, 120, 0, 0, 0.0, 3478, 40000, Protocol::udp);
    f.tcp_flags_fwd = 0x12; // ignored for UDP
    const auto v = featurize(f);
    CHECK(v[Feature::duration] == 0.001);
    CHECK(v[Feature::pps] == doctest::Approx(1000));
    CHECK(v[Feature::bps] == doctest::Approx(120000));
    CHECK(v[Feature::mean_iat] == 0.001);
    CHECK(v[Feature::pkt_ratio] == 1);
    CHECK(v[Feature::byte_ratio] == 120);
    CHECK(v[Feature::pktlen_ratio] == 120);
    CHECK(v[Feature::tcpflags_fwd] == 0);
    CHECK(v[Feature::tcpflags_bwd] == 0);
    CHECK(v[Feature::transproto] == 17);
    CHECK(v[Feature::mean_pkt_len] == 120);
}

TEST_CASE("one-way TCP flow keeps direction flags and tos") {
    FlowRecord f = make_flow(3, 180, 0, 0, 0.5, 1000, 443, Protocol::tcp);
    f.tcp_flags_fwd = tcp_flag::syn;
    f.tos_or = 0xb8;
    const auto v = featurize(f);
    CHECK(v[Feature::tcpflags_fwd] == tcp_flag::syn);
    CHECK(v[Feature::tcpflags_bwd] == 0);
    CHECK(v[Feature::tos] == 0xb8);
    CHECK(v[Feature::pkt_ratio] == 3);
}

TEST_CASE("empty flows cannot be featurized") {
    CHECK_THROWS_AS(featurize(make_flow(0, 0, 0, 0, 1, 1, 2, Protocol::udp)), ContractViolation);
}

TEST_CASE("random flows: counters, identities and invariants against raw recomputation") {
    Rng rng{123};
    for (int i = 0; i < 2000; ++i) {
        const FlowRecord f = random_flow(rng);
        const auto v = featurize(f);
        const double dur = std::max((f.last_ts - f.first_ts) / 1e6, 0.001);
        const double n = static_cast<double>(f.fwd_packets + f.bwd_packets);
        const double s = static_cast<double>(f.fwd_bytes + f.bwd_bytes);
        CHECK(v[Feature::bidir_packets] == n);
        CHECK(v[Feature::bidir_bytes] == s);
        CHECK(v[Feature::pkt_ratio] ==
              static_cast<double>(f.fwd_packets) / std::max<double>(static_cast<double>(f.bwd_packets), 1));
        CHECK(v[Feature::byte_ratio] ==
              static_cast<double>(f.fwd_bytes) / std::max<double>(static_cast<double>(f.bwd_bytes), 1));
        CHECK(v[Feature::duration] == doctest::Approx(dur).epsilon(1e-12));
        CHECK(v[Feature::pps] == doctest::Approx(n / dur).epsilon(1e-12));
        CHECK(v[Feature::mean_iat] * v[Feature::bidir_packets] == doctest::Approx(v[Feature::duration]).epsilon(1e-12));
        CHECK(v[Feature::mean_pkt_len] == v[Feature::bidir_bytes] / v[Feature::bidir_packets]);
        CHECK(v[Feature::lport] <= v[Feature::hport]);
        CHECK(v[Feature::bidir_packets] >= 1);
        CHECK(v[Feature::mean_pkt_len] >= 20);
        for (double x : v.values) {
            CHECK(std::isfinite(x));
            CHECK(x >= 0);
        }
    }
}

TEST_CASE("doubling both byte counters doubles bps, bidir_bytes and mean_pkt_len, keeps byte_ratio") {
    Rng rng{9};
    for (int i = 0; i < 500; ++i) {
        FlowRecord f = random_flow(rng);
        FlowRecord g = f;
        g.fwd_bytes *= 2;
        g.bwd_bytes *= 2;
        const auto a = featurize(f);
        const auto b = featurize(g);
        CHECK(b[Feature::bps] == doctest::Approx(2 * a[Feature::bps]).epsilon(1e-12));
        CHECK(b[Feature::bidir_bytes] == 2 * a[Feature::bidir_bytes]);
        CHECK(b[Feature::mean_pkt_len] == doctest::Approx(2 * a[Feature::mean_pkt_len]).epsilon(1e-12));
        if (f.bwd_bytes > 0) {
            CHECK(b[Feature::byte_ratio] == doctest::Approx(a[Feature::byte_ratio]).epsilon(1e-12));
        }
        CHECK(featurize(f) == a);
    }
}

TEST_CASE("dataset CSV round trip on 500 random rows") {
    Rng rng{500};
    const Dataset ds = random_dataset(rng, 500);
    std::stringstream buf;
    write_dataset(buf, ds);
    const Dataset back = read_dataset(buf);
    CHECK(back.alphabet == ds.alphabet);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.rows[i] == ds.rows[i]);
    }
}

TEST_CASE("numbers keep at least 9 significant digits") {
    for (double x : {1.0 / 3.0, 123456789.123, 6.02214076e23, 1e-300, 0.1}) {
        const double back = std::stod(format_number(x));
        CHECK(std::abs(back - x) <= 1e-9 * std::abs(x));
    }
}

TEST_CASE("empty dataset writes the header only") {
    std::stringstream buf;
    write_dataset(buf, Dataset{});
    CHECK(buf.str() == dataset_header() + "\n");
    CHECK(read_dataset(buf).empty());
}

TEST_CASE("columns are matched by name in any order") {
    std::stringstream buf;
    buf << "label,mean_pkt_len,tos,bidir_bytes,bidir_packets,pktlen_ratio,byte_ratio,pkt_ratio,mean_iat,bps,pps,"
           "tcpflags_bwd,tcpflags_fwd,transproto,duration,hport,lport\n"
        << "web,16,15,14,13,12,11,10,9,8,7,6,5,4,3,2,1\n,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1\n";
    const auto ds = read_dataset(buf);
    REQUIRE(ds.size() == 2);
    for (std::size_t f = 0; f < feature_count; ++f) {
        CHECK(ds.rows[0].values[f] == static_cast<double>(f + 1));
    }
    CHECK(ds.rows[0].label == "web");
    CHECK_FALSE(ds.rows[1].label);
    CHECK(ds.alphabet == std::vector<std::string>{"web"});
}

TEST_CASE("schema errors name missing and extra columns") {
    std::string header = dataset_header();
    header.replace(header.find("bps,"), 4, "bytes_per_s,");
    std::stringstream buf{header + "\n"};
    try {
        read_dataset(buf);
        FAIL("expected schema error");
    } catch (const FormatError &e) {
        const std::string msg = e.what();
        CHECK(msg.find("bps") != std::string::npos);
        CHECK(msg.find("bytes_per_s") != std::string::npos);
    }
}

TEST_CASE("bad cells are reported with their line") {
    std::stringstream buf{dataset_header() + "\n1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,a\n1,2,3,x,5,6,7,8,9,10,11,12,13,14,15,16,a\n"};
    CHECK_THROWS_WITH_AS(read_dataset(buf), doctest::Contains("line 3"), FormatError);
    std::stringstream neg{dataset_header() + "\n1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,-16,a\n"};
    CHECK_THROWS_AS(read_dataset(neg), FormatError);
    std::stringstream short_row{dataset_header() + "\n1,2,3\n"};
    CHECK_THROWS_AS(read_dataset(short_row), FormatError);
}

TEST_CASE("non-finite values are refused on write") {
    FeatureVector v;
    v[Feature::pps] = std::numeric_limits<double>::infinity();
    std::stringstream buf;
    CHECK_THROWS_AS(write_dataset(buf, Dataset::from_rows({v})), ContractViolation);
}

TEST_CASE("subset keeps the alphabet") {
    Rng rng{1};
    const auto ds = random_dataset(rng, 30);
    const std::vector<std::size_t> idx{3, 1, 4};
    const auto sub = ds.subset(idx);
    CHECK(sub.alphabet == ds.alphabet);
    REQUIRE(sub.size() == 3);
    CHECK(sub.rows[0] == ds.rows[3]);
}
