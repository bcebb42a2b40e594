#ifndef NFI_FLOW_HPP
#define NFI_FLOW_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace nfi {

/// Microseconds since the Unix epoch.
using Micros = std::int64_t;

inline constexpr Micros micros_per_second = 1'000'000;

enum class Protocol : std::uint8_t { tcp = 6, udp = 17 };

enum class Direction : std::uint8_t { forward, backward };

namespace tcp_flag {
inline constexpr std::uint8_t fin = 0x01;
inline constexpr std::uint8_t syn = 0x02;
inline constexpr std::uint8_t rst = 0x04;
inline constexpr std::uint8_t psh = 0x08;
inline constexpr std::uint8_t ack = 0x10;
inline constexpr std::uint8_t urg = 0x20;
} // namespace tcp_flag

/// Dotted-quad helpers; addresses are kept in host byte order.
std::string format_ipv4(std::uint32_t addr);
std::uint32_t parse_ipv4(const std::string &text);

/// One captured IPv4 TCP/UDP packet.
struct PacketRecord {
    Micros ts = 0;
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Protocol proto = Protocol::tcp;
    std::uint32_t length = 20; ///< IP total length
    std::uint8_t tcp_flags = 0;
    std::uint8_t tos = 0;

    bool operator==(const PacketRecord &) const = default;
};

/// Canonical bidirectional five-tuple: the (ip, port) endpoint that compares
/// smaller (ip first, then port) is stored as "lo".
struct FlowKey {
    std::uint32_t ip_lo = 0;
    std::uint32_t ip_hi = 0;
    std::uint16_t port_lo = 0;
    std::uint16_t port_hi = 0;
    Protocol proto = Protocol::tcp;

    auto tie() const { return std::tie(ip_lo, ip_hi, port_lo, port_hi, proto); }
    bool operator==(const FlowKey &o) const { return tie() == o.tie(); }
    bool operator<(const FlowKey &o) const { return tie() < o.tie(); }

    std::string to_string() const;
};

struct FlowKeyHash {
    std::size_t operator()(const FlowKey &k) const noexcept {
        std::uint64_t h = (static_cast<std::uint64_t>(k.ip_lo) << 32) | k.ip_hi;
        h ^= (static_cast<std::uint64_t>(k.port_lo) << 24) ^ (static_cast<std::uint64_t>(k.port_hi) << 8) ^
             static_cast<std::uint64_t>(k.proto);
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
        return static_cast<std::size_t>(h);
    }
};

/// Canonical key plus the direction the packet travels in relative to it
/// (forward = lo -> hi).
struct KeyedDirection {
    FlowKey key;
    Direction direction;
};

KeyedDirection canonical_key(const PacketRecord &pkt);

/// Aggregated bidirectional flow. "Forward" is the direction of the first
/// packet of the episode, which `forward_is_lo` records relative to the key.
struct FlowRecord {
    FlowKey key;
    bool forward_is_lo = true;
    std::uint64_t fwd_packets = 0;
    std::uint64_t bwd_packets = 0;
    std::uint64_t fwd_bytes = 0;
    std::uint64_t bwd_bytes = 0;
    Micros first_ts = 0;
    Micros last_ts = 0;
    std::uint8_t tcp_flags_fwd = 0;
    std::uint8_t tcp_flags_bwd = 0;
    std::uint8_t tos_or = 0;
    bool complete = false; ///< TCP: SYN and FIN both observed

    std::uint64_t packets() const { return fwd_packets + bwd_packets; }
    std::uint64_t bytes() const { return fwd_bytes + bwd_bytes; }

    /// Source endpoint of the forward direction.
    std::uint32_t fwd_src_ip() const { return forward_is_lo ? key.ip_lo : key.ip_hi; }
    std::uint32_t fwd_dst_ip() const { return forward_is_lo ? key.ip_hi : key.ip_lo; }
    std::uint16_t fwd_src_port() const { return forward_is_lo ? key.port_lo : key.port_hi; }
    std::uint16_t fwd_dst_port() const { return forward_is_lo ? key.port_hi : key.port_lo; }

    bool operator==(const FlowRecord &) const = default;
};

struct AggregateOptions {
    double inactive_timeout_s = 15.0;
    double active_timeout_s = 1800.0;
    double reorder_tolerance_s = 1.0;
    /// Also return the packets of each flow (needed by sampling analysis).
    bool keep_packets = false;
};

struct AggregateResult {
    std::vector<FlowRecord> flows;
    /// Parallel to `flows` when AggregateOptions::keep_packets is set.
    std::vector<std::vector<PacketRecord>> flow_packets;
    std::size_t accepted = 0;
    /// Packets older than the reordering tolerance allows; dropped.
    std::size_t rejected_out_of_order = 0;
};

/// Groups a time-ordered packet stream into flow episodes. A flow closes on
/// inactivity, on exceeding its active lifetime, or (TCP) once FIN/RST has
/// been seen in both directions. Output is sorted by (first_ts, key).
AggregateResult aggregate(std::span<const PacketRecord> packets, const AggregateOptions &opts = {});

} // namespace nfi

template <>
struct std::hash<nfi::FlowKey> {
    std::size_t operator()(const nfi::FlowKey &k) const noexcept { return nfi::FlowKeyHash{}(k); }
};

#endif // NFI_FLOW_HPP
