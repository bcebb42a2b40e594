#include "nfi/flow.hpp"

#include "nfi/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace nfi {

std::string format_ipv4(std::uint32_t addr) {
    return std::to_string(addr >> 24) + '.' + std::to_string((addr >> 16) & 0xff) + '.' +
           std::to_string((addr >> 8) & 0xff) + '.' + std::to_string(addr & 0xff);
}

std::uint32_t parse_ipv4(const std::string &text) {
    std::uint32_t addr = 0;
    const char *p = text.data();
    const char *end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        unsigned value = 0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc{} || next == p || value > 255) {
            throw FormatError{"invalid IPv4 address '" + text + "'"};
        }
        addr = (addr << 8) | value;
        p = next;
        if (octet < 3) {
            if (p == end || *p != '.') {
                throw FormatError{"invalid IPv4 address '" + text + "'"};
            }
            ++p;
        }
    }
    if (p != end) {
        throw FormatError{"invalid IPv4 address '" + text + "'"};
    }
    return addr;
}

std::string FlowKey::to_string() const {
    return format_ipv4(ip_lo) + ':' + std::to_string(port_lo) + " <-> " + format_ipv4(ip_hi) + ':' +
           std::to_string(port_hi) + (proto == Protocol::tcp ? " tcp" : " udp");
}

KeyedDirection canonical_key(const PacketRecord &pkt) {
    const bool src_is_lo = std::tie(pkt.src_ip, pkt.src_port) <= std::tie(pkt.dst_ip, pkt.dst_port);
    FlowKey key;
    key.proto = pkt.proto;
    if (src_is_lo) {
        key.ip_lo = pkt.src_ip;
        key.port_lo = pkt.src_port;
        key.ip_hi = pkt.dst_ip;
        key.port_hi = pkt.dst_port;
    } else {
        key.ip_lo = pkt.dst_ip;
        key.port_lo = pkt.dst_port;
        key.ip_hi = pkt.src_ip;
        key.port_hi = pkt.src_port;
    }
    return {key, src_is_lo ? Direction::forward : Direction::backward};
}

namespace {

Micros seconds_to_micros(double s) {
    return static_cast<Micros>(std::llround(s * static_cast<double>(micros_per_second)));
}

struct ActiveFlow {
    FlowRecord rec;
    bool close_fwd = false; // FIN or RST seen forward
    bool close_bwd = false;
    bool syn_seen = false;
    bool fin_seen = false;
    std::vector<PacketRecord> packets;
};

class Aggregator {
public:
    Aggregator(const AggregateOptions &opts, AggregateResult &out)
        : inactive_{seconds_to_micros(opts.inactive_timeout_s)},
          active_{seconds_to_micros(opts.active_timeout_s)},
          tolerance_{seconds_to_micros(opts.reorder_tolerance_s)},
          keep_packets_{opts.keep_packets},
          out_{out} {}

    void push(const PacketRecord &pkt) {
        if (pkt.proto != Protocol::tcp && pkt.proto != Protocol::udp) {
            throw ContractViolation{"packet protocol must be TCP or UDP"};
        }
        if (pkt.length < 20) {
            throw ContractViolation{"packet length below IPv4 header size"};
        }
        if (has_clock_ && pkt.ts + tolerance_ < clock_) {
            ++out_.rejected_out_of_order;
            return;
        }
        if (!has_clock_ || pkt.ts > clock_) {
            clock_ = pkt.ts;
        }
        if (!has_clock_) {
            last_sweep_ = clock_;
            has_clock_ = true;
        }
        if (clock_ - last_sweep_ >= micros_per_second) {
            sweep();
            last_sweep_ = clock_;
        }

        const auto [key, dir] = canonical_key(pkt);
        auto it = active_flows_.find(key);
        if (it != active_flows_.end()) {
            const FlowRecord &rec = it->second.rec;
            if (pkt.ts - rec.last_ts > inactive_ || pkt.ts - rec.first_ts > active_) {
                emit(std::move(it->second));
                active_flows_.erase(it);
                it = active_flows_.end();
            }
        }
        if (it == active_flows_.end()) {
            ActiveFlow fresh;
            fresh.rec.key = key;
            fresh.rec.forward_is_lo = dir == Direction::forward;
            fresh.rec.first_ts = pkt.ts;
            fresh.rec.last_ts = pkt.ts;
            it = active_flows_.emplace(key, std::move(fresh)).first;
        }

        ActiveFlow &flow = it->second;
        FlowRecord &rec = flow.rec;
        const bool is_fwd = (dir == Direction::forward) == rec.forward_is_lo;
        if (is_fwd) {
            ++rec.fwd_packets;
            rec.fwd_bytes += pkt.length;
            rec.tcp_flags_fwd |= pkt.tcp_flags;
        } else {
            ++rec.bwd_packets;
            rec.bwd_bytes += pkt.length;
            rec.tcp_flags_bwd |= pkt.tcp_flags;
        }
        rec.tos_or |= pkt.tos;
        rec.first_ts = std::min(rec.first_ts, pkt.ts);
        rec.last_ts = std::max(rec.last_ts, pkt.ts);
        ++out_.accepted;
        if (keep_packets_) {
            flow.packets.push_back(pkt);
        }

        if (pkt.proto == Protocol::tcp) {
            const bool closing = (pkt.tcp_flags & (tcp_flag::fin | tcp_flag::rst)) != 0;
            flow.syn_seen |= (pkt.tcp_flags & tcp_flag::syn) != 0;
            flow.fin_seen |= (pkt.tcp_flags & tcp_flag::fin) != 0;
            rec.complete = flow.syn_seen && flow.fin_seen;
            if (closing) {
                (is_fwd ? flow.close_fwd : flow.close_bwd) = true;
            }
            if (flow.close_fwd && flow.close_bwd) {
                emit(std::move(flow));
                active_flows_.erase(it);
            }
        }
    }

    void finish() {
        for (auto &[key, flow] : active_flows_) {
            emit(std::move(flow));
        }
        active_flows_.clear();

        std::vector<std::size_t> order(out_.flows.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const FlowRecord &x = out_.flows[a];
            const FlowRecord &y = out_.flows[b];
            return std::tie(x.first_ts, x.key) < std::tie(y.first_ts, y.key);
        });
        std::vector<FlowRecord> flows;
        std::vector<std::vector<PacketRecord>> packets;
        flows.reserve(order.size());
        for (std::size_t i : order) {
            flows.push_back(out_.flows[i]);
            if (keep_packets_) {
                packets.push_back(std::move(out_.flow_packets[i]));
            }
        }
        out_.flows = std::move(flows);
        out_.flow_packets = std::move(packets);
    }

private:
    // A flow idle longer than timeout + tolerance can never absorb another
    // accepted packet, so closing it early gives the same result as lazy
    // closing on the next packet.
    void sweep() {
        for (auto it = active_flows_.begin(); it != active_flows_.end();) {
            const FlowRecord &rec = it->second.rec;
            if (clock_ - rec.last_ts > inactive_ + tolerance_ || clock_ - rec.first_ts > active_ + tolerance_) {
                emit(std::move(it->second));
                it = active_flows_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void emit(ActiveFlow &&flow) {
        out_.flows.push_back(flow.rec);
        if (keep_packets_) {
            out_.flow_packets.push_back(std::move(flow.packets));
        }
    }

    Micros inactive_;
    Micros active_;
    Micros tolerance_;
    bool keep_packets_;
    AggregateResult &out_;
    std::unordered_map<FlowKey, ActiveFlow, FlowKeyHash> active_flows_;
    Micros clock_ = std::numeric_limits<Micros>::min();
    Micros last_sweep_ = 0;
    bool has_clock_ = false;
};

} // namespace

AggregateResult aggregate(std::span<const PacketRecord> packets, const AggregateOptions &opts) {
    if (opts.inactive_timeout_s <= 0 || opts.active_timeout_s <= 0 || opts.reorder_tolerance_s < 0) {
        throw ContractViolation{"flow timeouts must be positive"};
    }
    AggregateResult result;
    Aggregator agg{opts, result};
    for (const PacketRecord &pkt : packets) {
        agg.push(pkt);
    }
    agg.finish();
    return result;
}

} // namespace nfi
