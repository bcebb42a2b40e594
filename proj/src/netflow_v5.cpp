#include "nfi/netflow_v5.hpp"

#include "nfi/bytes.hpp"
#include "nfi/pcap.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace nfi::netflow_v5 {

std::vector<std::uint8_t> serialize(const Datagram &dgram) {
    std::vector<std::uint8_t> out;
    out.reserve(header_size + record_size * dgram.records.size());
    const Header &h = dgram.header;
    bytes::put_be16(out, h.version);
    bytes::put_be16(out, h.count);
    bytes::put_be32(out, h.sys_uptime);
    bytes::put_be32(out, h.unix_secs);
    bytes::put_be32(out, h.unix_nsecs);
    bytes::put_be32(out, h.flow_sequence);
    out.push_back(h.engine_type);
    out.push_back(h.engine_id);
    bytes::put_be16(out, h.sampling_interval);
    for (const Record &r : dgram.records) {
        bytes::put_be32(out, r.srcaddr);
        bytes::put_be32(out, r.dstaddr);
        bytes::put_be32(out, r.nexthop);
        bytes::put_be16(out, r.input);
        bytes::put_be16(out, r.output);
        bytes::put_be32(out, r.d_pkts);
        bytes::put_be32(out, r.d_octets);
        bytes::put_be32(out, r.first);
        bytes::put_be32(out, r.last);
        bytes::put_be16(out, r.srcport);
        bytes::put_be16(out, r.dstport);
        out.push_back(r.pad1);
        out.push_back(r.tcp_flags);
        out.push_back(r.prot);
        out.push_back(r.tos);
        bytes::put_be16(out, r.src_as);
        bytes::put_be16(out, r.dst_as);
        out.push_back(r.src_mask);
        out.push_back(r.dst_mask);
        bytes::put_be16(out, r.pad2);
    }
    return out;
}

Datagram parse(std::span<const std::uint8_t> b) {
    if (b.size() < header_size) {
        throw FormatError{"malformed NetFlow v5 datagram: " + std::to_string(b.size()) + " bytes is shorter than header"};
    }
    Datagram d;
    Header &h = d.header;
    h.version = bytes::load_be16(b, 0);
    if (h.version != 5) {
        throw FormatError{"unsupported NetFlow version " + std::to_string(h.version)};
    }
    h.count = bytes::load_be16(b, 2);
    if (h.count < 1 || h.count > max_records || b.size() != header_size + record_size * h.count) {
        throw FormatError{"malformed NetFlow v5 datagram: count " + std::to_string(h.count) + " does not match length " +
                          std::to_string(b.size())};
    }
    h.sys_uptime = bytes::load_be32(b, 4);
    h.unix_secs = bytes::load_be32(b, 8);
    h.unix_nsecs = bytes::load_be32(b, 12);
    h.flow_sequence = bytes::load_be32(b, 16);
    h.engine_type = b[20];
    h.engine_id = b[21];
    h.sampling_interval = bytes::load_be16(b, 22);

    d.records.reserve(h.count);
    for (std::size_t i = 0; i < h.count; ++i) {
        const std::size_t at = header_size + i * record_size;
        Record r;
        r.srcaddr = bytes::load_be32(b, at);
        r.dstaddr = bytes::load_be32(b, at + 4);
        r.nexthop = bytes::load_be32(b, at + 8);
        r.input = bytes::load_be16(b, at + 12);
        r.output = bytes::load_be16(b, at + 14);
        r.d_pkts = bytes::load_be32(b, at + 16);
        r.d_octets = bytes::load_be32(b, at + 20);
        r.first = bytes::load_be32(b, at + 24);
        r.last = bytes::load_be32(b, at + 28);
        r.srcport = bytes::load_be16(b, at + 32);
        r.dstport = bytes::load_be16(b, at + 34);
        r.pad1 = b[at + 36];
        r.tcp_flags = b[at + 37];
        r.prot = b[at + 38];
        r.tos = b[at + 39];
        r.src_as = bytes::load_be16(b, at + 40);
        r.dst_as = bytes::load_be16(b, at + 42);
        r.src_mask = b[at + 44];
        r.dst_mask = b[at + 45];
        r.pad2 = bytes::load_be16(b, at + 46);
        d.records.push_back(r);
    }
    return d;
}

std::vector<FlowRecord> decode(std::span<const std::uint8_t> bytes) {
    const Datagram d = parse(bytes);
    const Micros export_us = static_cast<Micros>(d.header.unix_secs) * micros_per_second + d.header.unix_nsecs / 1000;
    const Micros boot_us = export_us - static_cast<Micros>(d.header.sys_uptime) * 1000;

    std::vector<FlowRecord> flows;
    // key -> indices of flows still waiting for a reciprocal record
    std::unordered_map<FlowKey, std::vector<std::size_t>, FlowKeyHash> open;

    for (const Record &r : d.records) {
        if (r.prot != static_cast<std::uint8_t>(Protocol::tcp) && r.prot != static_cast<std::uint8_t>(Protocol::udp)) {
            continue; // only TCP/UDP flows are modelled
        }
        PacketRecord probe;
        probe.src_ip = r.srcaddr;
        probe.dst_ip = r.dstaddr;
        probe.src_port = r.srcport;
        probe.dst_port = r.dstport;
        probe.proto = static_cast<Protocol>(r.prot);
        const auto [key, dir] = canonical_key(probe);
        const bool from_lo = dir == Direction::forward;
        const Micros first = boot_us + static_cast<Micros>(r.first) * 1000;
        const Micros last = std::max(first, boot_us + static_cast<Micros>(r.last) * 1000);

        auto &candidates = open[key];
        auto match = std::find_if(candidates.begin(), candidates.end(),
                                  [&](std::size_t i) { return flows[i].forward_is_lo != from_lo; });
        if (match != candidates.end()) {
            FlowRecord &f = flows[*match];
            candidates.erase(match);
            if (first < f.first_ts) {
                // the reciprocal record started earlier: it is the forward side
                std::swap(f.fwd_packets, f.bwd_packets);
                std::swap(f.fwd_bytes, f.bwd_bytes);
                std::swap(f.tcp_flags_fwd, f.tcp_flags_bwd);
                f.forward_is_lo = from_lo;
                f.fwd_packets = r.d_pkts;
                f.fwd_bytes = r.d_octets;
                f.tcp_flags_fwd = r.tcp_flags;
            } else {
                f.bwd_packets = r.d_pkts;
                f.bwd_bytes = r.d_octets;
                f.tcp_flags_bwd = r.tcp_flags;
            }
            f.tos_or |= r.tos;
            f.first_ts = std::min(f.first_ts, first);
            f.last_ts = std::max(f.last_ts, last);
            const std::uint8_t all = f.tcp_flags_fwd | f.tcp_flags_bwd;
            f.complete = key.proto == Protocol::tcp && (all & tcp_flag::syn) && (all & tcp_flag::fin);
            continue;
        }

        FlowRecord f;
        f.key = key;
        f.forward_is_lo = from_lo;
        f.fwd_packets = r.d_pkts;
        f.fwd_bytes = r.d_octets;
        f.tcp_flags_fwd = r.tcp_flags;
        f.tos_or = r.tos;
        f.first_ts = first;
        f.last_ts = last;
        f.complete = key.proto == Protocol::tcp && (r.tcp_flags & tcp_flag::syn) && (r.tcp_flags & tcp_flag::fin);
        candidates.push_back(flows.size());
        flows.push_back(f);
    }
    return flows;
}

namespace {

std::uint32_t checked_u32(std::uint64_t v, const char *what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw EncodeError{std::string{what} + " value " + std::to_string(v) + " exceeds 32 bits"};
    }
    return static_cast<std::uint32_t>(v);
}

struct PendingRecord {
    Record rec;
    Micros first_us;
    Micros last_us;
};

std::vector<std::uint8_t> finish_datagram(std::vector<PendingRecord> &pending, std::uint32_t sequence,
                                          std::uint16_t sampling_interval) {
    Micros min_first = pending.front().first_us;
    Micros export_us = pending.front().last_us;
    for (const auto &p : pending) {
        min_first = std::min(min_first, p.first_us);
        export_us = std::max(export_us, p.last_us);
    }
    if (export_us < 0) {
        throw EncodeError{"timestamps before the Unix epoch"};
    }
    const Micros uptime_ms = (export_us - min_first + 999) / 1000;
    const std::uint32_t uptime = checked_u32(static_cast<std::uint64_t>(uptime_ms), "sys_uptime");
    const Micros boot_us = export_us - uptime_ms * 1000;

    Datagram d;
    d.header.count = static_cast<std::uint16_t>(pending.size());
    d.header.sys_uptime = uptime;
    d.header.unix_secs = checked_u32(static_cast<std::uint64_t>(export_us / micros_per_second), "unix_secs");
    d.header.unix_nsecs = static_cast<std::uint32_t>(export_us % micros_per_second) * 1000;
    d.header.flow_sequence = sequence;
    d.header.sampling_interval = sampling_interval;
    for (auto &p : pending) {
        p.rec.first = static_cast<std::uint32_t>((p.first_us - boot_us) / 1000);
        p.rec.last = static_cast<std::uint32_t>((p.last_us - boot_us) / 1000);
        d.records.push_back(p.rec);
    }
    pending.clear();
    return serialize(d);
}

} // namespace

std::vector<std::vector<std::uint8_t>> encode(std::span<const FlowRecord> flows, const EncodeOptions &opts) {
    std::vector<std::vector<std::uint8_t>> out;
    std::vector<PendingRecord> pending;
    std::uint32_t sequence = opts.seq_start;
    std::uint32_t datagram_sequence = sequence;

    for (const FlowRecord &f : flows) {
        const std::size_t needed = f.bwd_packets > 0 ? 2 : 1;
        if (pending.size() + needed > max_records) {
            out.push_back(finish_datagram(pending, datagram_sequence, opts.sampling_interval));
            datagram_sequence = sequence;
        }
        auto make = [&](bool forward) {
            PendingRecord p;
            Record &r = p.rec;
            r.srcaddr = forward ? f.fwd_src_ip() : f.fwd_dst_ip();
            r.dstaddr = forward ? f.fwd_dst_ip() : f.fwd_src_ip();
            r.srcport = forward ? f.fwd_src_port() : f.fwd_dst_port();
            r.dstport = forward ? f.fwd_dst_port() : f.fwd_src_port();
            r.d_pkts = checked_u32(forward ? f.fwd_packets : f.bwd_packets, "dPkts");
            r.d_octets = checked_u32(forward ? f.fwd_bytes : f.bwd_bytes, "dOctets");
            r.tcp_flags = forward ? f.tcp_flags_fwd : f.tcp_flags_bwd;
            r.prot = static_cast<std::uint8_t>(f.key.proto);
            r.tos = f.tos_or;
            p.first_us = f.first_ts;
            p.last_us = f.last_ts;
            return p;
        };
        pending.push_back(make(true));
        if (needed == 2) {
            pending.push_back(make(false));
        }
        sequence += static_cast<std::uint32_t>(needed);
    }
    if (!pending.empty()) {
        out.push_back(finish_datagram(pending, datagram_sequence, opts.sampling_interval));
    }
    return out;
}

std::vector<FlowRecord> decode_stream(std::span<const std::uint8_t> b) {
    std::vector<FlowRecord> flows;
    std::size_t offset = 0;
    while (offset < b.size()) {
        if (b.size() - offset < header_size) {
            throw DecodeError{"truncated NetFlow v5 header", offset};
        }
        const std::uint16_t count = bytes::load_be16(b, offset + 2);
        const std::size_t len = header_size + record_size * count;
        if (b.size() - offset < len) {
            throw DecodeError{"truncated NetFlow v5 datagram", offset};
        }
        try {
            auto part = decode(b.subspan(offset, len));
            flows.insert(flows.end(), part.begin(), part.end());
        } catch (const DecodeError &) {
            throw;
        } catch (const FormatError &e) {
            throw DecodeError{e.what(), offset};
        }
        offset += len;
    }
    return flows;
}

std::vector<FlowRecord> read_file(const std::filesystem::path &path) {
    const auto data = read_file_bytes(path);
    try {
        return decode_stream(data);
    } catch (const DecodeError &e) {
        throw e.in_file(path.string());
    }
}

void write_file(const std::filesystem::path &path, const std::vector<std::vector<std::uint8_t>> &datagrams) {
    std::vector<std::uint8_t> all;
    for (const auto &d : datagrams) {
        all.insert(all.end(), d.begin(), d.end());
    }
    write_file_bytes(path, all);
}

} // namespace nfi::netflow_v5
