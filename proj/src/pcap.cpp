#include "nfi/pcap.hpp"

#include "nfi/bytes.hpp"
#include "nfi/error.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <optional>

namespace nfi {

namespace {

constexpr std::size_t global_header_len = 24;
constexpr std::size_t record_header_len = 16;
constexpr std::size_t ethernet_header_len = 14;
constexpr std::uint16_t ethertype_ipv4 = 0x0800;

std::string hex32(std::uint32_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s = "0x";
    for (int shift = 28; shift >= 0; shift -= 4) {
        s.push_back(digits[(v >> shift) & 0xf]);
    }
    return s;
}

// Returns nullopt for frames that are not IPv4 TCP/UDP (or are too short to
// carry the transport ports).
std::optional<PacketRecord> parse_frame(std::span<const std::uint8_t> frame, Micros ts) {
    if (frame.size() < ethernet_header_len || bytes::load_be16(frame, 12) != ethertype_ipv4) {
        return std::nullopt;
    }
    const auto ip = frame.subspan(ethernet_header_len);
    if (ip.size() < 20 || (ip[0] >> 4) != 4) {
        return std::nullopt;
    }
    const std::size_t ihl = std::size_t{ip[0] & 0x0fu} * 4;
    if (ihl < 20 || ip.size() < ihl) {
        return std::nullopt;
    }
    if ((bytes::load_be16(ip, 6) & 0x1fff) != 0) {
        return std::nullopt; // non-initial fragment carries no ports
    }
    const std::uint8_t proto = ip[9];
    if (proto != static_cast<std::uint8_t>(Protocol::tcp) && proto != static_cast<std::uint8_t>(Protocol::udp)) {
        return std::nullopt;
    }
    const std::uint16_t total_len = bytes::load_be16(ip, 2);
    if (total_len < 20) {
        return std::nullopt;
    }
    const auto l4 = ip.subspan(ihl);

    PacketRecord pkt;
    pkt.ts = ts;
    pkt.tos = ip[1];
    pkt.length = total_len;
    pkt.src_ip = bytes::load_be32(ip, 12);
    pkt.dst_ip = bytes::load_be32(ip, 16);
    pkt.proto = static_cast<Protocol>(proto);
    if (pkt.proto == Protocol::tcp) {
        if (l4.size() < 14) {
            return std::nullopt;
        }
        pkt.tcp_flags = l4[13];
    } else if (l4.size() < 4) {
        return std::nullopt;
    }
    pkt.src_port = bytes::load_be16(l4, 0);
    pkt.dst_port = bytes::load_be16(l4, 2);
    return pkt;
}

std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < header.size(); i += 2) {
        sum += bytes::load_be16(header, i);
    }
    while (sum >> 16) {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    return static_cast<std::uint16_t>(~sum);
}

} // namespace

PcapReadResult decode_pcap(std::span<const std::uint8_t> data) {
    if (data.size() < global_header_len) {
        throw DecodeError{"truncated pcap global header", 0};
    }
    const std::uint32_t magic = bytes::load_le32(data, 0);
    bool little = true;
    bool nanos = false;
    switch (magic) {
    case pcap_magic_usec: break;
    case pcap_magic_nsec: nanos = true; break;
    case 0xd4c3b2a1: little = false; break;
    case 0x4d3cb2a1: little = false; nanos = true; break;
    default: throw FormatError{"not a pcap file (magic " + hex32(magic) + ")"};
    }
    auto u32 = [&](std::size_t at) { return little ? bytes::load_le32(data, at) : bytes::load_be32(data, at); };

    const std::uint32_t linktype = u32(20) & 0x0fffffff;
    if (linktype != pcap_linktype_ethernet) {
        throw FormatError{"unsupported pcap link type " + std::to_string(linktype)};
    }

    PcapReadResult result;
    std::size_t offset = global_header_len;
    while (offset < data.size()) {
        if (data.size() - offset < record_header_len) {
            throw DecodeError{"truncated pcap packet header", offset};
        }
        const std::uint32_t ts_sec = u32(offset);
        const std::uint32_t ts_frac = u32(offset + 4);
        const std::uint32_t incl_len = u32(offset + 8);
        const std::size_t body = offset + record_header_len;
        if (data.size() - body < incl_len) {
            throw DecodeError{"truncated pcap packet data", body};
        }
        const Micros ts = static_cast<Micros>(ts_sec) * micros_per_second +
                          (nanos ? static_cast<Micros>(ts_frac / 1000) : static_cast<Micros>(ts_frac));
        ++result.frames;
        if (auto pkt = parse_frame(data.subspan(body, incl_len), ts)) {
            result.packets.push_back(*pkt);
        } else {
            ++result.skipped;
        }
        offset = body + incl_len;
    }
    return result;
}

PcapReadResult read_pcap(const std::filesystem::path &path) {
    const auto data = read_file_bytes(path);
    try {
        return decode_pcap(data);
    } catch (const DecodeError &e) {
        throw e.in_file(path.string());
    } catch (const FormatError &e) {
        throw FormatError{path.string() + ": " + e.what()};
    }
}

std::vector<std::uint8_t> encode_pcap(std::span<const PacketRecord> packets, ByteOrder order) {
    std::vector<std::uint8_t> out;
    const bool little = order == ByteOrder::little;
    auto put16 = [&](std::uint16_t v) { little ? bytes::put_le16(out, v) : bytes::put_be16(out, v); };
    auto put32 = [&](std::uint32_t v) { little ? bytes::put_le32(out, v) : bytes::put_be32(out, v); };

    put32(pcap_magic_usec);
    put16(2);
    put16(4);
    put32(0);     // thiszone
    put32(0);     // sigfigs
    put32(65535); // snaplen
    put32(pcap_linktype_ethernet);

    std::vector<std::uint8_t> frame;
    for (const PacketRecord &pkt : packets) {
        if (pkt.length > 0xffff || pkt.length < 20) {
            throw ContractViolation{"packet length out of IPv4 range"};
        }
        frame.clear();
        // Ethernet: locally administered MACs, IPv4 ethertype
        for (std::uint8_t b : {0x02, 0x00, 0x00, 0x00, 0x00, 0x02, 0x02, 0x00, 0x00, 0x00, 0x00, 0x01}) {
            frame.push_back(b);
        }
        bytes::put_be16(frame, ethertype_ipv4);

        const std::size_t ip_at = frame.size();
        frame.push_back(0x45);
        frame.push_back(pkt.tos);
        bytes::put_be16(frame, static_cast<std::uint16_t>(pkt.length));
        bytes::put_be16(frame, 0);      // identification
        bytes::put_be16(frame, 0x4000); // DF
        frame.push_back(64);
        frame.push_back(static_cast<std::uint8_t>(pkt.proto));
        bytes::put_be16(frame, 0);
        bytes::put_be32(frame, pkt.src_ip);
        bytes::put_be32(frame, pkt.dst_ip);
        const std::uint16_t csum = ipv4_checksum(std::span{frame}.subspan(ip_at, 20));
        frame[ip_at + 10] = static_cast<std::uint8_t>(csum >> 8);
        frame[ip_at + 11] = static_cast<std::uint8_t>(csum);

        bytes::put_be16(frame, pkt.src_port);
        bytes::put_be16(frame, pkt.dst_port);
        if (pkt.proto == Protocol::tcp) {
            bytes::put_be32(frame, 0); // seq
            bytes::put_be32(frame, 0); // ack
            frame.push_back(0x50);     // data offset 5 words
            frame.push_back(pkt.tcp_flags);
            bytes::put_be16(frame, 65535);
            bytes::put_be16(frame, 0);
            bytes::put_be16(frame, 0);
        } else {
            bytes::put_be16(frame, static_cast<std::uint16_t>(pkt.length >= 28 ? pkt.length - 20 : 8));
            bytes::put_be16(frame, 0);
        }

        const auto secs = static_cast<std::uint32_t>(pkt.ts / micros_per_second);
        const auto usecs = static_cast<std::uint32_t>(pkt.ts % micros_per_second);
        const auto caplen = static_cast<std::uint32_t>(frame.size());
        put32(secs);
        put32(usecs);
        put32(caplen);
        put32(std::max<std::uint32_t>(caplen, static_cast<std::uint32_t>(ethernet_header_len + pkt.length)));
        out.insert(out.end(), frame.begin(), frame.end());
    }
    return out;
}

void write_pcap(const std::filesystem::path &path, std::span<const PacketRecord> packets, ByteOrder order) {
    write_file_bytes(path, encode_pcap(packets, order));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw IoError{"cannot open " + path.string()};
    }
    return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> data) {
    std::ofstream out{path, std::ios::binary | std::ios::trunc};
    if (!out) {
        throw IoError{"cannot write " + path.string()};
    }
    out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw IoError{"write failed for " + path.string()};
    }
}

} // namespace nfi
