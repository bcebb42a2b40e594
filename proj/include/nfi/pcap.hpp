#ifndef NFI_PCAP_HPP
#define NFI_PCAP_HPP

#include "nfi/flow.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nfi {

inline constexpr std::uint32_t pcap_magic_usec = 0xa1b2c3d4;
inline constexpr std::uint32_t pcap_magic_nsec = 0xa1b23c4d;
inline constexpr std::uint32_t pcap_linktype_ethernet = 1;

struct PcapReadResult {
    std::vector<PacketRecord> packets;
    std::size_t frames = 0;  ///< total per-packet records in the file
    std::size_t skipped = 0; ///< non-IPv4, non-TCP/UDP, fragments, short captures
};

/// Decodes a classic pcap capture (either byte order, usec or nsec
/// timestamps, Ethernet link type). Invariant: packets + skipped == frames.
PcapReadResult decode_pcap(std::span<const std::uint8_t> bytes);
PcapReadResult read_pcap(const std::filesystem::path &path);

enum class ByteOrder { little, big };

/// Serializes packets as Ethernet/IPv4/TCP|UDP frames. Only headers are
/// captured (caplen < orig_len); the IP total length carries the size.
std::vector<std::uint8_t> encode_pcap(std::span<const PacketRecord> packets, ByteOrder order = ByteOrder::little);
void write_pcap(const std::filesystem::path &path, std::span<const PacketRecord> packets,
                ByteOrder order = ByteOrder::little);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

} // namespace nfi

#endif // NFI_PCAP_HPP
