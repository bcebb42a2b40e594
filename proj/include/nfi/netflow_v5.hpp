#ifndef NFI_NETFLOW_V5_HPP
#define NFI_NETFLOW_V5_HPP

#include "nfi/error.hpp"
#include "nfi/flow.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nfi::netflow_v5 {

inline constexpr std::size_t header_size = 24;
inline constexpr std::size_t record_size = 48;
inline constexpr std::size_t max_records = 30;

struct Header {
    std::uint16_t version = 5;
    std::uint16_t count = 0;
    std::uint32_t sys_uptime = 0; ///< ms since exporter boot
    std::uint32_t unix_secs = 0;
    std::uint32_t unix_nsecs = 0;
    std::uint32_t flow_sequence = 0;
    std::uint8_t engine_type = 0;
    std::uint8_t engine_id = 0;
    std::uint16_t sampling_interval = 0;

    bool operator==(const Header &) const = default;
};

struct Record {
    std::uint32_t srcaddr = 0;
    std::uint32_t dstaddr = 0;
    std::uint32_t nexthop = 0;
    std::uint16_t input = 0;
    std::uint16_t output = 0;
    std::uint32_t d_pkts = 0;
    std::uint32_t d_octets = 0;
    std::uint32_t first = 0; ///< sys_uptime ms at first packet
    std::uint32_t last = 0;
    std::uint16_t srcport = 0;
    std::uint16_t dstport = 0;
    std::uint8_t pad1 = 0;
    std::uint8_t tcp_flags = 0;
    std::uint8_t prot = 0;
    std::uint8_t tos = 0;
    std::uint16_t src_as = 0;
    std::uint16_t dst_as = 0;
    std::uint8_t src_mask = 0;
    std::uint8_t dst_mask = 0;
    std::uint16_t pad2 = 0;

    bool operator==(const Record &) const = default;
};

struct Datagram {
    Header header;
    std::vector<Record> records;
};

/// Raised when a flow cannot be represented in v5 (32-bit counter overflow,
/// uptime window exceeded).
class EncodeError : public FormatError {
public:
    explicit EncodeError(const std::string &what) : FormatError{"NetFlow v5 encoding error: " + what} {}
};

/// Wire-level layout, big-endian. `parse` validates version and length.
std::vector<std::uint8_t> serialize(const Datagram &dgram);
Datagram parse(std::span<const std::uint8_t> bytes);

/// Maps records onto FlowRecords, anchoring uptime timestamps to the header's
/// unix time. Reciprocal records within the datagram merge into one
/// bidirectional flow.
std::vector<FlowRecord> decode(std::span<const std::uint8_t> bytes);

struct EncodeOptions {
    std::uint32_t seq_start = 0;
    std::uint16_t sampling_interval = 0;
};

/// Packs flows into datagrams of at most 30 records. A bidirectional flow
/// emits a forward and a backward record, kept in the same datagram.
std::vector<std::vector<std::uint8_t>> encode(std::span<const FlowRecord> flows, const EncodeOptions &opts = {});

/// Decodes a file holding back-to-back datagrams.
std::vector<FlowRecord> decode_stream(std::span<const std::uint8_t> bytes);
std::vector<FlowRecord> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const std::vector<std::vector<std::uint8_t>> &datagrams);

} // namespace nfi::netflow_v5

#endif // NFI_NETFLOW_V5_HPP
