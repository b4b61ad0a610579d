#pragma once
// Link/switch parameter sets for the packet fabric, the two built-in
// configurations, and the serialization/packetization arithmetic shared by
// the simulator and its tooling.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace veft {

enum class SwitchArch : int { IQ = 0, CIOQ };
enum class FlowControl : int { PFC = 0, Credit };
enum class PacketSizing : int { Variable = 0, FixedPadded };

const char* to_string(SwitchArch a);
const char* to_string(FlowControl f);
const char* to_string(PacketSizing p);

struct NetworkConfig {
    SwitchArch arch = SwitchArch::CIOQ;
    FlowControl flow_control = FlowControl::PFC;
    std::uint64_t input_buffer_bytes = 131072;
    std::uint64_t output_buffer_bytes = 49152;  // CIOQ only; ignored for IQ
    std::uint64_t mtu_bytes = 9600;
    PacketSizing sizing = PacketSizing::Variable;
    std::uint32_t link_rate_gbps = 400;
    std::uint32_t cable_m = 3;
    std::uint32_t prop_ns_per_m = 5;
    std::uint32_t header_bytes = 0;
    std::uint32_t virtual_channels = 1;

    std::int64_t propagation_ns() const {
        return static_cast<std::int64_t>(cable_m) * prop_ns_per_m;
    }
    std::uint64_t packet_wire_bytes(std::uint64_t payload) const {
        return (sizing == PacketSizing::Variable ? payload : mtu_bytes) + header_bytes;
    }
    // Throws std::invalid_argument when a field is unusable.
    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

// CIOQ/PFC, 9.6 KB variable packets at 400 Gbps.
NetworkConfig config1();
// IQ/credit, 4 KB padded packets at 100 Gbps.
NetworkConfig config2();
// Accepts "1", "2", "config1", "config2" (case-insensitive).
std::optional<NetworkConfig> preset_by_name(std::string_view name);

// Time to clock wire_bytes onto a link, rounded half-up to whole ns.
std::int64_t serialization_ns(std::uint64_t wire_bytes, std::uint32_t link_rate_gbps);

struct PacketSpec {
    std::uint64_t payload_bytes = 0;
    std::uint64_t wire_bytes = 0;
    bool operator==(const PacketSpec&) const = default;
};

// MTU-sized payload slices (last one short when not padding); a zero-byte
// message still produces one packet.
std::vector<PacketSpec> packetize(const NetworkConfig& cfg, std::uint64_t msg_bytes);
std::uint64_t packet_count(const NetworkConfig& cfg, std::uint64_t msg_bytes);

}  // namespace veft
