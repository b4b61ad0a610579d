#include "veft/network_config.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace veft {

const char* to_string(SwitchArch a) { return a == SwitchArch::IQ ? "iq" : "cioq"; }
const char* to_string(FlowControl f) { return f == FlowControl::PFC ? "pfc" : "credit"; }
const char* to_string(PacketSizing p) {
    return p == PacketSizing::Variable ? "variable" : "fixed";
}

void NetworkConfig::validate() const {
    if (virtual_channels != 1)
        throw std::invalid_argument("only single-VC switching is supported");
    if (link_rate_gbps == 0) throw std::invalid_argument("link rate must be positive");
    if (mtu_bytes == 0) throw std::invalid_argument("MTU must be positive");
    if (input_buffer_bytes < mtu_bytes + header_bytes)
        throw std::invalid_argument("input buffer smaller than one packet");
    if (arch == SwitchArch::CIOQ && output_buffer_bytes < mtu_bytes + header_bytes)
        throw std::invalid_argument("output buffer smaller than one packet");
    if (flow_control == FlowControl::PFC && input_buffer_bytes < 4 * mtu_bytes)
        throw std::invalid_argument("PFC resume threshold exceeds the input buffer");
}

NetworkConfig config1() {
    NetworkConfig c;
    c.arch = SwitchArch::CIOQ;
    c.flow_control = FlowControl::PFC;
    c.input_buffer_bytes = 131072;
    c.output_buffer_bytes = 49152;
    c.mtu_bytes = 9600;
    c.sizing = PacketSizing::Variable;
    c.link_rate_gbps = 400;
    return c;
}

NetworkConfig config2() {
    NetworkConfig c;
    c.arch = SwitchArch::IQ;
    c.flow_control = FlowControl::Credit;
    c.input_buffer_bytes = 131072;
    c.output_buffer_bytes = 0;
    c.mtu_bytes = 4096;
    c.sizing = PacketSizing::FixedPadded;
    c.link_rate_gbps = 100;
    return c;
}

std::optional<NetworkConfig> preset_by_name(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "1" || s == "config1") return config1();
    if (s == "2" || s == "config2") return config2();
    return std::nullopt;
}

std::int64_t serialization_ns(std::uint64_t wire_bytes, std::uint32_t link_rate_gbps) {
    // round-half-up of 8*bytes/rate: floor((16*bytes + rate) / (2*rate))
    const std::uint64_t r = link_rate_gbps;
    return static_cast<std::int64_t>((16 * wire_bytes + r) / (2 * r));
}

std::vector<PacketSpec> packetize(const NetworkConfig& cfg, std::uint64_t msg_bytes) {
    const std::uint64_t n = packet_count(cfg, msg_bytes);
    std::vector<PacketSpec> out;
    out.reserve(static_cast<std::size_t>(n));
    std::uint64_t left = msg_bytes;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t payload = std::min(left, cfg.mtu_bytes);
        out.push_back({payload, cfg.packet_wire_bytes(payload)});
        left -= payload;
    }
    return out;
}

std::uint64_t packet_count(const NetworkConfig& cfg, std::uint64_t msg_bytes) {
    if (msg_bytes == 0) return 1;
    return (msg_bytes + cfg.mtu_bytes - 1) / cfg.mtu_bytes;
}

}  // namespace veft
