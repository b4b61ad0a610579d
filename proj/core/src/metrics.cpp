#include "veft/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace veft {

FctSummary fct_summary(std::span<const FctRecord> records) {
    FctSummary s;
    s.count = static_cast<std::int64_t>(records.size());
    if (records.empty()) return s;
    unsigned __int128 sum = 0;
    for (const FctRecord& r : records) {
        const std::int64_t fct = r.fct_ns();
        if (fct < 0) throw std::invalid_argument("negative flow completion time");
        sum += static_cast<std::uint64_t>(fct);
        s.max_ns = std::max(s.max_ns, fct);
    }
    const auto n = static_cast<unsigned __int128>(s.count);
    s.mean_ns = static_cast<std::int64_t>((2 * sum + n) / (2 * n));  // half-up
    return s;
}

std::vector<CdfPoint> fct_cdf(std::span<const FctRecord> records, std::int32_t num_points) {
    if (num_points < 2) throw std::invalid_argument("CDF needs at least 2 sample points");
    std::vector<CdfPoint> out;
    if (records.empty()) return out;
    std::vector<std::int64_t> v;
    v.reserve(records.size());
    for (const FctRecord& r : records) v.push_back(r.fct_ns());
    std::sort(v.begin(), v.end());
    const std::int64_t n = static_cast<std::int64_t>(v.size());
    out.reserve(static_cast<std::size_t>(num_points));
    for (std::int32_t k = 1; k <= num_points; ++k) {
        // value at quantile k/num_points: element ceil(q*n) - 1 of the sorted set
        const std::int64_t idx = (k * n + num_points - 1) / num_points - 1;
        out.push_back({v[static_cast<std::size_t>(idx)],
                       (static_cast<std::int64_t>(k) * 1'000'000) / num_points});
    }
    return out;
}

double speedup(std::int64_t t_baseline_ns, std::int64_t t_improved_ns) {
    if (t_baseline_ns <= 0 || t_improved_ns <= 0)
        throw std::invalid_argument("speedup needs positive durations");
    return static_cast<double>(t_baseline_ns) / static_cast<double>(t_improved_ns);
}

OccupancyTracker::OccupancyTracker(std::int64_t window_ns) : window_ns_(window_ns) {
    if (window_ns < 1) throw std::invalid_argument("window must be positive");
    maxima_.push_back(0);
}

void OccupancyTracker::record(std::int64_t t, std::uint64_t occupancy_bytes) {
    if (t < last_t_)
        throw std::logic_error("occupancy sample at " + std::to_string(t) +
                               " behind previous sample at " + std::to_string(last_t_));
    last_t_ = t;
    const std::int64_t w = t / window_ns_;
    while (cur_window_ < w) {  // untouched windows keep the standing occupancy
        ++cur_window_;
        maxima_.push_back(standing_);
    }
    maxima_.back() = std::max(maxima_.back(), occupancy_bytes);
    standing_ = occupancy_bytes;
}

std::vector<std::uint64_t> OccupancyTracker::finish(std::int64_t end_time) const {
    if (end_time < last_t_)
        throw std::logic_error("occupancy window end precedes the last sample");
    std::vector<std::uint64_t> out = maxima_;
    out.resize(static_cast<std::size_t>(end_time / window_ns_) + 1, standing_);
    return out;
}

std::string occupancy_color(std::uint64_t max_bytes, std::uint64_t capacity_bytes) {
    if (max_bytes == 0) return "#00FF00";
    const std::uint64_t cap = std::max<std::uint64_t>(capacity_bytes, 1);
    const std::uint64_t clamped = std::min(max_bytes, cap);
    const unsigned r = static_cast<unsigned>(255 * clamped / cap);
    const unsigned b = static_cast<unsigned>(255 * (cap - clamped) / cap);
    static const char* hex = "0123456789ABCDEF";
    std::string c = "#000000";
    c[1] = hex[r >> 4];
    c[2] = hex[r & 15];
    c[5] = hex[b >> 4];
    c[6] = hex[b & 15];
    return c;
}

namespace {

struct XY {
    std::int64_t x = 0, y = 0;
};

// cos/sin of 2*pi*k/9 in 1e-4 units; a fixed table keeps the SVG bytes
// identical across platforms (no libm rounding involved).
constexpr std::int64_t kCos9[9] = {10000, 7660, 1736, -5000, -9397, -9397, -5000, 1736, 7660};
constexpr std::int64_t kSin9[9] = {0, 6428, 9848, 8660, 3420, -3420, -8660, -9848, -6428};

struct Layout {
    std::int64_t width = 0, height = 0;
    std::vector<XY> switches;
    std::vector<XY> nodes;
};

Layout layered_layout(const Topology& t) {
    // fat-tree-256: spines on top, leaves mid, nodes fanned out below.
    Layout L;
    L.width = 16 * 90 + 120;
    L.height = 760;
    L.switches.resize(static_cast<std::size_t>(t.num_switches()));
    for (std::int32_t l = 0; l < 16; ++l)
        L.switches[static_cast<std::size_t>(l)] = {90 + l * 90, 420};
    for (std::int32_t s = 0; s < 16; ++s)
        L.switches[static_cast<std::size_t>(16 + s)] = {90 + s * 90, 80};
    L.nodes.resize(static_cast<std::size_t>(t.num_nodes()));
    for (std::int32_t n = 0; n < t.num_nodes(); ++n) {
        const std::int32_t leaf = n / 16, i = n % 16;
        L.nodes[static_cast<std::size_t>(n)] = {90 + leaf * 90 - 38 + (i % 8) * 11,
                                                620 + (i / 8) * 60};
    }
    return L;
}

Layout ring_layout(const Topology& t) {
    // megafly-288: groups on a ring; leaves inward, spines outward, nodes
    // fanned further in along the group axis.
    Layout L;
    L.width = 1600;
    L.height = 1600;
    const std::int64_t cx = 800, cy = 800;
    L.switches.resize(static_cast<std::size_t>(t.num_switches()));
    L.nodes.resize(static_cast<std::size_t>(t.num_nodes()));
    for (std::int32_t g = 0; g < 9; ++g) {
        const std::int64_t ux = kCos9[g], uy = kSin9[g];        // radial unit (1e-4)
        const std::int64_t txv = -kSin9[g], tyv = kCos9[g];     // tangent unit
        for (std::int32_t i = 0; i < 4; ++i) {
            const std::int64_t off = (2 * i - 3) * 28;  // -84, -28, 28, 84
            L.switches[static_cast<std::size_t>(g * 8 + i)] = {
                cx + (ux * 480 + txv * off) / 10000, cy + (uy * 480 + tyv * off) / 10000};
            L.switches[static_cast<std::size_t>(g * 8 + 4 + i)] = {
                cx + (ux * 620 + txv * off) / 10000, cy + (uy * 620 + tyv * off) / 10000};
        }
    }
    for (std::int32_t n = 0; n < t.num_nodes(); ++n) {
        const std::int32_t g = n / 32, l = (n / 8) % 4, i = n % 8;
        const std::int64_t ux = kCos9[g], uy = kSin9[g];
        const std::int64_t txv = -kSin9[g], tyv = kCos9[g];
        const std::int64_t off = (2 * l - 3) * 28 + (2 * i - 7) * 3;
        const std::int64_t rad = 360 - (i % 2) * 26;
        L.nodes[static_cast<std::size_t>(n)] = {cx + (ux * rad + txv * off) / 10000,
                                                cy + (uy * rad + tyv * off) / 10000};
    }
    return L;
}

Layout grid_layout(const Topology& t) {
    Layout L;
    const std::int32_t sw = t.num_switches(), nn = t.num_nodes();
    L.width = std::max(sw, nn) * 110 + 120;
    L.height = 480;
    L.switches.resize(static_cast<std::size_t>(sw));
    L.nodes.resize(static_cast<std::size_t>(nn));
    for (std::int32_t s = 0; s < sw; ++s) L.switches[static_cast<std::size_t>(s)] = {90 + s * 110, 140};
    for (std::int32_t n = 0; n < nn; ++n) L.nodes[static_cast<std::size_t>(n)] = {90 + n * 110, 360};
    return L;
}

XY device_xy(const Layout& L, const PortRef& p) {
    return p.kind == DeviceKind::Node ? L.nodes[static_cast<std::size_t>(p.device)]
                                      : L.switches[static_cast<std::size_t>(p.device)];
}

}  // namespace

std::string render_heatmap(const Topology& topo, std::span<const PortOccupancy> occ,
                           bool normalize_to_peak) {
    Layout L;
    if (topo.name() == "fat-tree-256")
        L = layered_layout(topo);
    else if (topo.name() == "megafly-288")
        L = ring_layout(topo);
    else
        L = grid_layout(topo);

    std::uint64_t peak = 0;
    for (const PortOccupancy& o : occ) peak = std::max(peak, o.max_bytes);

    // Occupancy lookup for the receiving end of each directed link.
    auto find = [&](DeviceKind kind, std::int32_t device, std::int32_t port) -> PortOccupancy {
        for (const PortOccupancy& o : occ)
            if (o.kind == kind && o.device == device && o.port == port) return o;
        return PortOccupancy{kind, device, port, 0, 1};
    };
    auto color = [&](const PortOccupancy& o) {
        return occupancy_color(o.max_bytes, normalize_to_peak ? peak : o.capacity_bytes);
    };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(L.width) +
         "\" height=\"" + std::to_string(L.height) + "\" viewBox=\"0 0 " +
         std::to_string(L.width) + " " + std::to_string(L.height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"#FFFFFF\"/>\n";

    auto half_line = [&](XY a, XY m, const std::string& col) {
        s += "<line x1=\"" + std::to_string(a.x) + "\" y1=\"" + std::to_string(a.y) +
             "\" x2=\"" + std::to_string(m.x) + "\" y2=\"" + std::to_string(m.y) +
             "\" stroke=\"" + col + "\" stroke-width=\"3\"/>\n";
    };
    // Each cable is two half-links, each colored by the input port it feeds.
    auto draw_link = [&](const PortRef& a, const PortRef& b) {
        const XY pa = device_xy(L, a), pb = device_xy(L, b);
        const XY mid{(pa.x + pb.x) / 2, (pa.y + pb.y) / 2};
        half_line(pa, mid, color(find(b.kind, b.device, b.port)));  // a transmits toward b
        half_line(pb, mid, color(find(a.kind, a.device, a.port)));
    };

    for (std::int32_t n = 0; n < topo.num_nodes(); ++n)
        draw_link({DeviceKind::Node, n, 0}, topo.attach(n));
    for (std::int32_t sw = 0; sw < topo.num_switches(); ++sw)
        for (std::int32_t p = 0; p < topo.radix(); ++p) {
            const PortRef peer = topo.peer(sw, p);
            // Switch-switch cables once each (from the lower endpoint).
            if (peer.kind == DeviceKind::Switch &&
                (peer.device > sw || (peer.device == sw && peer.port > p)))
                draw_link({DeviceKind::Switch, sw, p}, peer);
        }

    for (std::size_t i = 0; i < L.switches.size(); ++i)
        s += "<rect x=\"" + std::to_string(L.switches[i].x - 9) + "\" y=\"" +
             std::to_string(L.switches[i].y - 9) +
             "\" width=\"18\" height=\"18\" fill=\"#333333\"/>\n";
    for (std::size_t i = 0; i < L.nodes.size(); ++i)
        s += "<circle cx=\"" + std::to_string(L.nodes[i].x) + "\" cy=\"" +
             std::to_string(L.nodes[i].y) + "\" r=\"3\" fill=\"#666666\"/>\n";
    s += "</svg>\n";
    return s;
}

void render_heatmap_file(const Topology& topo, std::span<const PortOccupancy> occ,
                         const std::string& out_path, bool normalize_to_peak) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out_path);
    f << render_heatmap(topo, occ, normalize_to_peak);
}

namespace {

std::string micro_to_decimal(std::int64_t micro) {
    // millionths -> "0.250000" style fixed-point text, no floating point
    std::string frac = std::to_string(micro % 1'000'000);
    frac.insert(0, 6 - frac.size(), '0');
    return std::to_string(micro / 1'000'000) + "." + frac;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

}  // namespace

void write_fct_csv(const std::string& path, std::span<const FctRecord> records) {
    auto f = open_out(path);
    f << "msg_id,bytes,gen_ns,deliver_ns,fct_ns\n";
    for (const FctRecord& r : records)
        f << r.msg_id << ',' << r.bytes << ',' << r.gen_ns << ',' << r.deliver_ns << ','
          << r.fct_ns() << '\n';
}

void write_fct_cdf_csv(const std::string& path, std::span<const CdfPoint> cdf) {
    auto f = open_out(path);
    f << "fct_ns,fraction\n";
    for (const CdfPoint& p : cdf) f << p.fct_ns << ',' << micro_to_decimal(p.fraction_micro) << '\n';
}

void write_summary_csv(const std::string& path, std::int64_t execution_time_ns,
                       const FctSummary& s) {
    auto f = open_out(path);
    f << "execution_time_ns,mean_fct_ns,max_fct_ns,messages\n";
    f << execution_time_ns << ',' << s.mean_ns << ',' << s.max_ns << ',' << s.count << '\n';
}

}  // namespace veft
