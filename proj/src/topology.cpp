#include "pmig/topology.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pmig {

using nlohmann::json;

std::string status_name(Status s) {
    if (s >= 0) return std::to_string(s);
    switch (s) {
        case kENoEnt: return "ENOENT";
        case kENoMem: return "ENOMEM";
        case kEAccess: return "EACCES";
        case kEFault: return "EFAULT";
        case kEBusy: return "EBUSY";
        case kEInvalNode: return "EINVAL_NODE";
        case kUnset: return "UNSET";
        default: return "E" + std::to_string(-s);
    }
}

Topology Topology::create(TopologyConfig config) {
    const std::size_t n = config.nodes.size();
    if (n == 0) throw MalformedConfig("nodes: at least one node is required");
    for (std::size_t i = 0; i < n; ++i) {
        if (config.nodes[i].id != static_cast<NodeId>(i))
            throw MalformedConfig("nodes[" + std::to_string(i) + "].id: node ids must be 0..n-1 in order");
    }
    if (config.latency_ns.size() != n)
        throw MalformedConfig("latency_ns: expected " + std::to_string(n) + " rows, got " +
                              std::to_string(config.latency_ns.size()));
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = config.latency_ns[r];
        if (row.size() != n)
            throw MalformedConfig("latency_ns[" + std::to_string(r) + "]: expected " + std::to_string(n) +
                                  " columns, got " + std::to_string(row.size()));
        for (std::size_t c = 0; c < n; ++c) {
            if (!(row[c] > 0))
                throw MalformedConfig("latency_ns[" + std::to_string(r) + "][" + std::to_string(c) +
                                      "]: latency must be positive");
        }
        for (std::size_t c = 0; c < n; ++c) {
            if (row[r] > row[c])
                throw MalformedConfig("latency_ns[" + std::to_string(r) +
                                      "]: local latency exceeds a remote entry");
        }
    }
    for (std::size_t i = 0; i < config.cores.size(); ++i) {
        const auto& core = config.cores[i];
        if (core.id != static_cast<CoreId>(i))
            throw MalformedConfig("cores[" + std::to_string(i) + "].id: core ids must be 0..n-1 in order");
        if (core.node < 0 || static_cast<std::size_t>(core.node) >= n)
            throw MalformedConfig("cores[" + std::to_string(i) + "].node: unknown node " +
                                  std::to_string(core.node));
    }
    if (config.cores.empty()) throw MalformedConfig("cores: at least one core is required");
    if (!(config.tlb_miss_ns >= 0)) throw MalformedConfig("tlb_miss_ns: must be non-negative");

    Topology t;
    t.nodes_ = std::move(config.nodes);
    t.cores_ = std::move(config.cores);
    t.latency_.reserve(n * n);
    for (const auto& row : config.latency_ns) t.latency_.insert(t.latency_.end(), row.begin(), row.end());
    t.tlb_miss_ns_ = config.tlb_miss_ns;
    t.costs_ = config.costs;
    return t;
}

std::uint64_t Topology::total_frames() const noexcept {
    std::uint64_t total = 0;
    for (const auto& n : nodes_) total += n.frames;
    return total;
}

CoreId Topology::spread_core(std::size_t worker) const {
    std::vector<std::vector<CoreId>> by_node(nodes_.size());
    for (const auto& c : cores_) by_node[static_cast<std::size_t>(c.node)].push_back(c.id);
    std::vector<const std::vector<CoreId>*> populated;
    for (const auto& v : by_node)
        if (!v.empty()) populated.push_back(&v);
    const auto& bucket = *populated[worker % populated.size()];
    return bucket[(worker / populated.size()) % bucket.size()];
}

namespace {

template <typename T>
T get_field(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw MalformedConfig(path + "." + key + ": missing");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw MalformedConfig(path + "." + key + ": wrong type");
    }
}

void read_cost(const json& costs, const char* key, double& out) {
    auto it = costs.find(key);
    if (it == costs.end()) return;
    if (!it->is_number()) throw MalformedConfig(std::string("costs.") + key + ": expected a number");
    out = it->get<double>();
    if (out < 0) throw MalformedConfig(std::string("costs.") + key + ": must be non-negative");
}

}  // namespace

Topology parse_topology(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw MalformedConfig(std::string("topology: ") + e.what());
    }
    if (!doc.is_object()) throw MalformedConfig("topology: top level must be an object");

    TopologyConfig cfg;
    if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw MalformedConfig("nodes: missing or not a list");
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
        const auto& n = doc["nodes"][i];
        const std::string path = "nodes[" + std::to_string(i) + "]";
        if (!n.is_object()) throw MalformedConfig(path + ": expected an object");
        NodeSpec spec;
        spec.id = get_field<NodeId>(n, "id", path);
        spec.frames = get_field<std::uint32_t>(n, "frames", path);
        const auto kind = n.contains("kind") ? get_field<std::string>(n, "kind", path) : std::string("dram");
        if (kind == "dram") spec.kind = NodeKind::Dram;
        else if (kind == "cxl") spec.kind = NodeKind::Cxl;
        else throw MalformedConfig(path + ".kind: expected dram or cxl, got " + kind);
        cfg.nodes.push_back(spec);
    }
    if (!doc.contains("cores") || !doc["cores"].is_array()) throw MalformedConfig("cores: missing or not a list");
    for (std::size_t i = 0; i < doc["cores"].size(); ++i) {
        const auto& c = doc["cores"][i];
        const std::string path = "cores[" + std::to_string(i) + "]";
        if (!c.is_object()) throw MalformedConfig(path + ": expected an object");
        cfg.cores.push_back({get_field<CoreId>(c, "id", path), get_field<NodeId>(c, "node", path)});
    }
    if (!doc.contains("latency_ns") || !doc["latency_ns"].is_array())
        throw MalformedConfig("latency_ns: missing or not a list");
    const auto& lat = doc["latency_ns"];
    const std::size_t n = cfg.nodes.size();
    // Accept a row-major flat list or a list of rows.
    if (!lat.empty() && lat[0].is_number()) {
        if (lat.size() != n * n)
            throw MalformedConfig("latency_ns: expected " + std::to_string(n * n) + " entries, got " +
                                  std::to_string(lat.size()));
        cfg.latency_ns.assign(n, std::vector<double>(n));
        for (std::size_t k = 0; k < lat.size(); ++k) {
            if (!lat[k].is_number()) throw MalformedConfig("latency_ns[" + std::to_string(k) + "]: expected a number");
            cfg.latency_ns[k / n][k % n] = lat[k].get<double>();
        }
    } else {
        for (std::size_t r = 0; r < lat.size(); ++r) {
            if (!lat[r].is_array()) throw MalformedConfig("latency_ns[" + std::to_string(r) + "]: expected a row");
            std::vector<double> row;
            for (std::size_t c = 0; c < lat[r].size(); ++c) {
                if (!lat[r][c].is_number())
                    throw MalformedConfig("latency_ns[" + std::to_string(r) + "][" + std::to_string(c) +
                                          "]: expected a number");
                row.push_back(lat[r][c].get<double>());
            }
            cfg.latency_ns.push_back(std::move(row));
        }
    }
    if (doc.contains("tlb_miss_ns")) {
        if (!doc["tlb_miss_ns"].is_number()) throw MalformedConfig("tlb_miss_ns: expected a number");
        cfg.tlb_miss_ns = doc["tlb_miss_ns"].get<double>();
    }
    if (doc.contains("costs")) {
        const auto& c = doc["costs"];
        if (!c.is_object()) throw MalformedConfig("costs: expected an object");
        auto& m = cfg.costs;
        read_cost(c, "syscall_ns", m.syscall_ns);
        read_cost(c, "lru_drain_ns", m.lru_drain_ns);
        read_cost(c, "lru_drain_victim_ns", m.lru_drain_victim_ns);
        read_cost(c, "page_op_ns", m.page_op_ns);
        read_cost(c, "remap_ns", m.remap_ns);
        read_cost(c, "copy_mlp", m.copy_mlp);
        read_cost(c, "ipi_base_ns", m.ipi_base_ns);
        read_cost(c, "ipi_per_core_ns", m.ipi_per_core_ns);
        read_cost(c, "ipi_victim_ns", m.ipi_victim_ns);
        read_cost(c, "sync_lock_wait_ns", m.sync_lock_wait_ns);
        read_cost(c, "writeback_wait_ns", m.writeback_wait_ns);
        read_cost(c, "migration_cache_bytes", m.migration_cache_bytes);
        read_cost(c, "meta_miss_lines", m.meta_miss_lines);
        read_cost(c, "migration_entry_stall_ns", m.migration_entry_stall_ns);
        if (!(m.copy_mlp > 0)) throw MalformedConfig("costs.copy_mlp: must be positive");
    }
    return Topology::create(std::move(cfg));
}

Topology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MalformedConfig("topology: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_topology(buf.str());
}

namespace presets {

namespace {
TopologyConfig uniform(std::size_t nodes, std::size_t cores_per_node, std::uint32_t frames, double local,
                       double remote) {
    TopologyConfig cfg;
    for (std::size_t n = 0; n < nodes; ++n) cfg.nodes.push_back({static_cast<NodeId>(n), frames, NodeKind::Dram});
    for (std::size_t n = 0; n < nodes; ++n)
        for (std::size_t c = 0; c < cores_per_node; ++c)
            cfg.cores.push_back({static_cast<CoreId>(cfg.cores.size()), static_cast<NodeId>(n)});
    cfg.latency_ns.assign(nodes, std::vector<double>(nodes, remote));
    for (std::size_t n = 0; n < nodes; ++n) cfg.latency_ns[n][n] = local;
    return cfg;
}
}  // namespace

Topology dual_socket(std::uint32_t frames_per_node) {
    return Topology::create(uniform(2, 20, frames_per_node, 100, 400));
}

Topology uma(std::uint32_t frames) { return Topology::create(uniform(1, 4, frames, 100, 100)); }

Topology tiered(std::uint32_t frames_per_node) {
    TopologyConfig cfg;
    cfg.nodes = {{0, frames_per_node, NodeKind::Dram}, {1, frames_per_node, NodeKind::Cxl}};
    for (CoreId c = 0; c < 20; ++c) cfg.cores.push_back({c, 0});
    cfg.latency_ns = {{100, 500}, {500, 100}};
    return Topology::create(std::move(cfg));
}

Topology chiplet(std::uint32_t frames_per_node) {
    return Topology::create(uniform(4, 8, frames_per_node, 100, 400));
}

}  // namespace presets

}  // namespace pmig
