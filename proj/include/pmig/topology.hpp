#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pmig/types.hpp"

namespace pmig {

enum class NodeKind { Dram, Cxl };

struct NodeSpec {
    NodeId id = 0;
    std::uint32_t frames = 0;
    NodeKind kind = NodeKind::Dram;
};

struct CoreSpec {
    CoreId id = 0;
    NodeId node = 0;
};

/// Simulated kernel costs, in nanoseconds unless noted. They drive the
/// simulated clock of the workload; none of them affects engine control flow.
struct CostModel {
    double syscall_ns = 1500;            // kernel entry/exit per engine call
    double lru_drain_ns = 20000;         // draining per-cpu LRU caches on the caller
    double lru_drain_victim_ns = 2000;   // time stolen from every other worker per call
    double page_op_ns = 300;             // one unmap attempt: lock try, rmap walk
    double remap_ns = 300;               // installing the new PTE
    double copy_mlp = 16;                // memory-level parallelism of the page copy
    double ipi_base_ns = 2000;           // shootdown issue cost
    double ipi_per_core_ns = 100;        // plus this per core in the machine
    double ipi_victim_ns = 500;          // interrupt cost on every other worker
    double sync_lock_wait_ns = 1000000;  // one blocking wait on a held page lock
    double writeback_wait_ns = 200000;   // waiting for a writeback to finish
    double migration_cache_bytes = 1 << 20;  // cache seen by one batch's move phase
    double meta_miss_lines = 4;          // lines refetched when page metadata was evicted
    double migration_entry_stall_ns = 1000;  // reader blocked on a migration entry
};

struct TopologyConfig {
    std::vector<NodeSpec> nodes;
    std::vector<CoreSpec> cores;
    std::vector<std::vector<double>> latency_ns;
    double tlb_miss_ns = 50;
    CostModel costs;
};

/// Immutable description of the simulated machine.
class Topology {
public:
    static Topology create(TopologyConfig config);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t core_count() const noexcept { return cores_.size(); }
    const NodeSpec& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const CoreSpec& core(CoreId id) const { return cores_.at(static_cast<std::size_t>(id)); }
    const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
    const std::vector<CoreSpec>& cores() const noexcept { return cores_; }
    bool valid_node(NodeId id) const noexcept {
        return id >= 0 && static_cast<std::size_t>(id) < nodes_.size();
    }
    NodeId core_node(CoreId core) const { return this->core(core).node; }

    /// Nanoseconds per 64-byte access from a core on `from` to memory on `to`.
    double latency(NodeId from, NodeId to) const noexcept {
        return latency_[static_cast<std::size_t>(from) * nodes_.size() +
                        static_cast<std::size_t>(to)];
    }
    double tlb_miss_ns() const noexcept { return tlb_miss_ns_; }
    const CostModel& costs() const noexcept { return costs_; }
    std::uint64_t total_frames() const noexcept;

    /// Cores with a home node, spread across nodes: the i-th worker lands on
    /// node (i mod nodes-with-cores).
    CoreId spread_core(std::size_t worker) const;

private:
    Topology() = default;

    std::vector<NodeSpec> nodes_;
    std::vector<CoreSpec> cores_;
    std::vector<double> latency_;
    double tlb_miss_ns_ = 50;
    CostModel costs_;
};

/// Parses the JSON topology format. Errors name the offending key.
Topology parse_topology(std::string_view text);
Topology load_topology(const std::filesystem::path& path);

namespace presets {
/// Dual-socket NUMA server, 20 cores per socket, remote 4x local.
Topology dual_socket(std::uint32_t frames_per_node = 1u << 18);
/// Single node, four cores.
Topology uma(std::uint32_t frames = 1u << 16);
/// One DRAM node with cores plus one core-less CXL node at 5x latency.
Topology tiered(std::uint32_t frames_per_node = 1u << 18);
/// Four chiplet nodes, eight cores each.
Topology chiplet(std::uint32_t frames_per_node = 1u << 17);
}  // namespace presets

}  // namespace pmig
