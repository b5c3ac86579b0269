#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pmig/topology.hpp"
#include "pmig/types.hpp"

namespace pmig {

/// Physical location of a page: a frame index within a node's pool.
struct FrameRef {
    NodeId node = kNoNode;
    std::uint32_t index = 0;

    friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

enum class AccessKind { Read, Write };

enum class PageState { Invalid, Mapped, MigrationEntry, Freed };

namespace page_flags {
constexpr std::uint8_t kOnLru = 1u << 0;
constexpr std::uint8_t kIsolated = 1u << 1;
constexpr std::uint8_t kUnderWriteback = 1u << 2;
constexpr std::uint8_t kLruPending = 1u << 3;
}  // namespace page_flags

struct MemoryOptions {
    std::size_t tlb_entries_per_core = 1536;
};

struct AccessResult {
    double ns = 0;
    bool tlb_hit = false;
    FrameRef frame;
    std::byte* data = nullptr;
    std::byte* meta = nullptr;
};

struct MemoryCounters {
    std::uint64_t accesses = 0;
    std::uint64_t tlb_hits = 0;
    std::uint64_t tlb_misses = 0;
    std::uint64_t shootdowns = 0;
    std::uint64_t ipis = 0;
};

/// The simulated machine: frame pools, page table, per-core TLBs, page locks
/// and the LRU lists. All members are safe to call from many threads.
class MemoryModel {
public:
    explicit MemoryModel(Topology topology, MemoryOptions options = {});
    ~MemoryModel();
    MemoryModel(const MemoryModel&) = delete;
    MemoryModel& operator=(const MemoryModel&) = delete;

    const Topology& topology() const noexcept { return topology_; }

    // --- allocation -------------------------------------------------------
    /// Maps a fresh zeroed page on `preferred`. Throws NodeExhausted.
    PageId alloc_page(NodeId preferred);
    /// Unmaps the page and returns its frame to the pool.
    void free_page(PageId page);

    PageState state(PageId page) const noexcept;
    bool ever_allocated(PageId page) const noexcept;
    /// Node currently backing the page; waits out an in-flight migration.
    std::optional<NodeId> node_of(PageId page) const;
    std::optional<FrameRef> frame_of(PageId page) const noexcept;
    std::uint64_t page_count() const noexcept { return next_page_.load() - 1; }

    // --- translation ------------------------------------------------------
    /// Translates through the core's TLB and charges `lines` cache-line
    /// accesses at the matrix latency, plus the TLB-miss surcharge on a miss.
    /// Blocks while the page is a migration entry. Throws UnmappedPage.
    AccessResult access(CoreId core, PageId page, AccessKind kind, unsigned lines = 1);
    void tlb_shootdown(std::span<const PageId> pages);
    bool tlb_contains(CoreId core, PageId page) const;

    // --- locks, versions, flags -------------------------------------------
    bool try_lock_page(PageId page, OwnerId owner);
    void unlock_page(PageId page, OwnerId owner);
    bool is_locked(PageId page) const noexcept;
    OwnerId lock_owner(PageId page) const noexcept;
    std::uint64_t version(PageId page) const noexcept;
    void bump_version(PageId page) noexcept;
    std::uint8_t flags(PageId page) const noexcept;
    void set_writeback(PageId page, bool on) noexcept;
    bool under_writeback(PageId page) const noexcept;

    // --- LRU ----------------------------------------------------------------
    bool lru_isolate(PageId page);
    /// Returns an isolated page to the LRU of the node that now backs it.
    void lru_putback(PageId page);
    void set_lru_enabled(bool enabled);
    bool lru_enabled() const;
    std::size_t lru_size(NodeId node) const;
    std::vector<PageId> lru_pages(NodeId node) const;
    std::size_t isolated_count() const noexcept { return isolated_.load(); }

    // --- migration primitives ----------------------------------------------
    std::optional<FrameRef> try_alloc_frame(NodeId node);
    void free_frame(FrameRef frame);
    /// Replaces the PTE with the migration-entry sentinel; caller holds the page lock.
    FrameRef install_migration_entry(PageId page);
    /// Copies metadata and payload between frames.
    void copy_frame(FrameRef from, FrameRef to);
    /// Points the PTE at `to` and bumps the version.
    void remap(PageId page, FrameRef to);
    /// Undoes install_migration_entry without moving the page.
    void restore_mapping(PageId page, FrameRef original);

    std::byte* frame_data(FrameRef frame) const;
    std::byte* frame_meta(FrameRef frame) const;

    // --- accounting ----------------------------------------------------------
    std::uint64_t frames_in_use(NodeId node) const;
    std::uint64_t free_frames(NodeId node) const;
    std::uint64_t pages_on_node(NodeId node) const;
    MemoryCounters counters() const noexcept;
    std::uint64_t shootdown_count() const noexcept { return shootdowns_.load(); }
    std::uint64_t ipi_count() const noexcept { return ipis_.load(); }

    /// Checks frame conservation, translation coherence, LRU/isolation
    /// consistency. Only meaningful at a quiescent point. Returns violations.
    std::vector<std::string> check_invariants() const;

private:
    struct Pte;
    struct PteChunk;
    struct NodePool;
    struct CoreTlb;

    Pte* pte(PageId page) const noexcept;
    Pte& pte_checked(PageId page) const;
    void lru_insert_locked(PageId page, Pte& entry, NodeId node);
    void lru_remove_locked(Pte& entry);

    Topology topology_;
    MemoryOptions options_;

    static constexpr std::size_t kPteChunkBits = 12;
    std::vector<std::atomic<PteChunk*>> pte_chunks_;
    std::mutex pte_grow_mutex_;
    std::atomic<PageId> next_page_{1};

    std::vector<std::unique_ptr<NodePool>> pools_;
    std::vector<std::unique_ptr<CoreTlb>> tlbs_;

    mutable std::mutex lru_mutex_;
    std::vector<std::list<PageId>> lru_lists_;
    std::vector<PageId> lru_pending_;
    bool lru_enabled_ = true;
    std::atomic<std::size_t> isolated_{0};

    std::atomic<std::uint64_t> accesses_{0};
    std::atomic<std::uint64_t> tlb_hits_{0};
    std::atomic<std::uint64_t> tlb_misses_{0};
    std::atomic<std::uint64_t> shootdowns_{0};
    std::atomic<std::uint64_t> ipis_{0};
};

}  // namespace pmig
