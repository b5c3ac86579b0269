#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmig/memory_model.hpp"

namespace pmig {

enum class KeyOrder { Sequential, Uniform };

/// Where new tree nodes are allocated.
struct Placement {
    enum class Kind { RoundRobin, Fixed } kind = Kind::RoundRobin;
    NodeId node = 0;
};

enum class LeafSelector { RandomLeaf, HotLeaf, Subtree };

/// Per-thread state for tree operations: who is calling and the simulated
/// time the operation spent touching memory.
struct OpContext {
    CoreId core = 0;
    OwnerId owner = 1;
    double ns = 0;
    std::uint64_t restarts = 0;
};

/// Concurrent B+-tree with optimistic lock coupling. Every node is one
/// simulated 4 KB page; the page's lock and version in the memory model are
/// the node's latch and OLC version, so page migration and tree writers
/// contend on the same lock.
class BTree {
public:
    static constexpr std::uint16_t kLeafCapacity = 256;
    static constexpr std::uint16_t kInnerCapacity = 255;  // separator keys; children = keys + 1
    using Entry = std::pair<std::uint64_t, std::uint64_t>;

    explicit BTree(MemoryModel& memory, Placement placement = {});
    BTree(const BTree&) = delete;
    BTree& operator=(const BTree&) = delete;

    /// Bulk-loads `n` records into an empty tree. Record r gets key
    /// key_of(r, order) and value value_of(r). Throws CapacityExceeded.
    void load(std::uint64_t n, KeyOrder order = KeyOrder::Sequential);
    /// Bulk-loads sorted, unique entries into an empty tree.
    void bulk_load(std::span<const Entry> sorted);

    static std::uint64_t key_of(std::uint64_t record, KeyOrder order) noexcept;
    static std::uint64_t value_of(std::uint64_t record) noexcept { return record * 2 + 1; }

    std::optional<std::uint64_t> lookup(std::uint64_t key, OpContext& ctx);
    /// False when the key already exists.
    bool insert(std::uint64_t key, std::uint64_t value, OpContext& ctx);
    /// False when the key is absent.
    bool update(std::uint64_t key, std::uint64_t value, OpContext& ctx);
    std::vector<Entry> scan(std::uint64_t start, std::size_t n, OpContext& ctx);

    /// Distinct leaf pages. Subtree picks the leaves covering [lo, hi].
    std::vector<PageId> sample_pages(std::size_t n, LeafSelector selector, std::mt19937_64& rng,
                                     std::uint64_t lo = 0,
                                     std::uint64_t hi = std::numeric_limits<std::uint64_t>::max());

    // --- quiescent inspection -----------------------------------------------
    std::size_t height() const;
    std::size_t leaf_count() const;
    std::size_t inner_count() const;
    std::vector<PageId> pages() const;
    /// Tree nodes resident on each memory node.
    std::vector<std::uint64_t> pages_per_node() const;
    /// Sorted keys, fanout bounds, separator ranges, leaf chain and registry.
    std::vector<std::string> check_structure() const;
    /// Full single-threaded scan along the leaf chain.
    std::vector<Entry> dump() const;
    PageId root() const noexcept { return root_.load(); }

private:
    struct View;
    enum : int { kRestart = -1 };

    View view(PageId page, OpContext& ctx, AccessKind kind, unsigned lines);
    View peek(PageId page) const;
    PageId alloc_node(bool leaf, OwnerId owner);
    bool read_lock(PageId page, std::uint64_t& version) const;
    bool validate(PageId page, std::uint64_t version) const;
    bool upgrade(PageId page, std::uint64_t version, OwnerId owner);
    void write_unlock(PageId page, OwnerId owner);

    int try_lookup(std::uint64_t key, OpContext& ctx, std::optional<std::uint64_t>& out);
    int try_insert(std::uint64_t key, std::uint64_t value, OpContext& ctx);
    int try_update(std::uint64_t key, std::uint64_t value, OpContext& ctx);
    /// Finds the leaf for `key` optimistically; returns false to restart.
    bool find_leaf(std::uint64_t key, OpContext& ctx, PageId& leaf, std::uint64_t& version);
    void split_inner(PageId node, PageId parent, OpContext& ctx);
    void split_leaf(PageId node, PageId parent, OpContext& ctx);
    void insert_separator(const View& parent, std::uint64_t sep, PageId right);
    void note_hot(PageId leaf) noexcept;
    PageId leftmost_leaf() const;

    MemoryModel& memory_;
    Placement placement_;
    std::atomic<PageId> root_{0};
    std::atomic<std::uint64_t> next_node_{0};

    mutable std::mutex leaves_mutex_;
    std::vector<PageId> leaves_;

    static constexpr std::size_t kHotRing = 4096;
    std::array<std::atomic<PageId>, kHotRing> hot_{};
    std::atomic<std::uint64_t> hot_pos_{0};
};

}  // namespace pmig
