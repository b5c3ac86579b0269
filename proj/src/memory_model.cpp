#include "pmig/memory_model.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <thread>
#include <unordered_set>

namespace pmig {

namespace {

constexpr std::uint64_t kInvalidWord = 0;
constexpr std::uint64_t kFreedWord = 1;
constexpr std::uint64_t kMigrationWord = 2;
constexpr std::size_t kFrameStride = kPageSize + kPageMetaSize;
constexpr std::uint32_t kFramesPerChunk = 256;

constexpr std::uint64_t encode(FrameRef f) noexcept {
    return (static_cast<std::uint64_t>(f.node + 1) << 32) | f.index;
}

constexpr bool is_mapped(std::uint64_t word) noexcept { return word > kMigrationWord; }

constexpr FrameRef decode(std::uint64_t word) noexcept {
    return FrameRef{static_cast<NodeId>((word >> 32) - 1), static_cast<std::uint32_t>(word & 0xffffffffu)};
}

}  // namespace

struct MemoryModel::Pte {
    std::atomic<std::uint64_t> frame{kInvalidWord};
    std::atomic<std::uint64_t> version{0};
    std::atomic<std::uint64_t> remaps{0};
    std::atomic<OwnerId> owner{kNoOwner};
    std::atomic<std::uint8_t> flags{0};
    // Guarded by lru_mutex_.
    NodeId lru_node = kNoNode;
    std::list<PageId>::iterator lru_it;
};

struct MemoryModel::PteChunk {
    std::array<Pte, std::size_t{1} << kPteChunkBits> entries;
};

struct MemoryModel::NodePool {
    mutable std::mutex mutex;
    std::uint32_t capacity = 0;
    std::uint32_t bump = 0;
    std::set<std::uint32_t> freed;
    std::uint64_t in_use = 0;
    std::vector<std::unique_ptr<std::byte[]>> chunks;
};

struct MemoryModel::CoreTlb {
    struct Slot {
        PageId page = 0;
        std::uint64_t frame_word = 0;
        std::uint64_t remaps = 0;
    };
    mutable std::mutex mutex;
    std::vector<Slot> slots;
};

MemoryModel::MemoryModel(Topology topology, MemoryOptions options)
    : topology_(std::move(topology)), options_(options) {
    if (options_.tlb_entries_per_core == 0) options_.tlb_entries_per_core = 1;
    const std::uint64_t max_pages = std::max<std::uint64_t>(2 * topology_.total_frames(), 1u << 16);
    const std::size_t chunk_count = (max_pages >> kPteChunkBits) + 1;
    pte_chunks_ = std::vector<std::atomic<PteChunk*>>(chunk_count);
    for (auto& c : pte_chunks_) c.store(nullptr);

    for (const auto& node : topology_.nodes()) {
        auto pool = std::make_unique<NodePool>();
        pool->capacity = node.frames;
        pool->chunks.resize((node.frames + kFramesPerChunk - 1) / kFramesPerChunk);
        pools_.push_back(std::move(pool));
    }
    for (std::size_t c = 0; c < topology_.core_count(); ++c) {
        auto tlb = std::make_unique<CoreTlb>();
        tlb->slots.resize(options_.tlb_entries_per_core);
        tlbs_.push_back(std::move(tlb));
    }
    lru_lists_.resize(topology_.node_count());
}

MemoryModel::~MemoryModel() {
    for (auto& c : pte_chunks_) delete c.load();
}

MemoryModel::Pte* MemoryModel::pte(PageId page) const noexcept {
    if (page == 0) return nullptr;
    const std::size_t chunk = page >> kPteChunkBits;
    if (chunk >= pte_chunks_.size()) return nullptr;
    PteChunk* c = pte_chunks_[chunk].load(std::memory_order_acquire);
    if (c == nullptr) return nullptr;
    return &c->entries[page & ((std::size_t{1} << kPteChunkBits) - 1)];
}

MemoryModel::Pte& MemoryModel::pte_checked(PageId page) const {
    Pte* e = pte(page);
    if (e == nullptr || e->frame.load() == kInvalidWord) throw UnmappedPage(page);
    return *e;
}

std::optional<FrameRef> MemoryModel::try_alloc_frame(NodeId node) {
    if (!topology_.valid_node(node)) return std::nullopt;
    NodePool& pool = *pools_[static_cast<std::size_t>(node)];
    std::lock_guard lock(pool.mutex);
    std::uint32_t index;
    if (!pool.freed.empty()) {
        index = *pool.freed.begin();
        pool.freed.erase(pool.freed.begin());
    } else if (pool.bump < pool.capacity) {
        index = pool.bump++;
    } else {
        return std::nullopt;
    }
    auto& chunk = pool.chunks[index / kFramesPerChunk];
    if (!chunk) {
        // The last chunk only covers the remaining frames so small test machines stay small.
        const std::uint32_t first = index - index % kFramesPerChunk;
        const std::uint32_t frames = std::min(kFramesPerChunk, pool.capacity - first);
        chunk = std::make_unique<std::byte[]>(std::size_t{frames} * kFrameStride);
    }
    ++pool.in_use;
    return FrameRef{node, index};
}

void MemoryModel::free_frame(FrameRef frame) {
    NodePool& pool = *pools_.at(static_cast<std::size_t>(frame.node));
    std::lock_guard lock(pool.mutex);
    pool.freed.insert(frame.index);
    --pool.in_use;
}

std::byte* MemoryModel::frame_data(FrameRef frame) const {
    const NodePool& pool = *pools_[static_cast<std::size_t>(frame.node)];
    return pool.chunks[frame.index / kFramesPerChunk].get() + (frame.index % kFramesPerChunk) * kFrameStride;
}

std::byte* MemoryModel::frame_meta(FrameRef frame) const { return frame_data(frame) + kPageSize; }

PageId MemoryModel::alloc_page(NodeId preferred) {
    if (!topology_.valid_node(preferred)) throw NodeExhausted(preferred);
    auto frame = try_alloc_frame(preferred);
    if (!frame) throw NodeExhausted(preferred);
    std::memset(frame_data(*frame), 0, kFrameStride);

    const PageId page = next_page_.fetch_add(1);
    const std::size_t chunk = page >> kPteChunkBits;
    if (chunk >= pte_chunks_.size()) {
        free_frame(*frame);
        throw CapacityExceeded("page table exhausted");
    }
    if (pte_chunks_[chunk].load(std::memory_order_acquire) == nullptr) {
        std::lock_guard lock(pte_grow_mutex_);
        if (pte_chunks_[chunk].load() == nullptr) pte_chunks_[chunk].store(new PteChunk, std::memory_order_release);
    }
    Pte& e = *pte(page);
    {
        std::lock_guard lock(lru_mutex_);
        e.frame.store(encode(*frame), std::memory_order_release);
        lru_insert_locked(page, e, preferred);
    }
    return page;
}

void MemoryModel::free_page(PageId page) {
    Pte& e = pte_checked(page);
    const std::uint64_t word = e.frame.load();
    if (!is_mapped(word)) throw UnmappedPage(page);
    {
        std::lock_guard lock(lru_mutex_);
        const auto flags = e.flags.load();
        if (flags & page_flags::kIsolated) throw Error("cannot free isolated page " + std::to_string(page));
        if (flags & page_flags::kOnLru) lru_remove_locked(e);
        e.flags.fetch_and(static_cast<std::uint8_t>(~(page_flags::kLruPending | page_flags::kOnLru)));
        e.frame.store(kFreedWord);
        e.version.fetch_add(1);
    }
    const PageId one[] = {page};
    tlb_shootdown(one);
    free_frame(decode(word));
}

PageState MemoryModel::state(PageId page) const noexcept {
    const Pte* e = pte(page);
    if (e == nullptr) return PageState::Invalid;
    const auto word = e->frame.load();
    if (word == kInvalidWord) return PageState::Invalid;
    if (word == kFreedWord) return PageState::Freed;
    if (word == kMigrationWord) return PageState::MigrationEntry;
    return PageState::Mapped;
}

bool MemoryModel::ever_allocated(PageId page) const noexcept { return state(page) != PageState::Invalid; }

std::optional<NodeId> MemoryModel::node_of(PageId page) const {
    const Pte* e = pte(page);
    if (e == nullptr) return std::nullopt;
    for (;;) {
        const auto word = e->frame.load(std::memory_order_acquire);
        if (word == kMigrationWord) {
            std::this_thread::yield();
            continue;
        }
        if (!is_mapped(word)) return std::nullopt;
        return decode(word).node;
    }
}

std::optional<FrameRef> MemoryModel::frame_of(PageId page) const noexcept {
    const Pte* e = pte(page);
    if (e == nullptr) return std::nullopt;
    const auto word = e->frame.load(std::memory_order_acquire);
    if (!is_mapped(word)) return std::nullopt;
    return decode(word);
}

AccessResult MemoryModel::access(CoreId core, PageId page, AccessKind /*kind*/, unsigned lines) {
    Pte& e = pte_checked(page);
    CoreTlb& tlb = *tlbs_.at(static_cast<std::size_t>(core));
    AccessResult result;
    bool stalled = false;
    std::uint64_t word = 0;
    for (;;) {
        std::unique_lock lock(tlb.mutex);
        auto& slot = tlb.slots[page % tlb.slots.size()];
        if (slot.page == page) {
            word = slot.frame_word;
            result.tlb_hit = true;
            break;
        }
        word = e.frame.load(std::memory_order_acquire);
        if (word == kMigrationWord) {
            lock.unlock();
            stalled = true;
            std::this_thread::yield();
            continue;
        }
        if (!is_mapped(word)) throw UnmappedPage(page);
        slot = {page, word, e.remaps.load()};
        break;
    }
    const FrameRef frame = decode(word);
    const NodeId from = topology_.core_node(core);
    result.frame = frame;
    result.ns = lines * topology_.latency(from, frame.node);
    if (!result.tlb_hit) result.ns += topology_.tlb_miss_ns();
    if (stalled) result.ns += topology_.costs().migration_entry_stall_ns;
    result.data = frame_data(frame);
    result.meta = result.data + kPageSize;
    accesses_.fetch_add(1, std::memory_order_relaxed);
    (result.tlb_hit ? tlb_hits_ : tlb_misses_).fetch_add(1, std::memory_order_relaxed);
    return result;
}

void MemoryModel::tlb_shootdown(std::span<const PageId> pages) {
    if (pages.empty()) return;
    for (auto& tlb : tlbs_) {
        std::lock_guard lock(tlb->mutex);
        for (PageId p : pages) {
            auto& slot = tlb->slots[p % tlb->slots.size()];
            if (slot.page == p) slot = {};
        }
    }
    shootdowns_.fetch_add(1);
    ipis_.fetch_add(1);
}

bool MemoryModel::tlb_contains(CoreId core, PageId page) const {
    const CoreTlb& tlb = *tlbs_.at(static_cast<std::size_t>(core));
    std::lock_guard lock(tlb.mutex);
    return tlb.slots[page % tlb.slots.size()].page == page;
}

bool MemoryModel::try_lock_page(PageId page, OwnerId owner) {
    Pte& e = pte_checked(page);
    OwnerId expected = kNoOwner;
    return e.owner.compare_exchange_strong(expected, owner);
}

void MemoryModel::unlock_page(PageId page, OwnerId owner) {
    Pte& e = pte_checked(page);
    OwnerId expected = owner;
    if (!e.owner.compare_exchange_strong(expected, kNoOwner))
        throw UnlockNotOwner("page " + std::to_string(page) + " unlocked by " + std::to_string(owner) +
                             " but held by " + std::to_string(expected));
}

bool MemoryModel::is_locked(PageId page) const noexcept {
    const Pte* e = pte(page);
    return e != nullptr && e->owner.load() != kNoOwner;
}

OwnerId MemoryModel::lock_owner(PageId page) const noexcept {
    const Pte* e = pte(page);
    return e == nullptr ? kNoOwner : e->owner.load();
}

std::uint64_t MemoryModel::version(PageId page) const noexcept {
    const Pte* e = pte(page);
    return e == nullptr ? 0 : e->version.load();
}

void MemoryModel::bump_version(PageId page) noexcept {
    if (Pte* e = pte(page)) e->version.fetch_add(1);
}

std::uint8_t MemoryModel::flags(PageId page) const noexcept {
    const Pte* e = pte(page);
    return e == nullptr ? 0 : e->flags.load();
}

void MemoryModel::set_writeback(PageId page, bool on) noexcept {
    if (Pte* e = pte(page)) {
        if (on) e->flags.fetch_or(page_flags::kUnderWriteback);
        else e->flags.fetch_and(static_cast<std::uint8_t>(~page_flags::kUnderWriteback));
    }
}

bool MemoryModel::under_writeback(PageId page) const noexcept {
    return (flags(page) & page_flags::kUnderWriteback) != 0;
}

void MemoryModel::lru_insert_locked(PageId page, Pte& entry, NodeId node) {
    if (!lru_enabled_) {
        entry.flags.fetch_or(page_flags::kLruPending);
        lru_pending_.push_back(page);
        return;
    }
    auto& list = lru_lists_[static_cast<std::size_t>(node)];
    entry.lru_it = list.insert(list.end(), page);
    entry.lru_node = node;
    entry.flags.fetch_or(page_flags::kOnLru);
}

void MemoryModel::lru_remove_locked(Pte& entry) {
    lru_lists_[static_cast<std::size_t>(entry.lru_node)].erase(entry.lru_it);
    entry.lru_node = kNoNode;
    entry.flags.fetch_and(static_cast<std::uint8_t>(~page_flags::kOnLru));
}

bool MemoryModel::lru_isolate(PageId page) {
    Pte* e = pte(page);
    if (e == nullptr) return false;
    std::lock_guard lock(lru_mutex_);
    const auto f = e->flags.load();
    if (!(f & page_flags::kOnLru) || (f & page_flags::kIsolated)) return false;
    lru_remove_locked(*e);
    e->flags.fetch_or(page_flags::kIsolated);
    isolated_.fetch_add(1);
    return true;
}

void MemoryModel::lru_putback(PageId page) {
    Pte& e = pte_checked(page);
    std::lock_guard lock(lru_mutex_);
    if (!(e.flags.load() & page_flags::kIsolated)) return;
    e.flags.fetch_and(static_cast<std::uint8_t>(~page_flags::kIsolated));
    isolated_.fetch_sub(1);
    const auto word = e.frame.load();
    if (!is_mapped(word)) return;
    lru_insert_locked(page, e, decode(word).node);
}

void MemoryModel::set_lru_enabled(bool enabled) {
    std::lock_guard lock(lru_mutex_);
    lru_enabled_ = enabled;
    if (!enabled) return;
    for (PageId page : lru_pending_) {
        Pte& e = *pte(page);
        const auto f = e.flags.load();
        if (!(f & page_flags::kLruPending)) continue;
        e.flags.fetch_and(static_cast<std::uint8_t>(~page_flags::kLruPending));
        const auto word = e.frame.load();
        if (!is_mapped(word) || (f & page_flags::kIsolated) || (f & page_flags::kOnLru)) continue;
        lru_insert_locked(page, e, decode(word).node);
    }
    lru_pending_.clear();
}

bool MemoryModel::lru_enabled() const {
    std::lock_guard lock(lru_mutex_);
    return lru_enabled_;
}

std::size_t MemoryModel::lru_size(NodeId node) const {
    std::lock_guard lock(lru_mutex_);
    return lru_lists_.at(static_cast<std::size_t>(node)).size();
}

std::vector<PageId> MemoryModel::lru_pages(NodeId node) const {
    std::lock_guard lock(lru_mutex_);
    const auto& l = lru_lists_.at(static_cast<std::size_t>(node));
    return {l.begin(), l.end()};
}

FrameRef MemoryModel::install_migration_entry(PageId page) {
    Pte& e = pte_checked(page);
    const auto old = e.frame.exchange(kMigrationWord);
    if (!is_mapped(old)) throw UnmappedPage(page);
    return decode(old);
}

void MemoryModel::copy_frame(FrameRef from, FrameRef to) {
    std::memcpy(frame_data(to), frame_data(from), kFrameStride);
}

void MemoryModel::remap(PageId page, FrameRef to) {
    Pte& e = pte_checked(page);
    e.remaps.fetch_add(1);
    e.frame.store(encode(to), std::memory_order_release);
    e.version.fetch_add(1);
}

void MemoryModel::restore_mapping(PageId page, FrameRef original) {
    Pte& e = pte_checked(page);
    e.frame.store(encode(original), std::memory_order_release);
}

std::uint64_t MemoryModel::frames_in_use(NodeId node) const {
    const NodePool& pool = *pools_.at(static_cast<std::size_t>(node));
    std::lock_guard lock(pool.mutex);
    return pool.in_use;
}

std::uint64_t MemoryModel::free_frames(NodeId node) const {
    const NodePool& pool = *pools_.at(static_cast<std::size_t>(node));
    std::lock_guard lock(pool.mutex);
    return (pool.capacity - pool.bump) + pool.freed.size();
}

std::uint64_t MemoryModel::pages_on_node(NodeId node) const {
    std::uint64_t count = 0;
    const PageId end = next_page_.load();
    for (PageId p = 1; p < end; ++p) {
        const Pte* e = pte(p);
        if (e == nullptr) continue;
        const auto word = e->frame.load();
        if (is_mapped(word) && decode(word).node == node) ++count;
    }
    return count;
}

MemoryCounters MemoryModel::counters() const noexcept {
    return {accesses_.load(), tlb_hits_.load(), tlb_misses_.load(), shootdowns_.load(), ipis_.load()};
}

std::vector<std::string> MemoryModel::check_invariants() const {
    std::vector<std::string> violations;
    const std::size_t nodes = topology_.node_count();
    std::vector<std::uint64_t> mapped(nodes, 0);
    std::size_t isolated = 0;
    const PageId end = next_page_.load();

    std::lock_guard lru_lock(lru_mutex_);
    std::vector<std::unordered_set<PageId>> listed(nodes);
    for (std::size_t n = 0; n < nodes; ++n) {
        for (PageId p : lru_lists_[n]) {
            if (!listed[n].insert(p).second)
                violations.push_back("lru: page " + std::to_string(p) + " listed twice on node " + std::to_string(n));
        }
    }
    for (PageId p = 1; p < end; ++p) {
        const Pte* e = pte(p);
        if (e == nullptr) continue;
        const auto word = e->frame.load();
        const auto f = e->flags.load();
        if (word == kMigrationWord) violations.push_back("page " + std::to_string(p) + " left as a migration entry");
        if (is_mapped(word)) ++mapped[static_cast<std::size_t>(decode(word).node)];
        if (f & page_flags::kIsolated) {
            ++isolated;
            if (f & page_flags::kOnLru) violations.push_back("page " + std::to_string(p) + " isolated and on LRU");
        }
        std::size_t lists = 0;
        for (std::size_t n = 0; n < nodes; ++n) lists += listed[n].count(p);
        const bool on_lru = (f & page_flags::kOnLru) != 0;
        if (on_lru != (lists == 1) || lists > 1)
            violations.push_back("page " + std::to_string(p) + " LRU flag disagrees with LRU lists");
        if (on_lru && is_mapped(word) && listed[static_cast<std::size_t>(decode(word).node)].count(p) == 0)
            violations.push_back("page " + std::to_string(p) + " on the LRU of a node that does not back it");
    }
    if (isolated != isolated_.load())
        violations.push_back("isolation counter " + std::to_string(isolated_.load()) + " != flagged pages " +
                             std::to_string(isolated));
    if (isolated != 0) violations.push_back(std::to_string(isolated) + " pages remain isolated");

    for (std::size_t n = 0; n < nodes; ++n) {
        const NodePool& pool = *pools_[n];
        std::lock_guard lock(pool.mutex);
        const std::uint64_t free = (pool.capacity - pool.bump) + pool.freed.size();
        if (pool.in_use + free != pool.capacity)
            violations.push_back("node " + std::to_string(n) + ": in-use + free != capacity");
        if (pool.in_use != mapped[n])
            violations.push_back("node " + std::to_string(n) + ": " + std::to_string(pool.in_use) +
                                 " frames in use but " + std::to_string(mapped[n]) + " pages mapped");
    }

    for (std::size_t c = 0; c < tlbs_.size(); ++c) {
        std::lock_guard lock(tlbs_[c]->mutex);
        for (const auto& slot : tlbs_[c]->slots) {
            if (slot.page == 0) continue;
            const Pte* e = pte(slot.page);
            if (e == nullptr || e->frame.load() != slot.frame_word || e->remaps.load() != slot.remaps)
                violations.push_back("core " + std::to_string(c) + ": stale TLB entry for page " +
                                     std::to_string(slot.page));
        }
    }
    return violations;
}

}  // namespace pmig
