#include "pmig/btree.hpp"

#include <algorithm>
#include <cstring>
#include <thread>
#include <unordered_set>

#include "pmig/faults.hpp"

namespace pmig {

namespace {

constexpr std::uint16_t kInner = 0x1a;
constexpr std::uint16_t kLeaf = 0x2b;

// Lives in the frame's 64-byte metadata area so it migrates with the page.
struct NodeMeta {
    std::uint16_t kind;
    std::uint16_t count;
    std::uint32_t reserved;
    PageId next;  // right sibling, leaves only
};
static_assert(sizeof(NodeMeta) <= kPageMetaSize);

constexpr unsigned kReadLines = 3;
constexpr unsigned kWriteLines = 4;
constexpr unsigned kSplitLines = 32;

// Owner id used for single-threaded construction.
constexpr OwnerId kLoaderOwner = 0xB0000000u;

void backoff() { std::this_thread::yield(); }

}  // namespace

struct BTree::View {
    NodeMeta* meta = nullptr;
    std::uint64_t* keys = nullptr;
    std::uint64_t* slots = nullptr;  // values for leaves, child ids for inner nodes

    bool leaf() const noexcept { return meta->kind == kLeaf; }
    // Racy readers may see garbage; clamp so indexing stays inside the frame.
    std::uint16_t count() const noexcept {
        const std::uint16_t c = meta->count;
        return std::min<std::uint16_t>(c, kLeafCapacity);
    }
    /// First i with key <= keys[i].
    std::uint16_t lower_bound(std::uint64_t key) const noexcept {
        const std::uint16_t n = count();
        return static_cast<std::uint16_t>(std::lower_bound(keys, keys + n, key) - keys);
    }
    std::uint16_t child_index(std::uint64_t key) const noexcept {
        return std::min<std::uint16_t>(lower_bound(key), kInnerCapacity);
    }
};

BTree::BTree(MemoryModel& memory, Placement placement) : memory_(memory), placement_(placement) {
    if (placement_.kind == Placement::Kind::Fixed && !memory_.topology().valid_node(placement_.node))
        throw ConfigError("placement node " + std::to_string(placement_.node) + " does not exist");
    for (auto& h : hot_) h.store(0);
}

std::uint64_t BTree::key_of(std::uint64_t record, KeyOrder order) noexcept {
    // mix64 is a bijection, so uniform keys stay unique.
    return order == KeyOrder::Sequential ? record : mix64(record);
}

BTree::View BTree::view(PageId page, OpContext& ctx, AccessKind kind, unsigned lines) {
    const AccessResult r = memory_.access(ctx.core, page, kind, lines);
    ctx.ns += r.ns;
    View v;
    v.meta = reinterpret_cast<NodeMeta*>(r.meta);
    v.keys = reinterpret_cast<std::uint64_t*>(r.data);
    v.slots = reinterpret_cast<std::uint64_t*>(r.data + kPageSize / 2);
    return v;
}

BTree::View BTree::peek(PageId page) const {
    const auto frame = memory_.frame_of(page);
    if (!frame) throw UnmappedPage(page);
    std::byte* data = memory_.frame_data(*frame);
    View v;
    v.meta = reinterpret_cast<NodeMeta*>(memory_.frame_meta(*frame));
    v.keys = reinterpret_cast<std::uint64_t*>(data);
    v.slots = reinterpret_cast<std::uint64_t*>(data + kPageSize / 2);
    return v;
}

// The new page comes back locked by `owner`; it is unreachable until linked.
PageId BTree::alloc_node(bool leaf, OwnerId owner) {
    const auto nodes = static_cast<NodeId>(memory_.topology().node_count());
    NodeId first = placement_.node;
    if (placement_.kind == Placement::Kind::RoundRobin)
        first = static_cast<NodeId>(next_node_.fetch_add(1) % static_cast<std::uint64_t>(nodes));
    for (NodeId i = 0; i < nodes; ++i) {
        const NodeId node = (first + i) % nodes;
        PageId page = 0;
        try {
            page = memory_.alloc_page(node);
        } catch (const NodeExhausted&) {
            continue;
        }
        if (!memory_.try_lock_page(page, owner))
            throw Error("fresh page " + std::to_string(page) + " already locked");
        View v = peek(page);
        v.meta->kind = leaf ? kLeaf : kInner;
        v.meta->count = 0;
        v.meta->next = 0;
        if (leaf) {
            std::lock_guard lock(leaves_mutex_);
            leaves_.push_back(page);
        }
        return page;
    }
    throw CapacityExceeded("no memory node can hold another tree node");
}

bool BTree::read_lock(PageId page, std::uint64_t& version) const {
    version = memory_.version(page);
    return !memory_.is_locked(page) && memory_.state(page) == PageState::Mapped;
}

bool BTree::validate(PageId page, std::uint64_t version) const {
    return !memory_.is_locked(page) && memory_.version(page) == version;
}

bool BTree::upgrade(PageId page, std::uint64_t version, OwnerId owner) {
    if (!memory_.try_lock_page(page, owner)) return false;
    if (memory_.version(page) != version) {
        memory_.unlock_page(page, owner);
        return false;
    }
    return true;
}

void BTree::write_unlock(PageId page, OwnerId owner) {
    memory_.bump_version(page);
    memory_.unlock_page(page, owner);
}

// --- bulk load -----------------------------------------------------------

void BTree::load(std::uint64_t n, KeyOrder order) {
    std::vector<Entry> entries;
    entries.reserve(n);
    for (std::uint64_t r = 0; r < n; ++r) entries.emplace_back(key_of(r, order), value_of(r));
    if (order == KeyOrder::Uniform) std::sort(entries.begin(), entries.end());
    bulk_load(entries);
}

void BTree::bulk_load(std::span<const Entry> sorted) {
    if (root_.load() != 0) throw ConfigError("bulk_load on a non-empty tree");
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i - 1].first >= sorted[i].first) throw ConfigError("bulk_load input not sorted and unique");

    struct Built {
        PageId page;
        std::uint64_t max_key;
    };
    std::vector<Built> level;
    PageId prev = 0;
    std::size_t pos = 0;
    do {
        const PageId page = alloc_node(true, kLoaderOwner);
        View v = peek(page);
        const std::size_t take = std::min<std::size_t>(kLeafCapacity, sorted.size() - pos);
        for (std::size_t i = 0; i < take; ++i) {
            v.keys[i] = sorted[pos + i].first;
            v.slots[i] = sorted[pos + i].second;
        }
        v.meta->count = static_cast<std::uint16_t>(take);
        pos += take;
        if (prev != 0) peek(prev).meta->next = page;
        prev = page;
        level.push_back({page, take ? v.keys[take - 1] : 0});
    } while (pos < sorted.size());

    // Inner levels until one node remains; the root is always an inner node.
    do {
        std::vector<Built> up;
        for (std::size_t i = 0; i < level.size(); i += kInnerCapacity + 1) {
            const std::size_t take = std::min<std::size_t>(kInnerCapacity + 1, level.size() - i);
            const PageId page = alloc_node(false, kLoaderOwner);
            View v = peek(page);
            for (std::size_t c = 0; c < take; ++c) {
                v.slots[c] = level[i + c].page;
                if (c + 1 < take) v.keys[c] = level[i + c].max_key;
            }
            v.meta->count = static_cast<std::uint16_t>(take - 1);
            up.push_back({page, level[i + take - 1].max_key});
        }
        level = std::move(up);
    } while (level.size() > 1);
    root_.store(level.front().page);

    for (const PageId page : pages()) memory_.unlock_page(page, kLoaderOwner);
}

// --- point operations ----------------------------------------------------

bool BTree::find_leaf(std::uint64_t key, OpContext& ctx, PageId& leaf, std::uint64_t& version) {
    PageId node = root_.load();
    std::uint64_t v = 0;
    if (!read_lock(node, v)) return false;
    if (root_.load() != node) return false;
    for (;;) {
        View view_ = view(node, ctx, AccessKind::Read, kReadLines);
        if (view_.leaf()) {
            leaf = node;
            version = v;
            return true;
        }
        const PageId child = view_.slots[view_.child_index(key)];
        if (!validate(node, v)) return false;
        std::uint64_t vc = 0;
        if (!read_lock(child, vc)) return false;
        if (!validate(node, v)) return false;
        node = child;
        v = vc;
    }
}

int BTree::try_lookup(std::uint64_t key, OpContext& ctx, std::optional<std::uint64_t>& out) {
    PageId leaf = 0;
    std::uint64_t v = 0;
    if (!find_leaf(key, ctx, leaf, v)) return kRestart;
    View lv = view(leaf, ctx, AccessKind::Read, kReadLines);
    const std::uint16_t pos = lv.lower_bound(key);
    std::optional<std::uint64_t> found;
    if (pos < lv.count() && lv.keys[pos] == key) found = lv.slots[pos];
    if (!validate(leaf, v)) return kRestart;
    out = found;
    note_hot(leaf);
    return 0;
}

std::optional<std::uint64_t> BTree::lookup(std::uint64_t key, OpContext& ctx) {
    std::optional<std::uint64_t> out;
    while (try_lookup(key, ctx, out) == kRestart) {
        ++ctx.restarts;
        backoff();
    }
    return out;
}

int BTree::try_update(std::uint64_t key, std::uint64_t value, OpContext& ctx) {
    PageId leaf = 0;
    std::uint64_t v = 0;
    if (!find_leaf(key, ctx, leaf, v)) return kRestart;
    if (!upgrade(leaf, v, ctx.owner)) return kRestart;
    View lv = view(leaf, ctx, AccessKind::Write, kWriteLines);
    const std::uint16_t pos = lv.lower_bound(key);
    if (pos >= lv.count() || lv.keys[pos] != key) {
        memory_.unlock_page(leaf, ctx.owner);
        return 0;
    }
    lv.slots[pos] = value;
    write_unlock(leaf, ctx.owner);
    note_hot(leaf);
    return 1;
}

bool BTree::update(std::uint64_t key, std::uint64_t value, OpContext& ctx) {
    int r;
    while ((r = try_update(key, value, ctx)) == kRestart) {
        ++ctx.restarts;
        backoff();
    }
    return r == 1;
}

int BTree::try_insert(std::uint64_t key, std::uint64_t value, OpContext& ctx) {
    PageId node = root_.load();
    std::uint64_t vn = 0;
    if (!read_lock(node, vn)) return kRestart;
    if (root_.load() != node) return kRestart;
    PageId parent = 0;
    std::uint64_t vp = 0;

    for (;;) {
        View nv = view(node, ctx, AccessKind::Read, kReadLines);
        if (!nv.leaf()) {
            if (nv.meta->count >= kInnerCapacity) {
                // Split eagerly so the parent always has room for a separator.
                if (parent != 0 && !upgrade(parent, vp, ctx.owner)) return kRestart;
                if (!upgrade(node, vn, ctx.owner)) {
                    if (parent != 0) memory_.unlock_page(parent, ctx.owner);
                    return kRestart;
                }
                if (parent == 0 && root_.load() != node) {
                    memory_.unlock_page(node, ctx.owner);
                    return kRestart;
                }
                try {
                    split_inner(node, parent, ctx);
                } catch (...) {
                    memory_.unlock_page(node, ctx.owner);
                    if (parent != 0) memory_.unlock_page(parent, ctx.owner);
                    throw;
                }
                write_unlock(node, ctx.owner);
                if (parent != 0) write_unlock(parent, ctx.owner);
                return kRestart;
            }
            if (parent != 0 && !validate(parent, vp)) return kRestart;
            const PageId child = nv.slots[nv.child_index(key)];
            if (!validate(node, vn)) return kRestart;
            parent = node;
            vp = vn;
            node = child;
            if (!read_lock(node, vn)) return kRestart;
            if (!validate(parent, vp)) return kRestart;
            continue;
        }

        if (nv.meta->count >= kLeafCapacity) {
            if (parent == 0 || !upgrade(parent, vp, ctx.owner)) return kRestart;
            if (!upgrade(node, vn, ctx.owner)) {
                memory_.unlock_page(parent, ctx.owner);
                return kRestart;
            }
            try {
                split_leaf(node, parent, ctx);
            } catch (...) {
                memory_.unlock_page(node, ctx.owner);
                memory_.unlock_page(parent, ctx.owner);
                throw;
            }
            write_unlock(node, ctx.owner);
            write_unlock(parent, ctx.owner);
            return kRestart;
        }
        if (!upgrade(node, vn, ctx.owner)) return kRestart;
        if (parent != 0 && !validate(parent, vp)) {
            memory_.unlock_page(node, ctx.owner);
            return kRestart;
        }
        View lv = view(node, ctx, AccessKind::Write, kWriteLines);
        const std::uint16_t n = lv.count();
        const std::uint16_t pos = lv.lower_bound(key);
        if (pos < n && lv.keys[pos] == key) {
            memory_.unlock_page(node, ctx.owner);
            return 0;
        }
        std::memmove(lv.keys + pos + 1, lv.keys + pos, (n - pos) * sizeof(std::uint64_t));
        std::memmove(lv.slots + pos + 1, lv.slots + pos, (n - pos) * sizeof(std::uint64_t));
        lv.keys[pos] = key;
        lv.slots[pos] = value;
        lv.meta->count = static_cast<std::uint16_t>(n + 1);
        write_unlock(node, ctx.owner);
        note_hot(node);
        return 1;
    }
}

bool BTree::insert(std::uint64_t key, std::uint64_t value, OpContext& ctx) {
    int r;
    while ((r = try_insert(key, value, ctx)) == kRestart) {
        ++ctx.restarts;
        backoff();
    }
    return r == 1;
}

void BTree::insert_separator(const View& parent, std::uint64_t sep, PageId right) {
    const std::uint16_t n = parent.count();
    const std::uint16_t pos = parent.lower_bound(sep);
    std::memmove(parent.keys + pos + 1, parent.keys + pos, (n - pos) * sizeof(std::uint64_t));
    std::memmove(parent.slots + pos + 2, parent.slots + pos + 1, (n - pos) * sizeof(std::uint64_t));
    parent.keys[pos] = sep;
    parent.slots[pos + 1] = right;
    parent.meta->count = static_cast<std::uint16_t>(n + 1);
}

// Caller holds the locks on `node` and `parent` (parent 0 means node is the root).
void BTree::split_inner(PageId node, PageId parent, OpContext& ctx) {
    View left = view(node, ctx, AccessKind::Write, kSplitLines);
    const PageId right_page = alloc_node(false, ctx.owner);
    View right = view(right_page, ctx, AccessKind::Write, kSplitLines);
    const std::uint16_t n = left.count();
    const std::uint16_t mid = n / 2;
    const std::uint64_t sep = left.keys[mid];
    const std::uint16_t moved = static_cast<std::uint16_t>(n - mid - 1);
    std::memcpy(right.keys, left.keys + mid + 1, moved * sizeof(std::uint64_t));
    std::memcpy(right.slots, left.slots + mid + 1, (moved + 1) * sizeof(std::uint64_t));
    right.meta->count = moved;
    left.meta->count = mid;

    if (parent == 0) {
        const PageId new_root = alloc_node(false, ctx.owner);
        View r = view(new_root, ctx, AccessKind::Write, kWriteLines);
        r.keys[0] = sep;
        r.slots[0] = node;
        r.slots[1] = right_page;
        r.meta->count = 1;
        write_unlock(right_page, ctx.owner);
        root_.store(new_root);
        write_unlock(new_root, ctx.owner);
        return;
    }
    insert_separator(view(parent, ctx, AccessKind::Write, kWriteLines), sep, right_page);
    write_unlock(right_page, ctx.owner);
}

void BTree::split_leaf(PageId node, PageId parent, OpContext& ctx) {
    View left = view(node, ctx, AccessKind::Write, kSplitLines);
    const PageId right_page = alloc_node(true, ctx.owner);
    View right = view(right_page, ctx, AccessKind::Write, kSplitLines);
    const std::uint16_t n = left.count();
    const std::uint16_t keep = n / 2;
    const std::uint16_t moved = static_cast<std::uint16_t>(n - keep);
    std::memcpy(right.keys, left.keys + keep, moved * sizeof(std::uint64_t));
    std::memcpy(right.slots, left.slots + keep, moved * sizeof(std::uint64_t));
    right.meta->count = moved;
    right.meta->next = left.meta->next;
    left.meta->count = keep;
    left.meta->next = right_page;
    insert_separator(view(parent, ctx, AccessKind::Write, kWriteLines), left.keys[keep - 1], right_page);
    write_unlock(right_page, ctx.owner);
}

// --- scans -----------------------------------------------------------------

std::vector<BTree::Entry> BTree::scan(std::uint64_t start, std::size_t n, OpContext& ctx) {
    std::vector<Entry> out;
    out.reserve(n);
    std::uint64_t resume = start;
    bool exhausted = false;
    while (out.size() < n && !exhausted) {
        PageId leaf = 0;
        std::uint64_t v = 0;
        if (!find_leaf(resume, ctx, leaf, v)) {
            ++ctx.restarts;
            backoff();
            continue;
        }
        for (;;) {
            View lv = view(leaf, ctx, AccessKind::Read, kReadLines);
            const std::uint16_t c = lv.count();
            std::vector<Entry> chunk;
            for (std::uint16_t i = lv.lower_bound(resume); i < c && out.size() + chunk.size() < n; ++i)
                chunk.emplace_back(lv.keys[i], lv.slots[i]);
            const PageId next = lv.meta->next;
            if (!validate(leaf, v)) break;
            out.insert(out.end(), chunk.begin(), chunk.end());
            note_hot(leaf);
            if (!chunk.empty()) {
                if (chunk.back().first == std::numeric_limits<std::uint64_t>::max()) {
                    exhausted = true;
                    break;
                }
                resume = chunk.back().first + 1;
            }
            if (out.size() >= n) break;
            if (next == 0) {
                exhausted = true;
                break;
            }
            std::uint64_t vnext = 0;
            if (!read_lock(next, vnext) || !validate(leaf, v)) break;
            leaf = next;
            v = vnext;
        }
        if (out.size() < n && !exhausted) {
            ++ctx.restarts;
            backoff();
        }
    }
    return out;
}

// --- page sampling -------------------------------------------------------

void BTree::note_hot(PageId leaf) noexcept {
    const std::uint64_t slot = hot_pos_.fetch_add(1, std::memory_order_relaxed);
    hot_[slot % kHotRing].store(leaf, std::memory_order_relaxed);
}

std::vector<PageId> BTree::sample_pages(std::size_t n, LeafSelector selector, std::mt19937_64& rng,
                                        std::uint64_t lo, std::uint64_t hi) {
    std::vector<PageId> out;
    if (n == 0) return out;
    switch (selector) {
    case LeafSelector::RandomLeaf: {
        std::lock_guard lock(leaves_mutex_);
        std::sample(leaves_.begin(), leaves_.end(), std::back_inserter(out), n, rng);
        break;
    }
    case LeafSelector::HotLeaf: {
        std::unordered_set<PageId> seen;
        const std::uint64_t end = hot_pos_.load();
        const std::uint64_t span = std::min<std::uint64_t>(end, kHotRing);
        for (std::uint64_t i = 0; i < span && out.size() < n; ++i) {
            const PageId p = hot_[(end - 1 - i) % kHotRing].load(std::memory_order_relaxed);
            if (p != 0 && seen.insert(p).second) out.push_back(p);
        }
        if (out.size() < n) {
            // Top up from the registry when too few leaves were touched lately.
            std::vector<PageId> rest;
            {
                std::lock_guard lock(leaves_mutex_);
                for (PageId p : leaves_)
                    if (!seen.count(p)) rest.push_back(p);
            }
            std::vector<PageId> extra;
            std::sample(rest.begin(), rest.end(), std::back_inserter(extra), n - out.size(), rng);
            out.insert(out.end(), extra.begin(), extra.end());
        }
        break;
    }
    case LeafSelector::Subtree: {
        OpContext ctx;
        ctx.core = 0;
        for (;;) {
            out.clear();
            PageId leaf = 0;
            std::uint64_t v = 0;
            if (!find_leaf(lo, ctx, leaf, v)) {
                backoff();
                continue;
            }
            bool ok = true;
            while (out.size() < n) {
                View lv = view(leaf, ctx, AccessKind::Read, 1);
                const std::uint16_t c = lv.count();
                const bool beyond = c > 0 && lv.keys[0] > hi && !out.empty();
                const bool last = c > 0 && lv.keys[c - 1] >= hi;
                const PageId next = lv.meta->next;
                if (!validate(leaf, v)) {
                    ok = false;
                    break;
                }
                if (beyond) break;
                out.push_back(leaf);
                if (last || next == 0) break;
                std::uint64_t vn = 0;
                if (!read_lock(next, vn)) {
                    ok = false;
                    break;
                }
                leaf = next;
                v = vn;
            }
            if (ok) break;
            backoff();
        }
        break;
    }
    }
    return out;
}

// --- quiescent inspection --------------------------------------------------

std::size_t BTree::height() const {
    std::size_t h = 0;
    for (PageId p = root_.load(); p != 0;) {
        ++h;
        View v = peek(p);
        if (v.leaf()) break;
        p = v.slots[0];
    }
    return h;
}

std::size_t BTree::leaf_count() const {
    std::lock_guard lock(leaves_mutex_);
    return leaves_.size();
}

std::size_t BTree::inner_count() const { return pages().size() - leaf_count(); }

std::vector<PageId> BTree::pages() const {
    std::vector<PageId> out;
    if (root_.load() == 0) return out;
    std::vector<PageId> stack{root_.load()};
    while (!stack.empty()) {
        const PageId p = stack.back();
        stack.pop_back();
        out.push_back(p);
        View v = peek(p);
        if (!v.leaf())
            for (std::uint16_t i = 0; i <= v.count(); ++i) stack.push_back(v.slots[i]);
    }
    return out;
}

std::vector<std::uint64_t> BTree::pages_per_node() const {
    std::vector<std::uint64_t> counts(memory_.topology().node_count(), 0);
    for (PageId p : pages())
        if (auto n = memory_.node_of(p)) ++counts[static_cast<std::size_t>(*n)];
    return counts;
}

PageId BTree::leftmost_leaf() const {
    PageId p = root_.load();
    while (p != 0 && !peek(p).leaf()) p = peek(p).slots[0];
    return p;
}

std::vector<std::string> BTree::check_structure() const {
    std::vector<std::string> bad;
    const PageId root = root_.load();
    if (root == 0) return {"tree has no root"};
    if (peek(root).leaf()) bad.push_back("root is a leaf");

    struct Frame {
        PageId page;
        std::size_t depth;
        std::optional<std::uint64_t> lo;  // exclusive
        std::optional<std::uint64_t> hi;  // inclusive
    };
    std::vector<PageId> dfs_leaves;
    std::optional<std::size_t> leaf_depth;
    std::vector<Frame> stack{{root, 0, std::nullopt, std::nullopt}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        const std::string where = "page " + std::to_string(f.page);
        if (memory_.state(f.page) != PageState::Mapped) {
            bad.push_back(where + " is not mapped");
            continue;
        }
        if (memory_.is_locked(f.page)) bad.push_back(where + " is still locked");
        const View v = peek(f.page);
        if (v.meta->kind != kLeaf && v.meta->kind != kInner) {
            bad.push_back(where + " has no node header");
            continue;
        }
        const std::uint16_t c = v.meta->count;
        const std::uint16_t cap = v.leaf() ? kLeafCapacity : kInnerCapacity;
        if (c > cap) {
            bad.push_back(where + " overflows: " + std::to_string(c));
            continue;
        }
        for (std::uint16_t i = 0; i < c; ++i) {
            if (i > 0 && v.keys[i - 1] >= v.keys[i]) bad.push_back(where + " keys not strictly sorted");
            if ((f.lo && v.keys[i] <= *f.lo) || (f.hi && v.keys[i] > *f.hi))
                bad.push_back(where + " key " + std::to_string(v.keys[i]) + " outside its separator range");
        }
        if (v.leaf()) {
            if (leaf_depth && *leaf_depth != f.depth) bad.push_back(where + " leaf at uneven depth");
            leaf_depth = f.depth;
            dfs_leaves.push_back(f.page);
            continue;
        }
        // Push right to left so leaves pop in key order.
        for (int i = c; i >= 0; --i) {
            const auto lo = i == 0 ? f.lo : std::optional<std::uint64_t>(v.keys[i - 1]);
            const auto hi = i == c ? f.hi : std::optional<std::uint64_t>(v.keys[i]);
            stack.push_back({v.slots[i], f.depth + 1, lo, hi});
        }
    }

    std::vector<PageId> chain;
    for (PageId p = leftmost_leaf(); p != 0 && chain.size() <= dfs_leaves.size(); p = peek(p).meta->next)
        chain.push_back(p);
    if (chain != dfs_leaves) bad.push_back("leaf chain does not match the in-order leaf sequence");

    std::vector<PageId> registry;
    {
        std::lock_guard lock(leaves_mutex_);
        registry = leaves_;
    }
    std::sort(registry.begin(), registry.end());
    std::vector<PageId> sorted_leaves = dfs_leaves;
    std::sort(sorted_leaves.begin(), sorted_leaves.end());
    if (registry != sorted_leaves) bad.push_back("leaf registry differs from the reachable leaves");
    return bad;
}

std::vector<BTree::Entry> BTree::dump() const {
    std::vector<Entry> out;
    for (PageId p = leftmost_leaf(); p != 0;) {
        const View v = peek(p);
        for (std::uint16_t i = 0; i < v.count(); ++i) out.emplace_back(v.keys[i], v.slots[i]);
        p = v.meta->next;
    }
    return out;
}

}  // namespace pmig
