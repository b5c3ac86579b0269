#include <gtest/gtest.h>

#include <cstring>
#include <thread>

#include "pmig/memory_model.hpp"

using namespace pmig;

namespace {
bool has_flag(const MemoryModel& m, PageId p, std::uint8_t f) { return (m.flags(p) & f) != 0; }
}  // namespace

TEST(MemoryModel, FirstAllocationLandsOnPreferredNodeAndLru) {
    MemoryModel m(presets::dual_socket(16));
    const PageId p = m.alloc_page(0);
    EXPECT_EQ(m.node_of(p), 0);
    EXPECT_TRUE(has_flag(m, p, page_flags::kOnLru));
    EXPECT_EQ(m.version(p), 0u);
    EXPECT_EQ(m.lru_size(0), 1u);
    EXPECT_TRUE(m.check_invariants().empty());
}

TEST(MemoryModel, CapacityIsEnforcedPerNode) {
    MemoryModel m(presets::dual_socket(256));
    for (int i = 0; i < 256; ++i) ASSERT_NO_THROW(m.alloc_page(0));
    EXPECT_THROW(m.alloc_page(0), NodeExhausted);
    EXPECT_EQ(m.free_frames(0), 0u);
    EXPECT_EQ(m.frames_in_use(0), 256u);
    EXPECT_NO_THROW(m.alloc_page(1));
}

TEST(MemoryModel, FullNodeThrowsNodeExhausted) {
    MemoryModel m(presets::dual_socket(1));
    m.alloc_page(1);
    try {
        m.alloc_page(1);
        FAIL();
    } catch (const NodeExhausted& e) {
        EXPECT_EQ(e.node(), 1);
    }
}

TEST(MemoryModel, AccessChargesMatrixLatencyAndTlbSurcharge) {
    MemoryModel m(presets::dual_socket(16));
    const PageId local = m.alloc_page(0);
    const PageId remote = m.alloc_page(1);
    const CoreId core = 0;  // node 0
    auto first = m.access(core, local, AccessKind::Read);
    EXPECT_FALSE(first.tlb_hit);
    EXPECT_DOUBLE_EQ(first.ns, 100 + 50);
    auto second = m.access(core, local, AccessKind::Read);
    EXPECT_TRUE(second.tlb_hit);
    EXPECT_DOUBLE_EQ(second.ns, 100);
    EXPECT_EQ(m.counters().tlb_hits, 1u);
    auto far = m.access(core, remote, AccessKind::Read);
    EXPECT_DOUBLE_EQ(far.ns, 400 + 50);
    EXPECT_DOUBLE_EQ(m.access(core, remote, AccessKind::Read, 3).ns, 1200);
}

TEST(MemoryModel, AccessToUnmappedPageThrows) {
    MemoryModel m(presets::uma(4));
    EXPECT_THROW(m.access(0, 42, AccessKind::Read), UnmappedPage);
    const PageId p = m.alloc_page(0);
    m.free_page(p);
    EXPECT_THROW(m.access(0, p, AccessKind::Read), UnmappedPage);
    EXPECT_EQ(m.state(p), PageState::Freed);
    EXPECT_EQ(m.free_frames(0), 4u);
}

TEST(MemoryModel, FreedFramesAreReusedLowestFirst) {
    MemoryModel m(presets::uma(8));
    std::vector<PageId> pages;
    for (int i = 0; i < 4; ++i) pages.push_back(m.alloc_page(0));
    m.free_page(pages[2]);
    m.free_page(pages[1]);
    const PageId p = m.alloc_page(0);
    EXPECT_EQ(m.frame_of(p)->index, 1u);
}

TEST(MemoryModel, PageLocks) {
    MemoryModel m(presets::uma(4));
    const PageId p = m.alloc_page(0);
    EXPECT_TRUE(m.try_lock_page(p, 1));
    EXPECT_FALSE(m.try_lock_page(p, 2));
    EXPECT_THROW(m.unlock_page(p, 2), UnlockNotOwner);
    m.unlock_page(p, 1);
    EXPECT_TRUE(m.try_lock_page(p, 2));
    EXPECT_EQ(m.lock_owner(p), 2u);
}

TEST(MemoryModel, IsolationStateMachine) {
    MemoryModel m(presets::uma(4));
    const PageId p = m.alloc_page(0);
    EXPECT_TRUE(m.lru_isolate(p));
    EXPECT_TRUE(has_flag(m, p, page_flags::kIsolated));
    EXPECT_FALSE(has_flag(m, p, page_flags::kOnLru));
    EXPECT_FALSE(m.lru_isolate(p));
    EXPECT_EQ(m.isolated_count(), 1u);
    m.lru_putback(p);
    EXPECT_TRUE(m.lru_isolate(p));
    m.lru_putback(p);
    EXPECT_EQ(m.isolated_count(), 0u);
    EXPECT_TRUE(m.check_invariants().empty());
}

TEST(MemoryModel, ShootdownCounting) {
    MemoryModel m(presets::dual_socket(600));
    std::vector<PageId> pages;
    for (int i = 0; i < 512; ++i) pages.push_back(m.alloc_page(0));
    for (CoreId c : {0, 5, 25})
        for (PageId p : pages) m.access(c, p, AccessKind::Read);

    m.tlb_shootdown({});
    EXPECT_EQ(m.ipi_count(), 0u);
    EXPECT_EQ(m.shootdown_count(), 0u);

    m.tlb_shootdown(pages);
    EXPECT_EQ(m.ipi_count(), 1u);
    for (CoreId c : {0, 5, 25})
        for (PageId p : pages) EXPECT_FALSE(m.tlb_contains(c, p));

    const PageId a[] = {pages[0]};
    const PageId b[] = {pages[1]};
    m.tlb_shootdown(a);
    m.tlb_shootdown(b);
    EXPECT_EQ(m.ipi_count(), 3u);
    EXPECT_EQ(m.shootdown_count(), 3u);
}

TEST(MemoryModel, LruDisableIsABoolean) {
    MemoryModel m(presets::uma(8));
    m.set_lru_enabled(false);
    const PageId p = m.alloc_page(0);
    EXPECT_FALSE(has_flag(m, p, page_flags::kOnLru));
    EXPECT_EQ(m.lru_size(0), 0u);
    m.set_lru_enabled(false);
    m.set_lru_enabled(true);
    EXPECT_TRUE(m.lru_enabled());
    EXPECT_TRUE(has_flag(m, p, page_flags::kOnLru));
    const PageId q = m.alloc_page(0);
    EXPECT_TRUE(has_flag(m, q, page_flags::kOnLru));
    EXPECT_TRUE(m.check_invariants().empty());
}

TEST(MemoryModel, MigrationPrimitivesKeepInvariants) {
    MemoryModel m(presets::dual_socket(8));
    const PageId p = m.alloc_page(0);
    auto w = m.access(3, p, AccessKind::Write);
    std::memcpy(w.data, "payload", 8);
    ASSERT_TRUE(m.lru_isolate(p));
    ASSERT_TRUE(m.try_lock_page(p, 9));
    const auto fresh = m.try_alloc_frame(1);
    ASSERT_TRUE(fresh);
    const FrameRef old = m.install_migration_entry(p);
    EXPECT_EQ(m.state(p), PageState::MigrationEntry);
    const PageId set[] = {p};
    m.tlb_shootdown(set);
    m.copy_frame(old, *fresh);
    m.remap(p, *fresh);
    m.unlock_page(p, 9);
    m.free_frame(old);
    m.lru_putback(p);
    EXPECT_EQ(m.node_of(p), 1);
    EXPECT_EQ(m.version(p), 1u);
    EXPECT_EQ(std::memcmp(m.access(3, p, AccessKind::Read).data, "payload", 8), 0);
    EXPECT_EQ(m.lru_pages(1), std::vector<PageId>{p});
    EXPECT_TRUE(m.check_invariants().empty()) << m.check_invariants().front();
}

TEST(MemoryModel, InvariantCheckerFlagsStaleState) {
    MemoryModel m(presets::uma(8));
    const PageId p = m.alloc_page(0);
    ASSERT_TRUE(m.lru_isolate(p));
    EXPECT_FALSE(m.check_invariants().empty());
    m.lru_putback(p);
    ASSERT_TRUE(m.try_alloc_frame(0));  // leaked frame breaks conservation
    EXPECT_FALSE(m.check_invariants().empty());
}

TEST(MemoryModel, AccessWaitsOutMigrationEntry) {
    MemoryModel m(presets::dual_socket(8));
    const PageId p = m.alloc_page(0);
    ASSERT_TRUE(m.lru_isolate(p));
    const auto fresh = *m.try_alloc_frame(1);
    const FrameRef old = m.install_migration_entry(p);
    std::thread reader([&] {
        auto r = m.access(0, p, AccessKind::Read);
        EXPECT_EQ(r.frame, fresh);
        EXPECT_GE(r.ns, m.topology().costs().migration_entry_stall_ns);
    });
    for (int i = 0; i < 100; ++i) std::this_thread::yield();
    m.copy_frame(old, fresh);
    m.remap(p, fresh);
    m.free_frame(old);
    reader.join();
    m.lru_putback(p);
    EXPECT_TRUE(m.check_invariants().empty());
}

TEST(MemoryModel, ConcurrentAllocFreeConservesFrames) {
    MemoryModel m(presets::dual_socket(512));
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&m, t] {
            std::vector<PageId> mine;
            for (int i = 0; i < 2000; ++i) {
                if (mine.size() < 50) {
                    mine.push_back(m.alloc_page(t % 2));
                } else {
                    m.free_page(mine.back());
                    mine.pop_back();
                }
                m.access(t, mine.empty() ? m.alloc_page(0) : mine.front(), AccessKind::Read);
            }
        });
    }
    for (auto& th : threads) th.join();
    EXPECT_TRUE(m.check_invariants().empty());
    for (NodeId n : {0, 1}) EXPECT_EQ(m.frames_in_use(n) + m.free_frames(n), 512u);
}
