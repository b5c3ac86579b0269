#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pmig/faults.hpp"
#include "pmig/memory_model.hpp"

namespace pmig {

enum class MigrationMode { Async, Sync, SyncLight, SyncNoCopy };

std::string_view mode_name(MigrationMode mode) noexcept;
/// Accepts "async", "sync", "sync-light", "sync-no-copy".
std::optional<MigrationMode> parse_mode(std::string_view text) noexcept;
constexpr bool is_sync(MigrationMode m) noexcept { return m != MigrationMode::Async; }

struct EngineConfig {
    unsigned async_retry = 3;    // NR_MAX_MIGRATE_ASYNC_RETRY
    unsigned sync_retry = 7;     // NR_MAX_MIGRATE_SYNC_RETRY
    unsigned pages_retry = 10;   // NR_MAX_MIGRATE_PAGES_RETRY
    std::size_t native_batch = 512;
    std::size_t stat_chunk = 16;
    unsigned sync_spin_limit = 64;  // yields spent on a page lock held by a real thread
};

/// One system call. `nodes` empty with `pages` non-empty is a location query.
/// `mode` and `batch` are only read by move_pages2.
struct MigrationRequest {
    std::vector<PageId> pages;
    std::vector<NodeId> nodes;
    MigrationMode mode = MigrationMode::Sync;
    std::size_t batch = 512;
};

/// Who is calling: the core pays for the copy and the owner id takes page locks.
struct CallContext {
    CoreId core = 0;
    OwnerId owner = 0xE0000000u;
    const FaultPlan* faults = nullptr;
    const ContentionModel* contention = nullptr;
};

struct EngineStats {
    std::uint64_t pages_requested = 0;
    std::uint64_t pages_migrated = 0;  // includes pages already on their target
    std::uint64_t pages_failed = 0;
    std::uint64_t pages_skipped = 0;   // never attempted because the call aborted
    std::uint64_t rounds = 0;
    std::uint64_t batches = 0;         // migrate_pages_batch invocations
    std::uint64_t async_attempts = 0;
    std::uint64_t sync_retries = 0;
    std::uint64_t tlb_shootdowns = 0;
    std::uint64_t aborted = 0;         // 0/1 per call, summed when aggregated
    std::uint64_t copy_bytes = 0;
    double sim_ns = 0;

    EngineStats& operator+=(const EngineStats& o) noexcept;
};

struct PageAttempts {
    std::uint32_t async = 0;
    std::uint32_t sync = 0;
    friend bool operator==(const PageAttempts&, const PageAttempts&) = default;
};

struct MigrationResult {
    long ret = 0;
    std::vector<Status> status;
    EngineStats stats;
    std::vector<PageAttempts> attempts;  // per request index
};

struct StatResult {
    std::vector<Status> status;
    std::size_t batches = 0;
};

class MigrationEngine {
public:
    explicit MigrationEngine(MemoryModel& memory, EngineConfig config = {});

    /// Native semantics: MIGRATE_SYNC, batch 512, abort on the first failure.
    MigrationResult move_pages(const MigrationRequest& request, const CallContext& ctx = {});
    /// Partial migration: every error lands in `status` and the walk continues.
    MigrationResult move_pages2(const MigrationRequest& request, const CallContext& ctx = {});
    /// Location query, processed in chunks of `stat_chunk` pages.
    StatResult do_pages_stat(std::span<const PageId> pages) const;

    /// migrate_pages(2) over already isolated pages. Fault indices refer to
    /// positions in `pages`. Failed pages are put back before returning.
    MigrationResult migrate_pages_internal(std::span<const PageId> pages, NodeId target, MigrationMode mode,
                                           std::size_t cap, const CallContext& ctx = {});
    /// One migrate_pages_batch call with `passes` unmap passes. Failed pages are put back.
    MigrationResult migrate_pages_batch_internal(std::span<const PageId> pages, NodeId target, MigrationMode mode,
                                                 unsigned passes, const CallContext& ctx = {});

    const EngineConfig& config() const noexcept { return config_; }
    MemoryModel& memory() noexcept { return memory_; }

private:
    MemoryModel& memory_;
    EngineConfig config_;
};

}  // namespace pmig
