#include "pmig/migration.hpp"

#include <algorithm>
#include <thread>

namespace pmig {

std::string_view mode_name(MigrationMode mode) noexcept {
    switch (mode) {
        case MigrationMode::Async: return "async";
        case MigrationMode::Sync: return "sync";
        case MigrationMode::SyncLight: return "sync-light";
        case MigrationMode::SyncNoCopy: return "sync-no-copy";
    }
    return "?";
}

std::optional<MigrationMode> parse_mode(std::string_view text) noexcept {
    for (auto m : {MigrationMode::Async, MigrationMode::Sync, MigrationMode::SyncLight, MigrationMode::SyncNoCopy})
        if (mode_name(m) == text) return m;
    return std::nullopt;
}

EngineStats& EngineStats::operator+=(const EngineStats& o) noexcept {
    pages_requested += o.pages_requested;
    pages_migrated += o.pages_migrated;
    pages_failed += o.pages_failed;
    pages_skipped += o.pages_skipped;
    rounds += o.rounds;
    batches += o.batches;
    async_attempts += o.async_attempts;
    sync_retries += o.sync_retries;
    tlb_shootdowns += o.tlb_shootdowns;
    aborted += o.aborted;
    copy_bytes += o.copy_bytes;
    sim_ns += o.sim_ns;
    return *this;
}

namespace {

struct Item {
    PageId page;
    std::size_t index;  // position in the caller's request
};

// State of one engine call: counters, per-page attempts and the simulated clock.
class Call {
public:
    Call(MemoryModel& mem, const EngineConfig& cfg, const CallContext& ctx, std::size_t n)
        : mem_(mem), cfg_(cfg), ctx_(ctx), topo_(mem.topology()), costs_(topo_.costs()) {
        attempts.resize(n);
        stats.pages_requested = n;
        home_ = topo_.core_node(ctx.core);
    }

    EngineStats stats;
    std::vector<PageAttempts> attempts;
    std::uint64_t moved = 0;

    void charge(double ns) noexcept { stats.sim_ns += ns; }

    bool injected(std::size_t index, FaultPhase phase, std::uint32_t attempt) const noexcept {
        return ctx_.faults != nullptr && ctx_.faults->fires(index, phase, attempt);
    }

    void enter() {
        charge(costs_.syscall_ns + costs_.lru_drain_ns);
        mem_.set_lru_enabled(false);
    }
    void leave() { mem_.set_lru_enabled(true); }

    // add_page_for_migration: 1 queued, 0 already on `node`, negative errno otherwise.
    Status add_page(const Item& it, NodeId node, std::vector<Item>& list) {
        charge(costs_.page_op_ns);
        switch (mem_.state(it.page)) {
            case PageState::Invalid: return kEFault;
            case PageState::Freed: return kENoEnt;
            case PageState::MigrationEntry: return kEBusy;
            case PageState::Mapped: break;
        }
        const auto frame = mem_.frame_of(it.page);
        if (!frame) return kEBusy;
        if (frame->node == node) return 0;
        if (injected(it.index, FaultPhase::Isolate, 1) || !mem_.lru_isolate(it.page)) return kEBusy;
        list.push_back(it);
        return 1;
    }

    // migrate_pages / migrate_pages2. `out` receives node or errno per item.
    long migrate_pages(std::span<const Item> items, NodeId target, MigrationMode mode, std::size_t cap,
                       std::span<Status> out) {
        long rc_gather = 0;
        for (std::size_t off = 0; off < items.size(); off += cap) {
            const std::size_t len = std::min(cap, items.size() - off);
            const auto sub = items.subspan(off, len);
            const auto sub_out = out.subspan(off, len);
            const long rc = mode == MigrationMode::Sync
                                ? migrate_pages_sync(sub, target, sub_out)
                                : migrate_pages_batch(sub, target, mode, cfg_.pages_retry, sub_out, nullptr);
            if (rc < 0) {
                std::fill(out.begin() + static_cast<std::ptrdiff_t>(off + len), out.end(), kENoMem);
                rc_gather = rc;
                break;
            }
            rc_gather += rc;
        }
        putback_failed(items, out);
        return rc_gather;
    }

    void putback_failed(std::span<const Item> items, std::span<const Status> out) {
        for (std::size_t k = 0; k < items.size(); ++k)
            if (out[k] < 0) mem_.lru_putback(items[k].page);
    }

    // Async pass over the whole sub-group, then each leftover page alone in
    // sync mode. Leftovers are visited the way the kernel relinks its lists:
    // pages still waiting on EAGAIN first, then permanent failures in the
    // order they failed.
    long migrate_pages_sync(std::span<const Item> items, NodeId target, std::span<Status> out) {
        std::vector<std::size_t> leftovers;
        const long rc = migrate_pages_batch(items, target, MigrationMode::Async, cfg_.async_retry, out, &leftovers);
        if (rc < 0) return rc;
        long nr_failed = 0;
        for (std::size_t k = 0; k < leftovers.size(); ++k) {
            const std::size_t pos = leftovers[k];
            const long r = migrate_pages_batch(items.subspan(pos, 1), target, MigrationMode::Sync, cfg_.sync_retry,
                                               out.subspan(pos, 1), nullptr);
            if (r < 0) {
                for (std::size_t j = k + 1; j < leftovers.size(); ++j) out[leftovers[j]] = kENoMem;
                return r;
            }
            nr_failed += r;
        }
        return nr_failed;
    }

    // Returns the number of failed pages, or kENoMem once allocation failed.
    // `leftovers`, when given, receives the failed positions in kernel list order.
    long migrate_pages_batch(std::span<const Item> items, NodeId target, MigrationMode mode, unsigned passes,
                             std::span<Status> out, std::vector<std::size_t>* leftovers) {
        struct Unmapped {
            std::size_t pos;
            FrameRef old;
            FrameRef fresh;
        };
        ++stats.batches;
        const bool async = mode == MigrationMode::Async;
        std::vector<std::size_t> pending(items.size());
        for (std::size_t k = 0; k < pending.size(); ++k) pending[k] = k;
        std::vector<Unmapped> unmapped;
        std::vector<std::size_t> permanent;
        long failed = 0;
        bool enomem = false;

        auto fail = [&](std::size_t pos, Status code) {
            out[pos] = code;
            ++failed;
        };

        for (unsigned pass = 0; pass < passes && !pending.empty(); ++pass) {
            std::vector<std::size_t> retry;
            for (std::size_t k = 0; k < pending.size(); ++k) {
                const std::size_t pos = pending[k];
                const Item& it = items[pos];
                auto& a = attempts[it.index];
                if (async) {
                    ++a.async;
                    ++stats.async_attempts;
                } else {
                    ++a.sync;
                    ++stats.sync_retries;
                }
                const std::uint32_t attempt = a.async + a.sync;
                charge(costs_.page_op_ns);

                if (!lock_page(it, attempt, async)) {
                    retry.push_back(pos);
                    continue;
                }
                const bool writeback = injected(it.index, FaultPhase::Writeback, attempt) ||
                                       (ctx_.contention != nullptr && ctx_.contention->under_writeback(it.page)) ||
                                       mem_.under_writeback(it.page);
                if (writeback) {
                    if (mode == MigrationMode::Async || mode == MigrationMode::SyncLight) {
                        mem_.unlock_page(it.page, ctx_.owner);
                        fail(pos, kEBusy);
                        permanent.push_back(pos);
                        continue;
                    }
                    charge(costs_.writeback_wait_ns);
                }
                const auto fresh = injected(it.index, FaultPhase::Alloc, attempt) ? std::nullopt
                                                                                   : mem_.try_alloc_frame(target);
                if (!fresh) {
                    mem_.unlock_page(it.page, ctx_.owner);
                    fail(pos, kENoMem);
                    for (std::size_t j = k + 1; j < pending.size(); ++j) fail(pending[j], kENoMem);
                    for (std::size_t pos2 : retry) fail(pos2, kENoMem);
                    retry.clear();
                    enomem = true;
                    break;
                }
                const FrameRef old = mem_.install_migration_entry(it.page);
                if (!async) {
                    const PageId one[] = {it.page};
                    shootdown(one);
                }
                unmapped.push_back({pos, old, *fresh});
            }
            pending = std::move(retry);
            if (enomem) break;
        }
        for (std::size_t pos : pending) fail(pos, kEBusy);
        if (leftovers != nullptr) {
            *leftovers = pending;
            leftovers->insert(leftovers->end(), permanent.begin(), permanent.end());
        }

        // Move phase.
        if (async && !unmapped.empty()) {
            std::vector<PageId> ids;
            ids.reserve(unmapped.size());
            for (const auto& u : unmapped) ids.push_back(items[u.pos].page);
            shootdown(ids);
        }
        const double cached_pages = costs_.migration_cache_bytes / (2.0 * kPageSize);
        const double evicted = std::max(0.0, static_cast<double>(unmapped.size()) - cached_pages);
        charge(evicted * costs_.meta_miss_lines * topo_.latency(home_, home_));
        for (const auto& u : unmapped) {
            const PageId page = items[u.pos].page;
            mem_.copy_frame(u.old, u.fresh);
            if (mode != MigrationMode::SyncNoCopy) {
                stats.copy_bytes += kPageSize;
                charge(static_cast<double>(kPageSize / kCacheLine) *
                       (topo_.latency(home_, u.old.node) + topo_.latency(home_, target)) / costs_.copy_mlp);
            }
            mem_.remap(page, u.fresh);
            charge(costs_.remap_ns);
            mem_.unlock_page(page, ctx_.owner);
            mem_.free_frame(u.old);
            mem_.lru_putback(page);
            out[u.pos] = target;
            ++moved;
        }
        return enomem ? static_cast<long>(kENoMem) : failed;
    }

private:
    bool lock_page(const Item& it, std::uint32_t attempt, bool async) {
        const bool held = injected(it.index, FaultPhase::Lock, attempt) ||
                          (ctx_.contention != nullptr && ctx_.contention->lock_held(it.page));
        if (held) {
            if (!async) charge(costs_.sync_lock_wait_ns);
            return false;
        }
        if (mem_.try_lock_page(it.page, ctx_.owner)) return true;
        if (async) return false;
        for (unsigned s = 0; s < cfg_.sync_spin_limit; ++s) {
            std::this_thread::yield();
            if (mem_.try_lock_page(it.page, ctx_.owner)) return true;
        }
        return false;
    }

    void shootdown(std::span<const PageId> pages) {
        mem_.tlb_shootdown(pages);
        ++stats.tlb_shootdowns;
        charge(costs_.ipi_base_ns + costs_.ipi_per_core_ns * static_cast<double>(topo_.core_count()));
    }

    MemoryModel& mem_;
    const EngineConfig& cfg_;
    const CallContext& ctx_;
    const Topology& topo_;
    const CostModel& costs_;
    NodeId home_ = 0;
};

void validate(const MigrationRequest& req) {
    if (!req.nodes.empty() && req.nodes.size() != req.pages.size())
        throw ConfigError("pages and nodes differ in length");
}

}  // namespace

MigrationEngine::MigrationEngine(MemoryModel& memory, EngineConfig config) : memory_(memory), config_(config) {
    if (config_.native_batch == 0 || config_.stat_chunk == 0) throw ConfigError("batch sizes must be positive");
}

StatResult MigrationEngine::do_pages_stat(std::span<const PageId> pages) const {
    StatResult result;
    result.status.reserve(pages.size());
    for (std::size_t off = 0; off < pages.size(); off += config_.stat_chunk) {
        ++result.batches;
        const std::size_t end = std::min(pages.size(), off + config_.stat_chunk);
        for (std::size_t k = off; k < end; ++k) {
            const PageId p = pages[k];
            if (!memory_.ever_allocated(p)) {
                result.status.push_back(kEFault);
                continue;
            }
            const auto node = memory_.node_of(p);
            result.status.push_back(node ? *node : kENoEnt);
        }
    }
    return result;
}

namespace {

MigrationResult stat_query(const MigrationEngine& engine, const MigrationRequest& req) {
    MigrationResult r;
    r.status = engine.do_pages_stat(req.pages).status;
    r.stats.pages_requested = req.pages.size();
    r.attempts.resize(req.pages.size());
    return r;
}

}  // namespace

MigrationResult MigrationEngine::move_pages(const MigrationRequest& req, const CallContext& ctx) {
    validate(req);
    if (req.nodes.empty() && !req.pages.empty()) return stat_query(*this, req);

    const std::size_t n = req.pages.size();
    Call call(memory_, config_, ctx, n);
    MigrationResult result;
    result.status.assign(n, kUnset);
    auto& status = result.status;
    if (n == 0) {
        result.attempts = std::move(call.attempts);
        return result;
    }

    std::vector<Item> pagelist;
    NodeId current = kNoNode;
    std::size_t start = 0;
    std::size_t i = 0;
    long err = 0;
    bool aborted = false;
    std::uint64_t in_place = 0;
    std::uint64_t failed = 0;

    // move_pages_and_store_status: statuses stored only when the round fully succeeds.
    auto flush = [&](std::size_t upto) -> long {
        if (pagelist.empty()) return 0;
        ++call.stats.rounds;
        std::vector<Status> out(pagelist.size(), kUnset);
        long rc = call.migrate_pages(pagelist, current, MigrationMode::Sync, config_.native_batch, out);
        pagelist.clear();
        for (Status s : out)
            if (s < 0) ++failed;
        if (rc != 0) {
            if (rc > 0) rc += static_cast<long>(n - upto);
            return rc;
        }
        for (std::size_t k = start; k < upto; ++k) status[k] = current;
        return 0;
    };

    call.enter();
    for (i = 0; i < n; ++i) {
        if (call.injected(i, FaultPhase::CopyIn, 1)) {
            err = kEFault;
            aborted = true;
            goto out_flush;
        }
        {
            const NodeId node = req.nodes[i];
            if (!memory_.topology().valid_node(node)) {
                err = kEInvalNode;
                aborted = true;
                goto out_flush;
            }
            if (current == kNoNode) {
                current = node;
                start = i;
            } else if (node != current) {
                err = flush(i);
                if (err) {
                    aborted = true;
                    goto out;
                }
                start = i;
                current = node;
            }
            err = call.add_page({req.pages[i], i}, current, pagelist);
            if (err > 0) continue;
            status[i] = err ? static_cast<Status>(err) : current;
            if (err) ++failed;
            else ++in_place;
            err = flush(i);
            if (err) {
                aborted = true;
                goto out;
            }
            current = kNoNode;
        }
    }
out_flush: {
    const long err1 = flush(i);
    if (err >= 0) err = err1;
}
out:
    call.leave();

    call.stats.pages_migrated = call.moved + in_place;
    call.stats.pages_failed = failed;
    call.stats.pages_skipped = n - call.stats.pages_migrated - failed;
    call.stats.aborted = aborted ? 1 : 0;
    result.ret = err;
    result.stats = call.stats;
    result.attempts = std::move(call.attempts);
    return result;
}

MigrationResult MigrationEngine::move_pages2(const MigrationRequest& req, const CallContext& ctx) {
    validate(req);
    if (req.batch == 0) throw ConfigError("nr_max_batched_migration must be positive");
    if (req.nodes.empty() && !req.pages.empty()) return stat_query(*this, req);

    const std::size_t n = req.pages.size();
    Call call(memory_, config_, ctx, n);
    MigrationResult result;
    result.status.assign(n, kUnset);
    auto& status = result.status;
    if (n == 0) {
        result.attempts = std::move(call.attempts);
        return result;
    }

    std::vector<Item> pagelist;
    NodeId current = kNoNode;

    // move_pages_and_store_status2: every queued page gets its own outcome.
    auto flush = [&]() {
        if (pagelist.empty()) return;
        ++call.stats.rounds;
        std::vector<Status> out(pagelist.size(), kUnset);
        call.migrate_pages(pagelist, current, req.mode, req.batch, out);
        for (std::size_t k = 0; k < pagelist.size(); ++k) status[pagelist[k].index] = out[k];
        pagelist.clear();
    };

    call.enter();
    for (std::size_t i = 0; i < n; ++i) {
        const NodeId node = req.nodes[i];
        Status early = 0;
        if (call.injected(i, FaultPhase::CopyIn, 1)) early = kEFault;
        else if (!memory_.topology().valid_node(node)) early = kEInvalNode;
        if (early != 0) {
            // handle_error
            status[i] = early;
            flush();
            current = kNoNode;
            continue;
        }
        if (current == kNoNode) {
            current = node;
        } else if (node != current) {
            flush();
            current = node;
        }
        const Status err = call.add_page({req.pages[i], i}, current, pagelist);
        if (err > 0) continue;
        status[i] = err ? err : current;
    }
    if (current != kNoNode) flush();
    call.leave();

    std::uint64_t migrated = 0;
    for (Status s : status)
        if (s >= 0) ++migrated;
    call.stats.pages_migrated = migrated;
    call.stats.pages_failed = n - migrated;
    result.ret = static_cast<long>(n - migrated);
    result.stats = call.stats;
    result.attempts = std::move(call.attempts);
    return result;
}

namespace {

std::vector<Item> items_of(std::span<const PageId> pages) {
    std::vector<Item> items;
    items.reserve(pages.size());
    for (std::size_t k = 0; k < pages.size(); ++k) items.push_back({pages[k], k});
    return items;
}

MigrationResult finish(Call& call, long rc, std::vector<Status> out) {
    MigrationResult r;
    r.ret = rc;
    call.stats.pages_migrated = call.moved;
    call.stats.pages_failed = call.stats.pages_requested - call.moved;
    r.stats = call.stats;
    r.status = std::move(out);
    r.attempts = std::move(call.attempts);
    return r;
}

}  // namespace

MigrationResult MigrationEngine::migrate_pages_internal(std::span<const PageId> pages, NodeId target,
                                                        MigrationMode mode, std::size_t cap,
                                                        const CallContext& ctx) {
    if (cap == 0) throw ConfigError("batch cap must be positive");
    if (!memory_.topology().valid_node(target)) throw ConfigError("invalid target node");
    Call call(memory_, config_, ctx, pages.size());
    const auto items = items_of(pages);
    std::vector<Status> out(items.size(), kUnset);
    const long rc = call.migrate_pages(items, target, mode, cap, out);
    return finish(call, rc, std::move(out));
}

MigrationResult MigrationEngine::migrate_pages_batch_internal(std::span<const PageId> pages, NodeId target,
                                                              MigrationMode mode, unsigned passes,
                                                              const CallContext& ctx) {
    if (!memory_.topology().valid_node(target)) throw ConfigError("invalid target node");
    Call call(memory_, config_, ctx, pages.size());
    const auto items = items_of(pages);
    std::vector<Status> out(items.size(), kUnset);
    const long rc = call.migrate_pages_batch(items, target, mode, passes, out, nullptr);
    call.putback_failed(items, out);
    return finish(call, rc, std::move(out));
}

}  // namespace pmig
