#include "pmig/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "pmig/faults.hpp"

namespace pmig {

std::string_view base_name(BaseMix base) noexcept {
    switch (base) {
    case BaseMix::YcsbA: return "ycsb-a";
    case BaseMix::YcsbC: return "ycsb-c";
    case BaseMix::YcsbE: return "ycsb-e";
    }
    return "?";
}

std::optional<BaseMix> parse_base(std::string_view text) noexcept {
    if (text == "ycsb-a") return BaseMix::YcsbA;
    if (text == "ycsb-c") return BaseMix::YcsbC;
    if (text == "ycsb-e") return BaseMix::YcsbE;
    return std::nullopt;
}

std::string_view variant_name(EngineVariant v) noexcept {
    return v == EngineVariant::MovePages ? "move_pages" : "move_pages2";
}

std::optional<EngineVariant> parse_variant(std::string_view text) noexcept {
    if (text == "move_pages") return EngineVariant::MovePages;
    if (text == "move_pages2") return EngineVariant::MovePages2;
    return std::nullopt;
}

std::optional<double> migration_load_share(std::string_view name) noexcept {
    if (name == "low") return 0.0001;
    if (name == "medium") return 0.25;
    if (name == "high") return 0.5;
    return std::nullopt;
}

double WorkloadMix::write_share() const noexcept {
    const double ycsb = 1.0 - migration_share;
    switch (base) {
    case BaseMix::YcsbA: return 0.5 * ycsb;
    case BaseMix::YcsbC: return 0;
    case BaseMix::YcsbE: return 0.05 * ycsb;
    }
    return 0;
}

double unit_draw(std::mt19937_64& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// --- key choice ------------------------------------------------------------

ZipfianGenerator::ZipfianGenerator(std::uint64_t items, double theta) : items_(items), theta_(theta) {
    if (items == 0) throw ConfigError("zipfian over zero items");
    if (!(theta > 0 && theta < 1)) throw ConfigError("zipfian theta must lie in (0, 1)");
    zetan_ = 0;
    for (std::uint64_t i = 1; i <= items; ++i) zetan_ += 1.0 / std::pow(static_cast<double>(i), theta);
    const double zeta2 = 1.0 + std::pow(0.5, theta);
    alpha_ = 1.0 / (1.0 - theta);
    eta_ = (1.0 - std::pow(2.0 / static_cast<double>(items), 1.0 - theta)) / (1.0 - zeta2 / zetan_);
    half_pow_theta_ = std::pow(0.5, theta);
}

std::uint64_t ZipfianGenerator::rank(std::mt19937_64& rng) const noexcept {
    const double u = unit_draw(rng);
    const double uz = u * zetan_;
    if (uz < 1.0) return 0;
    if (uz < 1.0 + half_pow_theta_) return std::min<std::uint64_t>(1, items_ - 1);
    const auto r = static_cast<std::uint64_t>(static_cast<double>(items_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
    return std::min(r, items_ - 1);
}

std::uint64_t ZipfianGenerator::next(std::mt19937_64& rng) const noexcept {
    // FNV-1a over the rank's bytes, as YCSB scrambles.
    std::uint64_t h = 0xcbf29ce484222325ull;
    std::uint64_t r = rank(rng);
    for (int i = 0; i < 8; ++i) {
        h ^= r & 0xff;
        h *= 0x100000001b3ull;
        r >>= 8;
    }
    return h % items_;
}

KeyChooser::KeyChooser(std::uint64_t records, KeyDist dist, double theta) : records_(records), dist_(dist) {
    if (records == 0) throw ConfigError("key chooser needs at least one record");
    if (dist == KeyDist::Zipfian) zipf_.emplace(records, theta);
}

std::uint64_t KeyChooser::next(std::mt19937_64& rng) const noexcept {
    if (zipf_) return zipf_->next(rng);
    return rng() % records_;
}

Operation next_op(std::mt19937_64& rng, const WorkloadMix& mix, const KeyChooser& keys) {
    Operation op;
    const double u = unit_draw(rng);
    if (u < mix.migration_share) {
        op.kind = OpKind::Migrate;
        return op;
    }
    const double v = unit_draw(rng);
    switch (mix.base) {
    case BaseMix::YcsbA: op.kind = v < 0.5 ? OpKind::Read : OpKind::Update; break;
    case BaseMix::YcsbC: op.kind = OpKind::Read; break;
    case BaseMix::YcsbE: op.kind = v < 0.95 ? OpKind::Scan : OpKind::Insert; break;
    }
    if (op.kind != OpKind::Insert) op.record = keys.next(rng);
    if (op.kind == OpKind::Scan) op.scan_length = static_cast<std::uint32_t>(1 + rng() % 100);
    return op;
}

// --- driver ---------------------------------------------------------------

namespace {

struct Worker {
    RunMetrics metrics;
    double clock_ns = 0;
    std::uint64_t own_shootdowns = 0;
    std::uint64_t own_calls = 0;
};

void validate(const RunConfig& c) {
    if (c.threads == 0) throw ConfigError("threads must be at least 1");
    if (!(c.mix.migration_share >= 0 && c.mix.migration_share <= 1))
        throw ConfigError("migration share must lie in [0, 1]");
    if (c.migration.pages_per_query == 0) throw ConfigError("pages_per_query must be positive");
    if (c.migration.batch == 0) throw ConfigError("batch cap must be positive");
    if (c.records == 0) throw ConfigError("workload needs a loaded tree");
    if (c.contention.hold_base < 0 || c.contention.hold_per_write < 0 || c.contention.writeback_per_write < 0)
        throw ConfigError("contention probabilities must be non-negative");
}

}  // namespace

RunMetrics run_workload(BTree& tree, MigrationEngine& engine, const RunConfig& config) {
    validate(config);
    MemoryModel& memory = engine.memory();
    const Topology& topo = memory.topology();
    const KeyChooser keys(config.records, config.mix.dist, config.mix.theta);
    const double writes = config.mix.write_share();
    const double hold = std::min(1.0, config.contention.hold_base + config.contention.hold_per_write * writes);
    const double writeback = std::min(1.0, config.contention.writeback_per_write * writes);

    std::atomic<std::uint64_t> next_insert{config.records};
    std::atomic<std::uint64_t> total_shootdowns{0};
    std::atomic<std::uint64_t> total_calls{0};
    std::vector<Worker> workers(config.threads);

    auto body = [&](std::size_t w) {
        Worker& me = workers[w];
        RunMetrics& m = me.metrics;
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(w)};
        std::mt19937_64 rng(seq);
        const CoreId core = topo.spread_core(w);
        OpContext ctx{core, static_cast<OwnerId>(1 + w)};
        std::uint64_t ops = config.total_ops / config.threads + (w < config.total_ops % config.threads ? 1 : 0);
        std::uint64_t rr = 0;

        for (std::uint64_t i = 0; i < ops; ++i) {
            const Operation op = next_op(rng, config.mix, keys);
            if (op.kind == OpKind::Migrate) {
                const auto& knobs = config.migration;
                std::vector<PageId> sampled;
                if (knobs.selector == LeafSelector::Subtree)
                    sampled = tree.sample_pages(knobs.pages_per_query, knobs.selector, rng, keys.next(rng));
                else
                    sampled = tree.sample_pages(knobs.pages_per_query, knobs.selector, rng);

                std::vector<std::pair<NodeId, PageId>> plan;
                for (PageId p : sampled) {
                    const auto src = memory.node_of(p);
                    if (!src || topo.node_count() < 2) continue;
                    const auto pick = static_cast<NodeId>(rr++ % (topo.node_count() - 1));
                    plan.emplace_back(pick >= *src ? pick + 1 : pick, p);
                }
                std::stable_sort(plan.begin(), plan.end(),
                                 [](const auto& a, const auto& b) { return a.first < b.first; });
                MigrationRequest req;
                for (const auto& [node, page] : plan) {
                    req.pages.push_back(page);
                    req.nodes.push_back(node);
                }
                req.mode = knobs.mode;
                req.batch = knobs.batch;

                const ContentionModel contention{hold, writeback, mix64(config.seed ^ mix64((w << 40) ^ i))};
                CallContext cc;
                cc.core = core;
                cc.owner = 0xE0000000u + static_cast<OwnerId>(w);
                cc.contention = &contention;
                const MigrationResult r = knobs.variant == EngineVariant::MovePages ? engine.move_pages(req, cc)
                                                                                     : engine.move_pages2(req, cc);
                m.engine += r.stats;
                m.migration_ns += r.stats.sim_ns;
                me.clock_ns += r.stats.sim_ns;
                ++m.migration_queries;
                ++me.own_calls;
                me.own_shootdowns += r.stats.tlb_shootdowns;
                total_calls.fetch_add(1);
                total_shootdowns.fetch_add(r.stats.tlb_shootdowns);
                continue;
            }

            const double before = ctx.ns;
            switch (op.kind) {
            case OpKind::Read: tree.lookup(op.record, ctx); break;
            case OpKind::Update: tree.update(op.record, rng(), ctx); break;
            case OpKind::Scan: tree.scan(op.record, op.scan_length, ctx); break;
            case OpKind::Insert: {
                const std::uint64_t key = next_insert.fetch_add(1);
                if (tree.insert(key, BTree::value_of(key), ctx)) ++m.inserts;
                break;
            }
            case OpKind::Migrate: break;
            }
            const double spent = ctx.ns - before + config.op_overhead_ns;
            m.query_ns += spent;
            me.clock_ns += spent;
            ++m.query_ops;
        }
        m.restarts = ctx.restarts;
    };

    if (config.threads == 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < config.threads; ++w) pool.emplace_back(body, w);
        for (auto& t : pool) t.join();
    }

    const CostModel& costs = topo.costs();
    RunMetrics out;
    double slowest = 0;
    double query_rate = 0, page_rate = 0;  // per second, summed over workers
    for (Worker& me : workers) {
        const double stolen =
            static_cast<double>(total_shootdowns.load() - me.own_shootdowns) * costs.ipi_victim_ns +
            static_cast<double>(total_calls.load() - me.own_calls) * costs.lru_drain_victim_ns;
        me.clock_ns += stolen;
        slowest = std::max(slowest, me.clock_ns);
        const RunMetrics& m = me.metrics;
        if (me.clock_ns > 0) {
            query_rate += static_cast<double>(m.query_ops) * 1e9 / me.clock_ns;
            page_rate += static_cast<double>(m.engine.pages_migrated) * 1e9 / me.clock_ns;
        }
        out.query_ops += m.query_ops;
        out.migration_queries += m.migration_queries;
        out.inserts += m.inserts;
        out.restarts += m.restarts;
        out.engine += m.engine;
        out.query_ns += m.query_ns;
        out.migration_ns += m.migration_ns;
        out.stolen_ns += stolen;
    }
    out.sim_seconds = slowest * 1e-9;
    // Each worker runs at its own simulated rate for the whole run, as in a
    // fixed-duration benchmark, so machine throughput is the sum of the rates.
    out.query_throughput = query_rate;
    out.migration_throughput = page_rate;
    return out;
}

}  // namespace pmig
