#include "verify.hpp"

#include <chrono>
#include <random>
#include <thread>

#include "check.hpp"
#include "dominance.hpp"
#include "pmig/harness.hpp"

namespace pmig::cli {

namespace {

Verdict grid(const std::string& name, const oracle::GridOptions& o) {
    const auto r = oracle::check_grid(o);
    Verdict v{name, r.mismatches == 0 && r.cases > 0,
              std::to_string(r.cases) + " cases, " + std::to_string(r.mismatches) + " mismatches"};
    if (!r.first_mismatch.empty()) v.detail += "; first: " + r.first_mismatch;
    return v;
}

Verdict dominance(std::uint64_t cases, std::uint64_t seed) {
    const auto r = oracle::check_dominance_suite(cases, seed, oracle::engine_runner());
    Verdict v{"dominance: move_pages2 >= move_pages", r.violations == 0,
              std::to_string(r.cases) + " cases, " + std::to_string(r.strict_cases) + " strict, " +
                  std::to_string(r.violations) + " violations"};
    if (r.violations) v.detail += "; first: " + r.first_violation;
    return v;
}

// A runner that loses one page in move_pages2 must be caught.
Verdict dominance_self_test(std::uint64_t seed) {
    const oracle::EngineRunner broken = [](const oracle::Scenario& s, bool native) {
        oracle::Outcome o = oracle::run_engine(s, native);
        if (!native && o.migrated > 0) --o.migrated;
        return o;
    };
    const auto r = oracle::check_dominance_suite(200, seed, broken);
    const bool named = r.first_violation.find("dominance violated") != std::string::npos;
    return {"dominance checker flags a broken engine", r.violations > 0 && named,
            std::to_string(r.violations) + " of " + std::to_string(r.cases) + " broken cases flagged"};
}

Verdict memory_churn(std::uint64_t seed) {
    MemoryModel m(presets::dual_socket(4096));
    MigrationEngine engine(m);
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            std::mt19937_64 rng(seed * 31 + t);
            std::vector<PageId> mine;
            for (int i = 0; i < 3000; ++i) {
                const auto r = rng() % 10;
                if (r < 5 || mine.empty()) {
                    mine.push_back(m.alloc_page(static_cast<NodeId>(rng() % 2)));
                } else if (r < 7) {
                    const std::size_t k = rng() % mine.size();
                    m.free_page(mine[k]);
                    mine[k] = mine.back();
                    mine.pop_back();
                } else {
                    MigrationRequest req;
                    for (std::size_t k = 0; k < 16 && k < mine.size(); ++k) {
                        req.pages.push_back(mine[rng() % mine.size()]);
                        req.nodes.push_back(static_cast<NodeId>(rng() % 2));
                    }
                    req.mode = rng() % 2 ? MigrationMode::Async : MigrationMode::Sync;
                    req.batch = 1 + rng() % 8;
                    CallContext cc;
                    cc.core = static_cast<CoreId>(t);
                    cc.owner = 0xE0000000u + t;
                    if (rng() % 2) engine.move_pages(req, cc);
                    else engine.move_pages2(req, cc);
                }
            }
        });
    for (auto& th : threads) th.join();
    auto bad = m.check_invariants();
    if (m.isolated_count()) bad.push_back("isolated pages remain");
    return {"memory model: conservation, coherence, isolation", bad.empty(),
            bad.empty() ? "after 12000 concurrent operations" : bad.front()};
}

Verdict tree_integrity(EngineVariant variant, std::uint64_t seed) {
    ExperimentPlan plan;
    plan.topology = "dual-socket";
    plan.workload = BaseMix::YcsbE;
    plan.records = 50'000;
    plan.ops = 4'000;
    plan.threads = 4;
    plan.seed = seed;
    const auto r = run_cell(plan, variant, MigrationMode::Async, 64, {"high", 0.5}, 0);
    const auto& bad = r.violations;
    return {std::string("btree + ") + std::string(variant_name(variant)) + ": structure, scan, conservation",
            bad.empty(),
            bad.empty() ? std::to_string(r.metrics.engine.pages_migrated) + " pages migrated under load"
                        : bad.front()};
}

}  // namespace

std::vector<Verdict> run_verify(const VerifyOptions& options, std::ostream& out) {
    std::vector<Verdict> all;
    auto record = [&](Verdict v) {
        out << (v.passed ? "PASS  " : "FAIL  ") << v.name << "  (" << v.detail << ")\n" << std::flush;
        all.push_back(std::move(v));
    };
    const oracle::GridOptions full{};
    const oracle::GridOptions small{4, 3, 1, 4};
    record(grid(options.quick ? "oracle equivalence, <=4 pages, <=3 nodes, <=1 failure"
                              : "oracle equivalence, <=8 pages, <=3 nodes, <=2 failures",
                options.quick ? small : full));
    record(grid("oracle equivalence, 6 pages, 2 nodes, 1 failure, every target vector", {6, 2, 1, 6}));
    record(dominance(options.quick ? 1000 : 10'000, options.seed));
    record(dominance_self_test(options.seed));
    record(memory_churn(options.seed));
    record(tree_integrity(EngineVariant::MovePages, options.seed));
    record(tree_integrity(EngineVariant::MovePages2, options.seed));
    return all;
}

}  // namespace pmig::cli
