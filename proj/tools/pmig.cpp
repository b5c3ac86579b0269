#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "pmig/harness.hpp"
#include "verify.hpp"

using namespace pmig;

namespace {

struct Args {
    std::string topology = "dual-socket";
    std::string workload = "ycsb-a";
    std::vector<std::string> mig_loads;
    std::vector<std::string> mig_shares;
    std::vector<std::string> engines;
    std::vector<std::string> modes;
    std::vector<std::size_t> batches;
    std::size_t threads = 0;
    std::uint64_t records = 1'000'000;
    std::uint64_t ops = 20'000;
    std::uint64_t seed = 1;
    unsigned reps = 3;
    std::size_t pages_per_query = 512;
    std::string selector = "random-leaf";
    std::string dist = "zipfian";
    std::string csv;
};

void add_plan_options(CLI::App& cmd, Args& a) {
    cmd.add_option("--topology", a.topology, "Preset (dual-socket, uma, tiered, chiplet) or JSON file");
    cmd.add_option("--workload", a.workload, "ycsb-a | ycsb-c | ycsb-e");
    cmd.add_option("--mig-load", a.mig_loads, "low | medium | high (comma list)")->delimiter(',');
    cmd.add_option("--mig-share", a.mig_shares, "Explicit migration share(s) in [0,1]")->delimiter(',');
    cmd.add_option("--engine", a.engines, "move_pages | move_pages2 (comma list)")->delimiter(',');
    cmd.add_option("--mode", a.modes, "async | sync | sync-light | sync-no-copy (comma list)")->delimiter(',');
    cmd.add_option("--batch", a.batches, "move_pages2 batch cap(s)")->delimiter(',');
    cmd.add_option("--threads", a.threads, "Worker threads; 0 = one per simulated core");
    cmd.add_option("--records", a.records, "Records loaded before the run");
    cmd.add_option("--ops", a.ops, "Operations per run, migration queries included");
    cmd.add_option("--seed", a.seed, "Master seed");
    cmd.add_option("--reps", a.reps, "Repetitions per cell");
    cmd.add_option("--pages-per-query", a.pages_per_query, "Pages sampled per migration query");
    cmd.add_option("--selector", a.selector, "random-leaf | hot-leaf | subtree");
    cmd.add_option("--dist", a.dist, "zipfian | uniform");
    cmd.add_option("--csv", a.csv, "Write CSV here instead of stdout");
}

ExperimentPlan make_plan(const Args& a, bool sweep) {
    ExperimentPlan p;
    p.topology = a.topology;
    if (auto b = parse_base(a.workload)) p.workload = *b;
    else throw ConfigError("--workload: unknown preset '" + a.workload + "'");

    p.loads.clear();
    for (const auto& l : a.mig_loads) {
        auto load = parse_migration_load(l);
        if (!load) throw ConfigError("--mig-load: unknown load '" + l + "'");
        p.loads.push_back(*load);
    }
    for (const auto& s : a.mig_shares) {
        auto load = parse_migration_load(s);
        if (!load || migration_load_share(s)) throw ConfigError("--mig-share: '" + s + "' is not a number in [0, 1]");
        p.loads.push_back(*load);
    }
    if (p.loads.empty()) p.loads = sweep ? std::vector<MigrationLoad>{{"low", 0.0001}, {"medium", 0.25}, {"high", 0.5}}
                                         : std::vector<MigrationLoad>{{"high", 0.5}};

    p.variants.clear();
    for (const auto& e : a.engines) {
        auto v = parse_variant(e);
        if (!v) throw ConfigError("--engine: unknown engine '" + e + "'");
        p.variants.push_back(*v);
    }
    if (p.variants.empty())
        p.variants = sweep ? std::vector<EngineVariant>{EngineVariant::MovePages2}
                           : std::vector<EngineVariant>{EngineVariant::MovePages, EngineVariant::MovePages2};

    p.modes.clear();
    for (const auto& m : a.modes) {
        auto mode = parse_mode(m);
        if (!mode) throw ConfigError("--mode: unknown mode '" + m + "'");
        p.modes.push_back(*mode);
    }
    if (p.modes.empty()) p.modes = {MigrationMode::Async};

    p.batches = a.batches;
    if (p.batches.empty()) {
        if (sweep)
            for (std::size_t b = 32; b <= 16384; b *= 2) p.batches.push_back(b);
        else
            p.batches = {512};
    }

    p.threads = a.threads;
    p.records = a.records;
    p.ops = a.ops;
    p.seed = a.seed;
    p.reps = a.reps;
    p.pages_per_query = a.pages_per_query;
    if (a.selector == "random-leaf") p.selector = LeafSelector::RandomLeaf;
    else if (a.selector == "hot-leaf") p.selector = LeafSelector::HotLeaf;
    else if (a.selector == "subtree") p.selector = LeafSelector::Subtree;
    else throw ConfigError("--selector: unknown selector '" + a.selector + "'");
    if (a.dist == "zipfian") p.dist = KeyDist::Zipfian;
    else if (a.dist == "uniform") p.dist = KeyDist::Uniform;
    else throw ConfigError("--dist: unknown distribution '" + a.dist + "'");
    validate_plan(p);
    return p;
}

int execute(const Args& a, bool sweep) {
    const ExperimentPlan plan = make_plan(a, sweep);
    std::ofstream file;
    if (!a.csv.empty()) {
        file.open(a.csv);
        if (!file) throw ConfigError("--csv: cannot write '" + a.csv + "'");
    }
    std::ostream& out = a.csv.empty() ? std::cout : file;
    out << csv_header() << '\n' << std::flush;
    bool clean = true;
    const auto rows = run_plan(plan, [&](const RowResult& r) {
        out << to_csv(r.row) << '\n' << std::flush;
        for (const auto& v : r.violations) {
            std::cerr << "integrity violation (" << r.row.variant << ", rep " << r.row.rep << "): " << v << '\n';
            clean = false;
        }
    });
    std::cerr << "median over reps:\n";
    for (const auto& s : summarize(rows))
        std::cerr << "  " << s.variant << " " << s.mode << " batch=" << s.batch << " load=" << s.mig_load
                  << "  query_tput=" << s.query_tput << "  mig_tput=" << s.mig_tput << '\n';
    return clean ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Page-migration simulator: B+-tree workloads against move_pages and move_pages2"};
    app.require_subcommand(1);

    Args run_args, sweep_args;
    auto* run = app.add_subcommand("run", "Run one configuration (both engines by default)");
    add_plan_options(*run, run_args);
    auto* sweep = app.add_subcommand("sweep", "Sweep engines, modes, batch caps and migration loads");
    add_plan_options(*sweep, sweep_args);

    cli::VerifyOptions verify_opts;
    auto* verify = app.add_subcommand("verify", "Oracle equivalence, dominance and invariant checks");
    verify->add_flag("--quick", verify_opts.quick, "Smaller grids");
    verify->add_option("--seed", verify_opts.seed, "Seed for randomized checks");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return execute(run_args, false);
        if (sweep->parsed()) return execute(sweep_args, true);
        const auto verdicts = cli::run_verify(verify_opts, std::cout);
        for (const auto& v : verdicts)
            if (!v.passed) return 1;
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const MalformedConfig& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
