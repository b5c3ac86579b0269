#include "pmig/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <tuple>

#include "pmig/faults.hpp"

namespace pmig {

std::optional<MigrationLoad> parse_migration_load(std::string_view text) {
    if (auto share = migration_load_share(text)) return MigrationLoad{std::string(text), *share};
    const std::string s(text);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !(v >= 0 && v <= 1)) return std::nullopt;
    return MigrationLoad{s, v};
}

Topology resolve_topology(const std::string& name) {
    if (name == "dual-socket") return presets::dual_socket();
    if (name == "uma") return presets::uma();
    if (name == "tiered") return presets::tiered();
    if (name == "chiplet") return presets::chiplet();
    if (!std::filesystem::exists(name))
        throw ConfigError("topology: '" + name + "' is neither a preset nor a readable file");
    return load_topology(name);
}

void validate_plan(const ExperimentPlan& plan) {
    if (plan.loads.empty()) throw ConfigError("plan.loads is empty");
    if (plan.variants.empty()) throw ConfigError("plan.variants is empty");
    if (plan.modes.empty()) throw ConfigError("plan.modes is empty");
    if (plan.batches.empty()) throw ConfigError("plan.batches is empty");
    if (plan.reps < 1) throw ConfigError("plan.reps must be at least 1");
    if (plan.records == 0) throw ConfigError("plan.records must be positive");
    if (plan.pages_per_query == 0) throw ConfigError("plan.pages_per_query must be positive");
    for (std::size_t b : plan.batches)
        if (b == 0) throw ConfigError("plan.batches contains 0");
    for (const auto& l : plan.loads)
        if (!(l.share >= 0 && l.share <= 1)) throw ConfigError("plan.loads share out of [0, 1]: " + l.label);
}

// --- CSV -------------------------------------------------------------------

std::string csv_header() {
    return "variant,mode,batch,mig_load,threads,seed,rep,query_tput,mig_tput,pages_migrated,pages_failed,"
           "rounds,batches,shootdowns,aborted_calls";
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::uint64_t parse_u64(std::string_view field, const char* name) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw ConfigError(std::string("csv: bad ") + name + " '" + std::string(field) + "'");
    return v;
}

double parse_f64(std::string_view field, const char* name) {
    const std::string s(field);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw ConfigError(std::string("csv: bad ") + name + " '" + s + "'");
    return v;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_csv(const CsvRow& r) {
    std::string s;
    s += r.variant + ',' + r.mode + ',' + std::to_string(r.batch) + ',' + r.mig_load + ',';
    s += std::to_string(r.threads) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.rep) + ',';
    s += fmt_double(r.query_tput) + ',' + fmt_double(r.mig_tput) + ',';
    s += std::to_string(r.pages_migrated) + ',' + std::to_string(r.pages_failed) + ',';
    s += std::to_string(r.rounds) + ',' + std::to_string(r.batches) + ',';
    s += std::to_string(r.shootdowns) + ',' + std::to_string(r.aborted_calls);
    return s;
}

CsvRow parse_csv_row(std::string_view line) {
    const auto f = split(line);
    if (f.size() != 15) throw ConfigError("csv: expected 15 columns, got " + std::to_string(f.size()));
    CsvRow r;
    r.variant = f[0];
    r.mode = f[1];
    r.batch = parse_u64(f[2], "batch");
    r.mig_load = f[3];
    r.threads = parse_u64(f[4], "threads");
    r.seed = parse_u64(f[5], "seed");
    r.rep = parse_u64(f[6], "rep");
    r.query_tput = parse_f64(f[7], "query_tput");
    r.mig_tput = parse_f64(f[8], "mig_tput");
    r.pages_migrated = parse_u64(f[9], "pages_migrated");
    r.pages_failed = parse_u64(f[10], "pages_failed");
    r.rounds = parse_u64(f[11], "rounds");
    r.batches = parse_u64(f[12], "batches");
    r.shootdowns = parse_u64(f[13], "shootdowns");
    r.aborted_calls = parse_u64(f[14], "aborted_calls");
    return r;
}

// --- running ------------------------------------------------------------------

std::vector<std::string> integrity_violations(const MemoryModel& memory, const BTree& tree,
                                              std::uint64_t expected_keys) {
    std::vector<std::string> bad = memory.check_invariants();
    if (memory.isolated_count() != 0)
        bad.push_back(std::to_string(memory.isolated_count()) + " pages still isolated");
    for (auto& v : tree.check_structure()) bad.push_back("tree: " + v);
    const auto entries = tree.dump();
    if (entries.size() != expected_keys)
        bad.push_back("scan returned " + std::to_string(entries.size()) + " keys, expected " +
                      std::to_string(expected_keys));
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].first != i) {
            bad.push_back("scan key " + std::to_string(i) + " is " + std::to_string(entries[i].first));
            break;
        }
    return bad;
}

RowResult run_cell(const ExperimentPlan& plan, EngineVariant variant, MigrationMode mode, std::size_t batch,
                   const MigrationLoad& load, unsigned rep) {
    validate_plan(plan);
    MemoryModel memory(resolve_topology(plan.topology));
    MigrationEngine engine(memory);
    BTree tree(memory);
    tree.load(plan.records);

    RunConfig rc;
    rc.threads = plan.threads ? plan.threads : memory.topology().core_count();
    rc.total_ops = plan.ops;
    rc.mix = WorkloadMix{plan.workload, load.share, plan.dist};
    rc.migration.variant = variant;
    rc.migration.mode = variant == EngineVariant::MovePages ? MigrationMode::Sync : mode;
    rc.migration.batch = variant == EngineVariant::MovePages ? engine.config().native_batch : batch;
    rc.migration.pages_per_query = plan.pages_per_query;
    rc.migration.selector = plan.selector;
    rc.contention = plan.contention;
    rc.seed = mix64(plan.seed * 0x10001ull + rep);
    rc.records = plan.records;

    RowResult out;
    out.metrics = run_workload(tree, engine, rc);
    out.tree_height = tree.height();
    out.tree_pages_per_node = tree.pages_per_node();
    out.violations = integrity_violations(memory, tree, plan.records + out.metrics.inserts);

    CsvRow& r = out.row;
    r.variant = variant_name(variant);
    r.mode = mode_name(rc.migration.mode);
    r.batch = rc.migration.batch;
    r.mig_load = load.label;
    r.threads = rc.threads;
    r.seed = plan.seed;
    r.rep = rep;
    r.query_tput = out.metrics.query_throughput;
    r.mig_tput = out.metrics.migration_throughput;
    const EngineStats& e = out.metrics.engine;
    r.pages_migrated = e.pages_migrated;
    r.pages_failed = e.pages_failed;
    r.rounds = e.rounds;
    r.batches = e.batches;
    r.shootdowns = e.tlb_shootdowns;
    r.aborted_calls = e.aborted;
    return out;
}

std::vector<RowResult> run_plan(const ExperimentPlan& plan, const std::function<void(const RowResult&)>& on_row) {
    validate_plan(plan);
    std::vector<RowResult> rows;
    auto emit = [&](RowResult r) {
        if (on_row) on_row(r);
        rows.push_back(std::move(r));
    };
    for (const auto& load : plan.loads)
        for (EngineVariant v : plan.variants) {
            if (v == EngineVariant::MovePages) {
                for (unsigned rep = 0; rep < plan.reps; ++rep)
                    emit(run_cell(plan, v, MigrationMode::Sync, 512, load, rep));
                continue;
            }
            for (MigrationMode m : plan.modes)
                for (std::size_t b : plan.batches)
                    for (unsigned rep = 0; rep < plan.reps; ++rep) emit(run_cell(plan, v, m, b, load, rep));
        }
    return rows;
}

std::vector<CellSummary> summarize(const std::vector<RowResult>& rows) {
    using Key = std::tuple<std::string, std::string, std::uint64_t, std::string>;
    std::vector<Key> order;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : rows) {
        const Key k{r.row.variant, r.row.mode, r.row.batch, r.row.mig_load};
        if (!groups.count(k)) order.push_back(k);
        groups[k].first.push_back(r.row.query_tput);
        groups[k].second.push_back(r.row.mig_tput);
    }
    std::vector<CellSummary> out;
    for (const auto& k : order) {
        const auto& [q, m] = groups[k];
        out.push_back({std::get<0>(k), std::get<1>(k), std::get<3>(k), std::get<2>(k), median(q), median(m),
                       static_cast<unsigned>(q.size())});
    }
    return out;
}

}  // namespace pmig
