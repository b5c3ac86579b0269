#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "reference.hpp"

namespace pmig::oracle {

/// Random request of up to `max_pages` pages over 2..4 nodes with up to four
/// injected failures. move_pages2 keeps its defaults (MIGRATE_SYNC, cap 512),
/// the configuration that matches what native move_pages does per round.
/// Smaller caps can lose to native: a transient ENOMEM in a sync retry ends
/// migrate_pages before later sub-groups are unmapped.
Scenario random_dominance_case(std::uint64_t seed, int max_pages = 64);

using EngineRunner = std::function<Outcome(const Scenario&, bool native)>;

struct DominanceVerdict {
    bool strict_expected = false;  // move_pages2 placed a page native never reached
    std::uint64_t native_migrated = 0;
    std::uint64_t partial_migrated = 0;
    std::string failure;           // empty when the property holds
};

/// pages_migrated(move_pages2) >= pages_migrated(move_pages), strictly when
/// move_pages2 migrated a page the aborted native call never reached.
DominanceVerdict check_dominance(const Scenario& s, const EngineRunner& run);

struct DominanceReport {
    std::uint64_t cases = 0;
    std::uint64_t strict_cases = 0;
    std::uint64_t violations = 0;
    std::string first_violation;
};

DominanceReport check_dominance_suite(std::uint64_t cases, std::uint64_t seed, const EngineRunner& run);

/// The real engines, as driven by run_engine.
EngineRunner engine_runner();

}  // namespace pmig::oracle
