#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "reference.hpp"

namespace pmig::oracle {

/// Builds a machine matching the scenario, runs the real engine on it and
/// reports the result in the interpreter's terms.
Outcome run_engine(const Scenario& s, bool native);

/// Empty when the two outcomes agree on every compared field, otherwise a
/// description of the first disagreement.
std::string compare(const Outcome& expected, const Outcome& actual);

std::string describe(const Scenario& s);

struct GridOptions {
    int max_pages = 8;
    int max_nodes = 3;
    int max_failures = 2;
    /// Page counts above this use a fixed set of target patterns instead of
    /// every target vector.
    int exhaustive_targets_up_to = 4;
};

/// Calls `visit` for every scenario of the grid. Modes and batch caps of
/// move_pages2 are varied inside the grid as well.
std::uint64_t for_each_scenario(const GridOptions& options, const std::function<void(const Scenario&)>& visit);

struct GridReport {
    std::uint64_t cases = 0;
    std::uint64_t mismatches = 0;
    std::string first_mismatch;
};

/// Runs both engines against the interpreter on every grid scenario.
GridReport check_grid(const GridOptions& options);

}  // namespace pmig::oracle
