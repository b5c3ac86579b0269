#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pmig::cli {

struct VerifyOptions {
    bool quick = false;          // smaller grids and fewer dominance cases
    unsigned long long seed = 1;
};

struct Verdict {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Runs every self-check and prints one line per verdict.
std::vector<Verdict> run_verify(const VerifyOptions& options, std::ostream& out);

}  // namespace pmig::cli
