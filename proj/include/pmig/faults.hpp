#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <vector>

#include "pmig/types.hpp"

namespace pmig {

/// Where in the pipeline an injected failure strikes.
enum class FaultPhase {
    CopyIn,     // reading pages[i] / nodes[i] from the caller faults
    Isolate,    // LRU isolation refuses the page
    Lock,       // page lock observed held (EAGAIN, retried)
    Writeback,  // page observed under writeback
    Alloc,      // no target frame
};

/// Fails request index `index` at `phase` on attempts [first_attempt, last_attempt].
/// Attempts are 1-based and count every unmap attempt of the page within one
/// engine call, async and sync alike. CopyIn and Isolate only have attempt 1.
struct FaultRule {
    std::size_t index = 0;
    FaultPhase phase = FaultPhase::Lock;
    std::uint32_t first_attempt = 1;
    std::uint32_t last_attempt = std::numeric_limits<std::uint32_t>::max();
};

/// Deterministic failure injection keyed by request index.
class FaultPlan {
public:
    FaultPlan() = default;
    FaultPlan(std::initializer_list<FaultRule> rules) : rules_(rules) {}

    FaultPlan& add(FaultRule rule) {
        rules_.push_back(rule);
        return *this;
    }
    bool fires(std::size_t index, FaultPhase phase, std::uint32_t attempt) const noexcept {
        for (const auto& r : rules_)
            if (r.index == index && r.phase == phase && attempt >= r.first_attempt && attempt <= r.last_attempt)
                return true;
        return false;
    }
    bool empty() const noexcept { return rules_.empty(); }
    const std::vector<FaultRule>& rules() const noexcept { return rules_; }

private:
    std::vector<FaultRule> rules_;
};

/// splitmix64 finalizer; used wherever a seed must be turned into independent bits.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Stochastic stand-in for concurrent kernel activity on pages: a page is
/// either held by someone else or under writeback for the whole engine call.
/// The outcome is a pure function of (salt, page), so two engines handed the
/// same salt observe the same contention.
struct ContentionModel {
    double lock_hold_prob = 0;
    double writeback_prob = 0;
    std::uint64_t salt = 0;

    bool lock_held(PageId page) const noexcept { return draw(page, 0x4c4f434bull) < lock_hold_prob; }
    bool under_writeback(PageId page) const noexcept { return draw(page, 0x57424b21ull) < writeback_prob; }

private:
    double draw(PageId page, std::uint64_t stream) const noexcept {
        return static_cast<double>(mix64(mix64(salt ^ stream) ^ page) >> 11) * 0x1.0p-53;
    }
};

}  // namespace pmig
