#ifndef CLSP_EXACT_SOLVER_HPP
#define CLSP_EXACT_SOLVER_HPP

#include <cstdint>
#include <limits>

#include "clsp/core.hpp"
#include "clsp/flow_solver.hpp"

namespace clsp {

struct BnBOptions {
    std::int64_t node_limit = std::numeric_limits<std::int64_t>::max();
    double time_limit = std::numeric_limits<double>::infinity(); // seconds

    enum class BranchOrder { Chronological };
    enum class FirstBranch { OneFirst };
    BranchOrder branch_order = BranchOrder::Chronological;
    FirstBranch first_branch = FirstBranch::OneFirst;

    // Kept for the enumeration-equivalence check; with pruning off the search
    // degenerates to full 2^(T+1)-1 node enumeration.
    bool enable_pruning = true;

    void validate() const; // throws std::invalid_argument on nonpositive limits
};

struct BnBResult {
    Solution solution;
    std::int64_t nodes = 0;
};

// Enumerates all 2^T setups through the fixed-setup solver. Guarded to
// T <= 24; throws std::invalid_argument beyond that. Ties: first setup found
// (ascending bitmask order, bit t = y[t]) wins.
Solution brute_force_solve(const Instance& inst);

// Depth-first branch and bound on the setup variables, chronological order,
// y=1 branch first. Nodes are pruned when the LP-relaxation bound cannot beat
// the incumbent (objectives are integral, so bound > incumbent - 0.5 suffices)
// or when the prefix-capacity test over FixedOne+Free periods already fails.
// The incumbent starts from the all-ones setup. Status is Optimal when the
// search completes, Feasible when a node or time limit tripped with an
// incumbent, Infeasible when even the all-ones setup cannot cover demand.
//
// Deterministic for fixed inputs unless a time limit trips mid-search.
BnBResult bnb_solve(const Instance& inst, const BnBOptions& options = {});

} // namespace clsp

#endif
