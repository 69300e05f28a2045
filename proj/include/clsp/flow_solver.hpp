#ifndef CLSP_FLOW_SOLVER_HPP
#define CLSP_FLOW_SOLVER_HPP

#include <optional>
#include <vector>

#include "clsp/core.hpp"

namespace clsp {

enum class FixState { FixedZero, FixedOne, Free };

// Per-period setup fixing. Free states exist for branch-and-bound nodes; a
// fully fixed vector is equivalent to a SetupPlan.
struct Fixing {
    std::vector<FixState> state;

    static Fixing all_free(int T) { return {std::vector<FixState>(T, FixState::Free)}; }
    static Fixing from_setup(const SetupPlan& setup);

    int size() const { return static_cast<int>(state.size()); }
};

struct FlowSolution {
    ProductionPlan plan;
    Money objective = 0; // includes the sum of f[t]*y[t] setup constants
};

// Exact minimizer of the CLSP objective with the setup vector fixed.
//
// The residual problem is a transportation problem on a line: period u with
// y[u]=1 is a source of capacity cap[u]; demand d[t] may be served from any
// open source u <= t at unit cost p[u] + h[u] + ... + h[t-1]. With
// H[t] = h[0]+...+h[t-1], that cost is (p[u] - H[u]) + H[t], so the ranking
// of sources is time-invariant and a single pass with a min-heap keyed by
// p[u] - H[u] (ties: earliest period) serves every demand optimally.
// O(T log T). Returns nullopt exactly when setup_feasible is false.
//
// Integral data admit an integral optimal flow, and this solver returns one,
// so the objective is an exact integer.
std::optional<FlowSolution> solve_fixed_setup(const Instance& inst, const SetupPlan& setup);

// Lower bound on the optimum of any 0/1 completion of the fixing, from the
// LP relaxation y in [0,1]: at the relaxed optimum y[t] = x[t]/cap[t], so
// Free periods become sources with unit cost p[t] + f[t]/cap[t], FixedOne
// periods keep unit cost p[t] plus the constant f[t], and FixedZero periods
// are removed. Source ranking uses exact rational comparison; only the final
// summation is floating point (absolute error well below 0.5, which pruning
// against integer incumbents absorbs). Returns nullopt when even opening
// every non-FixedZero period cannot cover some demand prefix.
std::optional<double> relaxation_bound(const Instance& inst, const Fixing& fixing);

} // namespace clsp

#endif
