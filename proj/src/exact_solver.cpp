#include "clsp/exact_solver.hpp"

#include <chrono>
#include <stdexcept>

namespace clsp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

} // namespace

void BnBOptions::validate() const {
    if (node_limit <= 0) throw std::invalid_argument("bnb: node limit must be positive");
    if (!(time_limit > 0)) throw std::invalid_argument("bnb: time limit must be positive");
}

Solution brute_force_solve(const Instance& inst) {
    if (inst.T > 24)
        throw std::invalid_argument("brute force refused: T = " + std::to_string(inst.T) + " exceeds 24");
    const auto start = Clock::now();

    Solution best;
    best.status = SolveStatus::Infeasible;
    best.provenance = Provenance::BruteForce;

    const std::uint32_t count = 1u << inst.T;
    SetupPlan setup;
    setup.y.resize(inst.T);
    for (std::uint32_t mask = 0; mask < count; ++mask) {
        for (int t = 0; t < inst.T; ++t) setup.y[t] = (mask >> t) & 1u;
        const auto flow = solve_fixed_setup(inst, setup);
        if (!flow) continue;
        if (best.status == SolveStatus::Infeasible || flow->objective < best.objective) {
            best.setup = setup;
            best.plan = flow->plan;
            best.objective = flow->objective;
            best.status = SolveStatus::Optimal;
        }
    }
    best.solve_time = seconds_since(start);
    return best;
}

namespace {

struct BnBSearch {
    const Instance& inst;
    const BnBOptions& opts;
    Clock::time_point start;

    Fixing fixing;
    std::vector<Units> demand_prefix;
    Solution incumbent;
    std::int64_t nodes = 0;
    bool limit_tripped = false;

    BnBSearch(const Instance& i, const BnBOptions& o) : inst(i), opts(o), start(Clock::now()) {
        fixing = Fixing::all_free(inst.T);
        demand_prefix.resize(inst.T + 1, 0);
        for (int t = 0; t < inst.T; ++t) demand_prefix[t + 1] = demand_prefix[t] + inst.d[t];
    }

    bool limits_ok() {
        if (nodes >= opts.node_limit) return false;
        // Wall clock polled sparsely; only matters when a finite limit is set.
        if (opts.time_limit != std::numeric_limits<double>::infinity() && (nodes & 0xFF) == 0 &&
            seconds_since(start) > opts.time_limit)
            return false;
        return true;
    }

    // Prefix-capacity test counting FixedOne and Free periods as available.
    bool possibly_feasible() const {
        Units open_cap = 0;
        for (int t = 0; t < inst.T; ++t) {
            if (fixing.state[t] != FixState::FixedZero) open_cap += inst.cap[t];
            if (open_cap < demand_prefix[t + 1]) return false;
        }
        return true;
    }

    void leaf() {
        SetupPlan setup;
        setup.y.resize(inst.T);
        for (int t = 0; t < inst.T; ++t) setup.y[t] = fixing.state[t] == FixState::FixedOne ? 1 : 0;
        const auto flow = solve_fixed_setup(inst, setup);
        if (!flow) return;
        if (incumbent.status == SolveStatus::Infeasible || flow->objective < incumbent.objective) {
            incumbent.setup = std::move(setup);
            incumbent.plan = flow->plan;
            incumbent.objective = flow->objective;
            incumbent.status = SolveStatus::Feasible;
        }
    }

    void dive(int depth) {
        if (limit_tripped) return;
        if (!limits_ok()) {
            limit_tripped = true;
            return;
        }
        ++nodes;

        if (opts.enable_pruning) {
            if (!possibly_feasible()) return;
            const auto bound = relaxation_bound(inst, fixing);
            if (!bound) return;
            // Objectives are integers; 0.5 absorbs the bound's fp summation error.
            if (incumbent.status != SolveStatus::Infeasible &&
                *bound > static_cast<double>(incumbent.objective) - 0.5)
                return;
        }

        if (depth == inst.T) {
            leaf();
            return;
        }
        fixing.state[depth] = FixState::FixedOne;
        dive(depth + 1);
        fixing.state[depth] = FixState::FixedZero;
        dive(depth + 1);
        fixing.state[depth] = FixState::Free;
    }
};

} // namespace

BnBResult bnb_solve(const Instance& inst, const BnBOptions& options) {
    options.validate();
    BnBSearch search(inst, options);

    BnBResult out;
    out.solution.status = SolveStatus::Infeasible;
    out.solution.provenance = Provenance::BranchAndBound;

    // All-ones incumbent; if this fails the whole instance is infeasible.
    SetupPlan all_ones;
    all_ones.y.assign(inst.T, 1);
    if (const auto flow = solve_fixed_setup(inst, all_ones)) {
        search.incumbent.setup = all_ones;
        search.incumbent.plan = flow->plan;
        search.incumbent.objective = flow->objective;
        search.incumbent.status = SolveStatus::Feasible;
        search.incumbent.provenance = Provenance::BranchAndBound;

        search.dive(0);

        out.solution = search.incumbent;
        out.solution.status = search.limit_tripped ? SolveStatus::Feasible : SolveStatus::Optimal;
    }
    out.nodes = search.nodes;
    out.solution.provenance = Provenance::BranchAndBound;
    out.solution.solve_time = seconds_since(search.start);
    return out;
}

} // namespace clsp
