#include "clsp/flow_solver.hpp"

#include <queue>
#include <stdexcept>
#include <utility>

namespace clsp {

Fixing Fixing::from_setup(const SetupPlan& setup) {
    Fixing fx;
    fx.state.reserve(setup.y.size());
    for (int v : setup.y) fx.state.push_back(v == 1 ? FixState::FixedOne : FixState::FixedZero);
    return fx;
}

namespace {

// Holding-cost prefix sums: H[t] = h[0] + ... + h[t-1], H[0] = 0.
std::vector<Money> holding_prefix(const Instance& inst) {
    std::vector<Money> H(inst.T + 1, 0);
    for (int t = 0; t < inst.T; ++t) H[t + 1] = H[t] + inst.h[t];
    return H;
}

// Time-invariant source key as an exact rational num/den, den > 0.
struct Key {
    Money num;
    Money den;
    int period;

    bool operator>(const Key& rhs) const {
        const __int128 lhs_scaled = static_cast<__int128>(num) * rhs.den;
        const __int128 rhs_scaled = static_cast<__int128>(rhs.num) * den;
        if (lhs_scaled != rhs_scaled) return lhs_scaled > rhs_scaled;
        return period > rhs.period;
    }
};

using MinHeap = std::priority_queue<Key, std::vector<Key>, std::greater<Key>>;

} // namespace

std::optional<FlowSolution> solve_fixed_setup(const Instance& inst, const SetupPlan& setup) {
    if (setup.size() != inst.T) throw std::invalid_argument("setup plan length does not match T");
    const auto H = holding_prefix(inst);

    MinHeap open;
    std::vector<Units> residual(inst.T, 0);
    std::vector<Units> produced(inst.T, 0);

    for (int t = 0; t < inst.T; ++t) {
        if (setup.y[t] == 1 && inst.cap[t] > 0) {
            open.push({inst.p[t] - H[t], 1, t});
            residual[t] = inst.cap[t];
        }
        Units need = inst.d[t];
        while (need > 0) {
            if (open.empty()) return std::nullopt;
            const int u = open.top().period;
            const Units take = std::min(need, residual[u]);
            produced[u] += take;
            residual[u] -= take;
            need -= take;
            if (residual[u] == 0) open.pop();
        }
    }

    FlowSolution out;
    out.plan.x = std::move(produced);
    out.plan.s.resize(inst.T);
    Units inv = 0;
    for (int t = 0; t < inst.T; ++t) {
        inv += out.plan.x[t] - inst.d[t];
        out.plan.s[t] = inv;
    }
    out.objective = evaluate_objective(inst, setup, out.plan);
    return out;
}

std::optional<double> relaxation_bound(const Instance& inst, const Fixing& fixing) {
    if (fixing.size() != inst.T) throw std::invalid_argument("fixing length does not match T");
    const auto H = holding_prefix(inst);

    MinHeap open;
    std::vector<Units> residual(inst.T, 0);
    std::vector<Units> served(inst.T, 0);

    Money fixed_setup_cost = 0;   // f[t] over FixedOne periods
    Money holding_constant = 0;   // every unit of d[t] carries H[t] regardless of source

    for (int t = 0; t < inst.T; ++t) {
        const FixState st = fixing.state[t];
        if (st == FixState::FixedOne) fixed_setup_cost += inst.f[t];
        if (st != FixState::FixedZero && inst.cap[t] > 0) {
            // key = p - H          for FixedOne
            // key = p + f/cap - H  for Free
            if (st == FixState::FixedOne)
                open.push({inst.p[t] - H[t], 1, t});
            else
                open.push({(inst.p[t] - H[t]) * inst.cap[t] + inst.f[t], inst.cap[t], t});
            residual[t] = inst.cap[t];
        }
        holding_constant += inst.d[t] * H[t];

        Units need = inst.d[t];
        while (need > 0) {
            if (open.empty()) return std::nullopt;
            const int u = open.top().period;
            const Units take = std::min(need, residual[u]);
            served[u] += take;
            residual[u] -= take;
            need -= take;
            if (residual[u] == 0) open.pop();
        }
    }

    // Exact integer part plus the f*g/cap fractions of Free sources.
    Money integer_part = fixed_setup_cost + holding_constant;
    double fractional_part = 0.0;
    for (int u = 0; u < inst.T; ++u) {
        if (served[u] == 0) continue;
        integer_part += (inst.p[u] - H[u]) * served[u];
        if (fixing.state[u] == FixState::Free)
            fractional_part += static_cast<double>(inst.f[u] * served[u]) / static_cast<double>(inst.cap[u]);
    }
    return static_cast<double>(integer_part) + fractional_part;
}

} // namespace clsp
