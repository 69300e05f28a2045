#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "clsp/flow_solver.hpp"
#include "clsp/rng.hpp"
#include "oracle.hpp"

using namespace clsp;
using namespace clsp::test;

TEST_CASE("fixed-setup solve on the worked examples") {
    const Instance i1 = instance_I1();

    auto sol = solve_fixed_setup(i1, plan_of({1, 0}));
    REQUIRE(sol.has_value());
    CHECK(sol->plan.x == std::vector<Units>{8, 0});
    CHECK(sol->plan.s == std::vector<Units>{4, 0});
    CHECK(sol->objective == 30);

    sol = solve_fixed_setup(i1, plan_of({1, 1}));
    REQUIRE(sol.has_value());
    CHECK(sol->plan.x == std::vector<Units>{4, 4});
    CHECK(sol->plan.s == std::vector<Units>{0, 0});
    CHECK(sol->objective == 36);

    CHECK_FALSE(solve_fixed_setup(instance_I2(), plan_of({1, 0})).has_value());
}

TEST_CASE("zero demand costs only the setups") {
    const Instance inst = make_instance({0, 0, 0}, {3, 3, 3}, {7, 11, 13}, {1, 1, 1}, {5, 5, 5});
    const auto sol = solve_fixed_setup(inst, plan_of({1, 0, 1}));
    REQUIRE(sol.has_value());
    CHECK(sol->plan.x == std::vector<Units>{0, 0, 0});
    CHECK(sol->plan.s == std::vector<Units>{0, 0, 0});
    CHECK(sol->objective == 7 + 13);
}

TEST_CASE("solver output is always a valid plan with matching objective") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const Instance inst = tiny_instance(rng);
        SetupPlan y;
        for (int t = 0; t < inst.T; ++t) y.y.push_back(static_cast<int>(rng.uniform_int(0, 1)));
        const auto sol = solve_fixed_setup(inst, y);
        CHECK(sol.has_value() == setup_feasible(inst, y));
        if (sol) {
            CHECK(validate_plan(inst, y, sol->plan).empty());
            CHECK(evaluate_objective(inst, y, sol->plan) == sol->objective);
        }
    }
}

TEST_CASE("flow solver matches the inventory DP oracle over all setups") {
    SplitMix64 rng(2024);
    int instances_checked = 0;
    while (instances_checked < 200) {
        const Instance inst = tiny_instance(rng);
        ++instances_checked;
        const int count = 1 << inst.T;
        for (int mask = 0; mask < count; ++mask) {
            SetupPlan y;
            for (int t = 0; t < inst.T; ++t) y.y.push_back((mask >> t) & 1);
            const auto fast = solve_fixed_setup(inst, y);
            const auto slow = dp_fixed_setup(inst, y);
            REQUIRE(fast.has_value() == slow.has_value());
            if (fast) REQUIRE(fast->objective == *slow);
        }
    }
}

TEST_CASE("relaxation bound on the worked examples") {
    const Instance i1 = instance_I1();
    const auto bound = relaxation_bound(i1, Fixing::all_free(2));
    REQUIRE(bound.has_value());
    CHECK(*bound == doctest::Approx(26.0).epsilon(1e-12));

    const Instance single = make_instance({4}, {2}, {10}, {1}, {10});
    const auto b1 = relaxation_bound(single, Fixing::all_free(1));
    REQUIRE(b1.has_value());
    CHECK(*b1 == doctest::Approx(12.0).epsilon(1e-12));
    const auto exact = solve_fixed_setup(single, plan_of({1}));
    CHECK(exact->objective == 18);
}

TEST_CASE("fully fixed relaxation equals the flow solve") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const Instance inst = tiny_instance(rng);
        SetupPlan y;
        for (int t = 0; t < inst.T; ++t) y.y.push_back(static_cast<int>(rng.uniform_int(0, 1)));
        const auto bound = relaxation_bound(inst, Fixing::from_setup(y));
        const auto sol = solve_fixed_setup(inst, y);
        REQUIRE(bound.has_value() == sol.has_value());
        if (sol) CHECK(*bound == static_cast<double>(sol->objective));
    }
}

TEST_CASE("relaxation lower-bounds every setup's objective") {
    SplitMix64 rng(32);
    int checked = 0;
    while (checked < 200) {
        Instance inst = tiny_instance(rng, 5);
        // stretch to larger horizons with moderate data
        if (rng.uniform_int(0, 1) == 1) {
            while (inst.T < 10) {
                inst.T += 1;
                inst.d.push_back(rng.uniform_int(0, 6));
                inst.p.push_back(rng.uniform_int(0, 9));
                inst.f.push_back(rng.uniform_int(0, 20));
                inst.h.push_back(rng.uniform_int(0, 3));
                inst.cap.push_back(rng.uniform_int(0, 8));
            }
        }
        const auto bound = relaxation_bound(inst, Fixing::all_free(inst.T));
        Money best = std::numeric_limits<Money>::max();
        for (int mask = 0; mask < (1 << inst.T); ++mask) {
            SetupPlan y;
            for (int t = 0; t < inst.T; ++t) y.y.push_back((mask >> t) & 1);
            const auto sol = solve_fixed_setup(inst, y);
            if (sol) best = std::min(best, sol->objective);
        }
        if (best == std::numeric_limits<Money>::max()) {
            CHECK_FALSE(bound.has_value());
        } else {
            ++checked;
            REQUIRE(bound.has_value());
            CHECK(*bound <= static_cast<double>(best) + 1e-6);
        }
    }
}

TEST_CASE("tightening a fixing never decreases the bound") {
    SplitMix64 rng(33);
    for (int trial = 0; trial < 500; ++trial) {
        const Instance inst = tiny_instance(rng);
        Fixing fx = Fixing::all_free(inst.T);
        for (int t = 0; t < inst.T; ++t) {
            const auto r = rng.uniform_int(0, 2);
            fx.state[t] = r == 0 ? FixState::FixedZero : r == 1 ? FixState::FixedOne : FixState::Free;
        }
        const auto loose = relaxation_bound(inst, fx);
        if (!loose) continue; // infeasible stays infeasible under tightening
        for (int t = 0; t < inst.T; ++t) {
            if (fx.state[t] != FixState::Free) continue;
            for (FixState to : {FixState::FixedZero, FixState::FixedOne}) {
                Fixing tight = fx;
                tight.state[t] = to;
                const auto b = relaxation_bound(inst, tight);
                // 1e-6 covers the final double summation; decisions are exact.
                if (b) CHECK(*b >= *loose - 1e-6);
            }
        }
    }
}
