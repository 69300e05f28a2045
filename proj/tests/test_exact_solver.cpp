#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "clsp/exact_solver.hpp"
#include "clsp/rng.hpp"
#include "oracle.hpp"

using namespace clsp;
using namespace clsp::test;

TEST_CASE("brute force on the worked examples") {
    Solution sol = brute_force_solve(instance_I1());
    CHECK(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == 30);
    CHECK(sol.setup.y == std::vector<int>{1, 0});

    sol = brute_force_solve(instance_I2());
    CHECK(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == 20);
    CHECK(sol.setup.y == std::vector<int>{1, 1});
    CHECK(sol.plan.x == std::vector<Units>{5, 5});
}

TEST_CASE("brute force reports infeasibility and guards the horizon") {
    const Instance starved = make_instance({9, 9}, {1, 1}, {1, 1}, {1, 1}, {4, 4});
    CHECK(brute_force_solve(starved).status == SolveStatus::Infeasible);

    Instance big;
    big.T = 25;
    big.d.assign(25, 1);
    big.p.assign(25, 1);
    big.f.assign(25, 1);
    big.h.assign(25, 1);
    big.cap.assign(25, 2);
    CHECK_THROWS_AS(brute_force_solve(big), std::invalid_argument);
}

TEST_CASE("branch and bound matches brute force on the worked examples") {
    auto r1 = bnb_solve(instance_I1());
    CHECK(r1.solution.status == SolveStatus::Optimal);
    CHECK(r1.solution.objective == 30);
    auto r2 = bnb_solve(instance_I2());
    CHECK(r2.solution.status == SolveStatus::Optimal);
    CHECK(r2.solution.objective == 20);
}

TEST_CASE("free setups make the all-ones plan optimal") {
    SplitMix64 rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        Instance inst = tiny_instance(rng);
        for (int t = 0; t < inst.T; ++t) inst.f[t] = 0;
        SetupPlan ones;
        ones.y.assign(inst.T, 1);
        const auto all_open = solve_fixed_setup(inst, ones);
        const auto res = bnb_solve(inst);
        if (!all_open) {
            CHECK(res.solution.status == SolveStatus::Infeasible);
        } else {
            CHECK(res.solution.objective == all_open->objective);
        }
    }
}

TEST_CASE("branch and bound equals brute force across generator configurations") {
    int done = 0;
    for (int c : {3, 5, 8}) {
        for (int f : {1000, 10000}) {
            GeneratorConfig cfg;
            cfg.T = 12;
            cfg.capacity_ratio = c;
            cfg.setup_ratio = f;
            for (int i = 0; i < 10; ++i) {
                cfg.seed = derive_seed(1000 + c * 10 + f, i);
                const Instance inst = generate_instance(cfg);
                const Solution brute = brute_force_solve(inst);
                const BnBResult bnb = bnb_solve(inst);
                REQUIRE(bnb.solution.status == SolveStatus::Optimal);
                REQUIRE(bnb.solution.objective == brute.objective);
                CHECK(validate_plan(inst, bnb.solution.setup, bnb.solution.plan).empty());
                ++done;
            }
        }
    }
    CHECK(done == 60);
}

TEST_CASE("bnb objective never undercuts the root relaxation") {
    SplitMix64 rng(66);
    for (int trial = 0; trial < 200; ++trial) {
        const Instance inst = tiny_instance(rng);
        const auto res = bnb_solve(inst);
        if (res.solution.status == SolveStatus::Infeasible) continue;
        const auto bound = relaxation_bound(inst, Fixing::all_free(inst.T));
        REQUIRE(bound.has_value());
        CHECK(static_cast<double>(res.solution.objective) >= *bound - 1e-6);
    }
}

TEST_CASE("node count bound and pruning-off equivalence") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        const Instance inst = tiny_instance(rng);
        const auto pruned = bnb_solve(inst);
        CHECK(pruned.nodes <= (1ll << (inst.T + 1)) - 1);

        BnBOptions no_prune;
        no_prune.enable_pruning = false;
        const auto full = bnb_solve(inst, no_prune);
        CHECK(full.nodes <= (1ll << (inst.T + 1)) - 1);
        CHECK(full.solution.status == pruned.solution.status);
        if (pruned.solution.status != SolveStatus::Infeasible)
            CHECK(full.solution.objective == pruned.solution.objective);
        CHECK(pruned.nodes <= full.nodes);
    }
}

TEST_CASE("bnb is deterministic") {
    GeneratorConfig cfg;
    cfg.T = 12;
    cfg.seed = 31337;
    const Instance inst = generate_instance(cfg);
    const auto a = bnb_solve(inst);
    const auto b = bnb_solve(inst);
    CHECK(a.nodes == b.nodes);
    CHECK(a.solution.objective == b.solution.objective);
    CHECK(a.solution.setup.y == b.solution.setup.y);
    CHECK(a.solution.plan == b.solution.plan);
}

TEST_CASE("node limit trips to a feasible incumbent") {
    GeneratorConfig cfg;
    cfg.T = 16;
    cfg.seed = 9;
    const Instance inst = generate_instance(cfg);
    BnBOptions opts;
    opts.node_limit = 3;
    const auto res = bnb_solve(inst, opts);
    CHECK(res.solution.status == SolveStatus::Feasible);
    CHECK(res.nodes <= 3);
    CHECK(validate_plan(inst, res.solution.setup, res.solution.plan).empty());

    opts.node_limit = 0;
    CHECK_THROWS_AS(bnb_solve(inst, opts), std::invalid_argument);
}

TEST_CASE("time limit trips to a feasible incumbent, not an error") {
    GeneratorConfig cfg;
    cfg.T = 20;
    cfg.seed = 10;
    const Instance inst = generate_instance(cfg);
    BnBOptions opts;
    opts.time_limit = 1e-9;
    const auto res = bnb_solve(inst, opts);
    CHECK(res.solution.status == SolveStatus::Feasible);
    CHECK(validate_plan(inst, res.solution.setup, res.solution.plan).empty());

    opts.time_limit = -1.0;
    CHECK_THROWS_AS(bnb_solve(inst, opts), std::invalid_argument);
}
