#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "clsp/core.hpp"
#include "clsp/rng.hpp"
#include "oracle.hpp"

using namespace clsp;
using namespace clsp::test;

TEST_CASE("generator respects documented ranges (c=3, f=1000)") {
    GeneratorConfig cfg;
    cfg.T = 90;
    cfg.capacity_ratio = 3;
    cfg.setup_ratio = 1000;
    cfg.seed = 7;
    const Instance inst = generate_instance(cfg);
    inst.validate();
    REQUIRE(inst.T == 90);
    for (int t = 0; t < inst.T; ++t) {
        CHECK(inst.d[t] >= 1);
        CHECK(inst.d[t] <= 600);
        CHECK(inst.p[t] >= 1);
        CHECK(inst.p[t] <= 5);
        CHECK(inst.f[t] >= 900);
        CHECK(inst.f[t] <= 1100);
        CHECK(inst.cap[t] >= 630);
        CHECK(inst.cap[t] <= 990);
        CHECK(inst.h[t] == 1);
    }
}

TEST_CASE("generator is deterministic in the seed") {
    GeneratorConfig cfg;
    cfg.T = 30;
    cfg.capacity_ratio = 5;
    cfg.setup_ratio = 10000;
    cfg.seed = 1234567;
    const Instance a = generate_instance(cfg);
    const Instance b = generate_instance(cfg);
    CHECK(a.d == b.d);
    CHECK(a.p == b.p);
    CHECK(a.f == b.f);
    CHECK(a.cap == b.cap);
    cfg.seed = 1234568;
    const Instance c = generate_instance(cfg);
    CHECK(a.d != c.d);
}

TEST_CASE("single-period instance ranges (c=5, f=10000)") {
    GeneratorConfig cfg;
    cfg.T = 1;
    cfg.capacity_ratio = 5;
    cfg.setup_ratio = 10000;
    cfg.seed = 0;
    const Instance inst = generate_instance(cfg);
    REQUIRE(inst.T == 1);
    CHECK(inst.f[0] >= 9000);
    CHECK(inst.f[0] <= 11000);
    CHECK(inst.cap[0] >= 1050);
    CHECK(inst.cap[0] <= 1650);
}

TEST_CASE("generator rejects invalid ratios") {
    GeneratorConfig cfg;
    cfg.capacity_ratio = 4;
    CHECK_THROWS_AS(generate_instance(cfg), std::invalid_argument);
    cfg.capacity_ratio = 3;
    cfg.setup_ratio = 500;
    CHECK_THROWS_AS(generate_instance(cfg), std::invalid_argument);
    cfg.setup_ratio = 1000;
    cfg.T = 0;
    CHECK_THROWS_AS(generate_instance(cfg), std::invalid_argument);
}

TEST_CASE("generator ranges hold over many samples per configuration") {
    for (int c : {3, 5, 8}) {
        for (int f : {1000, 10000}) {
            GeneratorConfig cfg;
            cfg.T = 10;
            cfg.capacity_ratio = c;
            cfg.setup_ratio = f;
            const Units cap_lo = static_cast<Units>(0.7 * c * 300 + 0.5);
            const Units cap_hi = static_cast<Units>(1.1 * c * 300 + 0.5);
            Units d_min = 1 << 20, d_max = 0, cap_min = 1 << 20, cap_max = 0;
            for (int i = 0; i < 10000; ++i) {
                cfg.seed = derive_seed(99, i);
                const Instance inst = generate_instance(cfg);
                for (int t = 0; t < inst.T; ++t) {
                    d_min = std::min(d_min, inst.d[t]);
                    d_max = std::max(d_max, inst.d[t]);
                    cap_min = std::min(cap_min, inst.cap[t]);
                    cap_max = std::max(cap_max, inst.cap[t]);
                    REQUIRE(inst.p[t] >= 1);
                    REQUIRE(inst.p[t] <= 5);
                    REQUIRE(inst.f[t] >= 0.9 * f);
                    REQUIRE(inst.f[t] <= 1.1 * f);
                }
            }
            CHECK(d_min >= 1);
            CHECK(d_max <= 600);
            CHECK(cap_min >= cap_lo);
            CHECK(cap_max <= cap_hi);
            // Sampler actually covers the range ends.
            CHECK(d_min == 1);
            CHECK(d_max == 600);
            CHECK(cap_min == cap_lo);
            CHECK(cap_max == cap_hi);
        }
    }
}

TEST_CASE("objective evaluation on the worked example") {
    const Instance inst = instance_I1();
    CHECK(evaluate_objective(inst, plan_of({1, 0}), {{8, 0}, {4, 0}}) == 30);
    CHECK(evaluate_objective(inst, plan_of({1, 1}), {{4, 4}, {0, 0}}) == 36);
    CHECK(evaluate_objective(inst, plan_of({0, 0}), {{0, 0}, {0, 0}}) == 0);
}

TEST_CASE("objective rejects mismatched lengths") {
    const Instance inst = instance_I1();
    CHECK_THROWS_AS(evaluate_objective(inst, plan_of({1}), {{8, 0}, {4, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(evaluate_objective(inst, plan_of({1, 0}), {{8}, {4}}), std::invalid_argument);
}

TEST_CASE("objective is linear in the cost coefficients") {
    SplitMix64 rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        Instance inst = tiny_instance(rng);
        SetupPlan y;
        ProductionPlan plan;
        for (int t = 0; t < inst.T; ++t) {
            y.y.push_back(static_cast<int>(rng.uniform_int(0, 1)));
            plan.x.push_back(rng.uniform_int(0, 8));
            plan.s.push_back(rng.uniform_int(0, 8));
        }
        const Money base = evaluate_objective(inst, y, plan);
        for (int t = 0; t < inst.T; ++t) {
            inst.p[t] *= 2;
            inst.f[t] *= 2;
            inst.h[t] *= 2;
        }
        CHECK(evaluate_objective(inst, y, plan) == 2 * base);
    }
}

TEST_CASE("plan validation catches each constraint") {
    const Instance inst = instance_I1();

    CHECK(validate_plan(inst, plan_of({1, 0}), {{8, 0}, {4, 0}}).empty());

    const auto cap_violation = validate_plan(inst, plan_of({0, 0}), {{8, 0}, {4, 0}});
    REQUIRE(cap_violation.size() == 1);
    CHECK(cap_violation[0].kind == Violation::Kind::CapacityLink);
    CHECK(cap_violation[0].period == 1);

    const auto flow_violation = validate_plan(inst, plan_of({1, 1}), {{4, 3}, {0, 0}});
    REQUIRE(flow_violation.size() == 1);
    CHECK(flow_violation[0].kind == Violation::Kind::FlowBalance);
    CHECK(flow_violation[0].period == 2);

    const auto neg = validate_plan(inst, plan_of({1, 2}), {{-1, 9}, {-5, 0}});
    bool saw_binary = false, saw_neg_x = false, saw_neg_s = false;
    for (const auto& v : neg) {
        saw_binary |= v.kind == Violation::Kind::NonBinarySetup;
        saw_neg_x |= v.kind == Violation::Kind::NegativeProduction;
        saw_neg_s |= v.kind == Violation::Kind::NegativeInventory;
    }
    CHECK(saw_binary);
    CHECK(saw_neg_x);
    CHECK(saw_neg_s);
}

TEST_CASE("prefix-capacity feasibility test") {
    const Instance i2 = instance_I2();
    CHECK_FALSE(setup_feasible(i2, plan_of({1, 0})));
    CHECK(setup_feasible(i2, plan_of({1, 1})));

    GeneratorConfig cfg;
    cfg.T = 20;
    cfg.seed = 5;
    const Instance gen = generate_instance(cfg);
    CHECK(setup_feasible(gen, plan_of(std::vector<int>(20, 1))));
}

TEST_CASE("valid plans imply feasible setups (property)") {
    SplitMix64 rng(71);
    int valid_seen = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Instance inst = tiny_instance(rng);
        SetupPlan y;
        ProductionPlan plan;
        Units inv = 0;
        const bool honest = rng.uniform_int(0, 1) == 1;
        for (int t = 0; t < inst.T; ++t) {
            // honest plans open setups often enough to be feasible regularly
            y.y.push_back(static_cast<int>(rng.uniform_int(0, honest ? 3 : 1)) > 0 ? 1 : 0);
            Units x;
            if (honest) {
                // built to satisfy capacity and nonnegativity where possible
                const Units x_max = y.y[t] ? inst.cap[t] : 0;
                const Units x_min = std::max<Units>(0, inst.d[t] - inv);
                x = x_min <= x_max ? x_min + rng.uniform_int(0, x_max - x_min) : x_max;
            } else {
                x = rng.uniform_int(0, 9);
            }
            inv += x - inst.d[t];
            plan.x.push_back(x);
            plan.s.push_back(inv);
        }
        if (validate_plan(inst, y, plan).empty()) {
            ++valid_seen;
            CHECK(setup_feasible(inst, y));
        }
    }
    CHECK(valid_seen > 100); // the property must actually be exercised
}

TEST_CASE("setup feasibility is monotone in y") {
    SplitMix64 rng(72);
    for (int trial = 0; trial < 500; ++trial) {
        const Instance inst = tiny_instance(rng);
        SetupPlan y;
        for (int t = 0; t < inst.T; ++t) y.y.push_back(static_cast<int>(rng.uniform_int(0, 1)));
        if (!setup_feasible(inst, y)) continue;
        for (int t = 0; t < inst.T; ++t) {
            if (y.y[t] == 1) continue;
            SetupPlan up = y;
            up.y[t] = 1;
            CHECK(setup_feasible(inst, up));
        }
    }
}

TEST_CASE("instance JSON line round trip") {
    GeneratorConfig cfg;
    cfg.T = 5;
    cfg.seed = 42;
    const Instance inst = generate_instance(cfg);
    const std::string line = instance_to_json(inst);
    const Instance back = instance_from_json(line);
    CHECK(back.T == inst.T);
    CHECK(back.d == inst.d);
    CHECK(back.p == inst.p);
    CHECK(back.f == inst.f);
    CHECK(back.h == inst.h);
    CHECK(back.cap == inst.cap);
    CHECK(back.gen.c == inst.gen.c);
    CHECK(back.gen.seed == inst.gen.seed);
    CHECK(instance_to_json(back) == line);

    std::stringstream ss;
    write_instances(ss, {inst, inst});
    CHECK(read_instances(ss).size() == 2);
}

TEST_CASE("instance validation rejects malformed data") {
    Instance inst = instance_I1();
    inst.d[0] = -1;
    CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
    inst = instance_I1();
    inst.cap = {0, 0};
    CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
    inst = instance_I1();
    inst.p.pop_back();
    CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
}
