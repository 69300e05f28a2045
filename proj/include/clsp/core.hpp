#ifndef CLSP_CORE_HPP
#define CLSP_CORE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace clsp {

using Money = std::int64_t;
using Units = std::int64_t;

// One single-item CLSP instance over periods t = 1..T. Internally all arrays
// are 0-indexed; reported period indices are 1-based.
struct Instance {
    int T = 0;
    std::vector<Units> d;   // demand per period
    std::vector<Money> p;   // unit production cost
    std::vector<Money> f;   // setup cost
    std::vector<Money> h;   // unit holding cost per period
    std::vector<Units> cap; // production capacity

    // Generator echo; c < 0 means the instance was not produced by generate_instance.
    struct GenEcho {
        int c = -1;
        int f = -1;
        std::uint64_t seed = 0;
    } gen;

    bool generated() const { return gen.c >= 0; }

    // Throws std::invalid_argument if lengths, signs, or the
    // capacity-vs-demand sanity condition are violated.
    void validate() const;

    Units total_demand() const;
};

// Binary setup decisions, one per period. Stored as int so validate_plan can
// diagnose non-binary entries on foreign data.
struct SetupPlan {
    std::vector<int> y;

    int size() const { return static_cast<int>(y.size()); }
    bool operator==(const SetupPlan&) const = default;
};

// Continuous decisions. Integral by construction everywhere in this codebase:
// integral demands and capacities admit an integral optimal flow, and the
// fixed-setup solver returns one.
struct ProductionPlan {
    std::vector<Units> x; // produced per period
    std::vector<Units> s; // ending inventory per period

    bool operator==(const ProductionPlan&) const = default;
};

enum class SolveStatus { Optimal, Feasible, Infeasible };
enum class Provenance { BruteForce, BranchAndBound, MLDirect, MLFlipped, ExactFallback };

const char* to_string(SolveStatus s);
const char* to_string(Provenance p);

struct Solution {
    SetupPlan setup;
    ProductionPlan plan;
    Money objective = 0;
    SolveStatus status = SolveStatus::Infeasible;
    double solve_time = 0.0; // seconds
    Provenance provenance = Provenance::BruteForce;
};

// Benchmark-schema generator parameters. Capacity is drawn around
// kappa = capacity_ratio * 300, the mean-demand-scaled capacity level
// (300 = mean of U{1..600}).
struct GeneratorConfig {
    int T = 90;
    int capacity_ratio = 3;          // in {3, 5, 8}
    int setup_ratio = 1000;          // in {1000, 10000}
    Units demand_lo = 1, demand_hi = 600;
    Money unit_cost_lo = 1, unit_cost_hi = 5;
    Money holding_cost = 1;
    std::uint64_t seed = 0;

    void validate() const; // throws std::invalid_argument on bad ratios or T < 1
};

// Draw order is frozen as part of the dataset format: d[1..T], p[1..T],
// f[1..T], cap[1..T], all from one SplitMix64 stream seeded with config.seed.
Instance generate_instance(const GeneratorConfig& config);

// Total cost sum_t (p*x + f*y + h*s). Exact integer arithmetic.
Money evaluate_objective(const Instance& inst, const SetupPlan& setup, const ProductionPlan& plan);

struct Violation {
    enum class Kind { FlowBalance, CapacityLink, NegativeProduction, NegativeInventory, NonBinarySetup };
    Kind kind;
    int period; // 1-based
};

std::string to_string(const Violation& v);

// Checks flow balance with s0 = 0, the x <= y*cap link, nonnegativity and
// binarity. Violations are data, not errors; an empty result means feasible.
std::vector<Violation> validate_plan(const Instance& inst, const SetupPlan& setup,
                                     const ProductionPlan& plan);

// Prefix-capacity test: sum_{u<=t} y[u]*cap[u] >= sum_{u<=t} d[u] for all t.
// Necessary and sufficient for single-item feasibility of a fixed setup.
bool setup_feasible(const Instance& inst, const SetupPlan& setup);

// One JSON object per line:
// {"T":..,"d":[..],"p":[..],"f":[..],"h":[..],"cap":[..],"gen":{"c":..,"f":..,"seed":..}}
std::string instance_to_json(const Instance& inst);
Instance instance_from_json(const std::string& line);
std::vector<Instance> read_instances(std::istream& in);
void write_instances(std::ostream& out, const std::vector<Instance>& instances);

} // namespace clsp

#endif
