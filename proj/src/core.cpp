#include "clsp/core.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "clsp/rng.hpp"
#include "json.hpp"

namespace clsp {

using ordered_json = nlohmann::ordered_json;

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Feasible: return "feasible";
        case SolveStatus::Infeasible: return "infeasible";
    }
    return "?";
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::BruteForce: return "brute_force";
        case Provenance::BranchAndBound: return "bnb";
        case Provenance::MLDirect: return "ml_direct";
        case Provenance::MLFlipped: return "ml_flipped";
        case Provenance::ExactFallback: return "exact_fallback";
    }
    return "?";
}

void Instance::validate() const {
    if (T < 1) throw std::invalid_argument("instance: T must be >= 1");
    const auto n = static_cast<std::size_t>(T);
    if (d.size() != n || p.size() != n || f.size() != n || h.size() != n || cap.size() != n)
        throw std::invalid_argument("instance: array length does not match T");
    for (int t = 0; t < T; ++t) {
        if (d[t] < 0 || p[t] < 0 || f[t] < 0 || h[t] < 0 || cap[t] < 0)
            throw std::invalid_argument("instance: negative entry at period " + std::to_string(t + 1));
    }
    if (total_demand() > 0) {
        bool any_cap = false;
        for (int t = 0; t < T; ++t) any_cap = any_cap || cap[t] > 0;
        if (!any_cap) throw std::invalid_argument("instance: positive demand but zero capacity overall");
    }
}

Units Instance::total_demand() const {
    Units total = 0;
    for (Units v : d) total += v;
    return total;
}

void GeneratorConfig::validate() const {
    if (T < 1) throw std::invalid_argument("generator: T must be >= 1");
    if (capacity_ratio != 3 && capacity_ratio != 5 && capacity_ratio != 8)
        throw std::invalid_argument("generator: capacity ratio must be one of {3, 5, 8}");
    if (setup_ratio != 1000 && setup_ratio != 10000)
        throw std::invalid_argument("generator: setup ratio must be one of {1000, 10000}");
    if (demand_lo < 0 || demand_hi < demand_lo) throw std::invalid_argument("generator: bad demand range");
    if (unit_cost_lo < 0 || unit_cost_hi < unit_cost_lo) throw std::invalid_argument("generator: bad unit cost range");
    if (holding_cost < 0) throw std::invalid_argument("generator: negative holding cost");
}

Instance generate_instance(const GeneratorConfig& config) {
    config.validate();
    SplitMix64 rng(config.seed);

    const double kappa = static_cast<double>(config.capacity_ratio) * 300.0;
    const Units cap_lo = std::llround(0.7 * kappa);
    const Units cap_hi = std::llround(1.1 * kappa);
    const Money f_lo = std::llround(0.9 * static_cast<double>(config.setup_ratio));
    const Money f_hi = std::llround(1.1 * static_cast<double>(config.setup_ratio));

    Instance inst;
    inst.T = config.T;
    inst.d.resize(config.T);
    inst.p.resize(config.T);
    inst.f.resize(config.T);
    inst.h.assign(config.T, config.holding_cost);
    inst.cap.resize(config.T);
    for (int t = 0; t < config.T; ++t) inst.d[t] = rng.uniform_int(config.demand_lo, config.demand_hi);
    for (int t = 0; t < config.T; ++t) inst.p[t] = rng.uniform_int(config.unit_cost_lo, config.unit_cost_hi);
    for (int t = 0; t < config.T; ++t) inst.f[t] = rng.uniform_int(f_lo, f_hi);
    for (int t = 0; t < config.T; ++t) inst.cap[t] = rng.uniform_int(cap_lo, cap_hi);
    inst.gen = {config.capacity_ratio, config.setup_ratio, config.seed};
    return inst;
}

namespace {

void require_lengths(const Instance& inst, const SetupPlan& setup) {
    if (setup.size() != inst.T) throw std::invalid_argument("setup plan length does not match T");
}

void require_lengths(const Instance& inst, const SetupPlan& setup, const ProductionPlan& plan) {
    require_lengths(inst, setup);
    const auto n = static_cast<std::size_t>(inst.T);
    if (plan.x.size() != n || plan.s.size() != n)
        throw std::invalid_argument("production plan length does not match T");
}

} // namespace

Money evaluate_objective(const Instance& inst, const SetupPlan& setup, const ProductionPlan& plan) {
    require_lengths(inst, setup, plan);
    Money total = 0;
    for (int t = 0; t < inst.T; ++t)
        total += inst.p[t] * plan.x[t] + inst.f[t] * setup.y[t] + inst.h[t] * plan.s[t];
    return total;
}

std::string to_string(const Violation& v) {
    std::ostringstream os;
    switch (v.kind) {
        case Violation::Kind::FlowBalance: os << "flow balance violated"; break;
        case Violation::Kind::CapacityLink: os << "production exceeds y*cap"; break;
        case Violation::Kind::NegativeProduction: os << "negative production"; break;
        case Violation::Kind::NegativeInventory: os << "negative inventory"; break;
        case Violation::Kind::NonBinarySetup: os << "setup not in {0,1}"; break;
    }
    os << " at t=" << v.period;
    return os.str();
}

std::vector<Violation> validate_plan(const Instance& inst, const SetupPlan& setup,
                                     const ProductionPlan& plan) {
    require_lengths(inst, setup, plan);
    std::vector<Violation> out;
    Units prev_s = 0;
    for (int t = 0; t < inst.T; ++t) {
        if (setup.y[t] != 0 && setup.y[t] != 1)
            out.push_back({Violation::Kind::NonBinarySetup, t + 1});
        if (plan.x[t] < 0) out.push_back({Violation::Kind::NegativeProduction, t + 1});
        if (plan.s[t] < 0) out.push_back({Violation::Kind::NegativeInventory, t + 1});
        if (prev_s + plan.x[t] - inst.d[t] != plan.s[t])
            out.push_back({Violation::Kind::FlowBalance, t + 1});
        const Units link = (setup.y[t] == 1) ? inst.cap[t] : 0;
        if (plan.x[t] > link) out.push_back({Violation::Kind::CapacityLink, t + 1});
        prev_s = plan.s[t];
    }
    return out;
}

bool setup_feasible(const Instance& inst, const SetupPlan& setup) {
    require_lengths(inst, setup);
    Units open_cap = 0, demand = 0;
    for (int t = 0; t < inst.T; ++t) {
        if (setup.y[t] == 1) open_cap += inst.cap[t];
        demand += inst.d[t];
        if (open_cap < demand) return false;
    }
    return true;
}

std::string instance_to_json(const Instance& inst) {
    ordered_json j;
    j["T"] = inst.T;
    j["d"] = inst.d;
    j["p"] = inst.p;
    j["f"] = inst.f;
    j["h"] = inst.h;
    j["cap"] = inst.cap;
    if (inst.generated()) {
        j["gen"] = ordered_json{{"c", inst.gen.c}, {"f", inst.gen.f}, {"seed", inst.gen.seed}};
    }
    return j.dump();
}

Instance instance_from_json(const std::string& line) {
    const auto j = ordered_json::parse(line);
    Instance inst;
    inst.T = j.at("T").get<int>();
    inst.d = j.at("d").get<std::vector<Units>>();
    inst.p = j.at("p").get<std::vector<Money>>();
    inst.f = j.at("f").get<std::vector<Money>>();
    inst.h = j.at("h").get<std::vector<Money>>();
    inst.cap = j.at("cap").get<std::vector<Units>>();
    if (j.contains("gen")) {
        inst.gen.c = j["gen"].at("c").get<int>();
        inst.gen.f = j["gen"].at("f").get<int>();
        inst.gen.seed = j["gen"].at("seed").get<std::uint64_t>();
    }
    inst.validate();
    return inst;
}

std::vector<Instance> read_instances(std::istream& in) {
    std::vector<Instance> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(instance_from_json(line));
    }
    return out;
}

void write_instances(std::ostream& out, const std::vector<Instance>& instances) {
    for (const auto& inst : instances) out << instance_to_json(inst) << '\n';
}

} // namespace clsp
