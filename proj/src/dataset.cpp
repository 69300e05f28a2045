#include "clsp/dataset.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "clsp/flow_solver.hpp"
#include "clsp/rng.hpp"
#include "json.hpp"

namespace clsp {

const char* split_of_seed(std::uint64_t seed) {
    const std::uint64_t bucket = hash64(seed) % 10;
    if (bucket < 8) return "train";
    return bucket == 8 ? "valid" : "test";
}

namespace {

DatasetRecord label_instance(const Instance& inst, const BuildOptions& options) {
    DatasetRecord rec;
    rec.instance = inst;
    if (options.solver == LabelSolver::BruteForce) {
        Solution sol = brute_force_solve(inst);
        rec.label = sol.setup;
        rec.objective = sol.objective;
        rec.labeler = Provenance::BruteForce;
        rec.label_status = sol.status;
        rec.nodes = 1ll << inst.T;
        rec.solve_time = sol.solve_time;
    } else {
        BnBResult res = bnb_solve(inst, options.bnb);
        rec.label = res.solution.setup;
        rec.objective = res.solution.objective;
        rec.labeler = Provenance::BranchAndBound;
        rec.label_status = res.solution.status;
        rec.nodes = res.nodes;
        rec.solve_time = res.solution.solve_time;
    }
    return rec;
}

} // namespace

std::vector<DatasetRecord> build_dataset(const GeneratorConfig& config, int count,
                                         const BuildOptions& options, BuildSummary* summary) {
    if (count < 1) throw std::invalid_argument("build_dataset: count must be >= 1");
    config.validate();

    std::vector<DatasetRecord> records(count);
    int retries = 0;
    std::string error;

    // Exceptions must not escape the parallel region; the first one wins.
#pragma omp parallel for schedule(dynamic) reduction(+ : retries)
    for (int i = 0; i < count; ++i) {
        try {
            GeneratorConfig cfg = config;
            cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
            Instance inst = generate_instance(cfg);
            int attempt = 0;
            SetupPlan all_ones;
            all_ones.y.assign(inst.T, 1);
            while (!setup_feasible(inst, all_ones)) {
                if (++attempt > options.max_retries)
                    throw std::runtime_error("build_dataset: no feasible instance after retries at index " +
                                             std::to_string(i));
                ++retries;
                cfg.seed = derive_seed(cfg.seed, 0x7E7Aull + attempt);
                inst = generate_instance(cfg);
            }

            DatasetRecord rec = label_instance(inst, options);
            if (rec.label_status == SolveStatus::Infeasible)
                throw std::runtime_error("build_dataset: labeler failed on a feasible instance");
            if (rec.objective <= 0)
                throw std::logic_error("build_dataset: nonpositive label objective (optgap denominator)");
            rec.split = split_of_seed(cfg.seed);
            records[i] = std::move(rec);
        } catch (const std::exception& e) {
#pragma omp critical
            if (error.empty()) error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error(error);

    if (summary) {
        *summary = {};
        summary->count = count;
        summary->retries = retries;
        for (const auto& r : records) {
            summary->total_label_time += r.solve_time;
            summary->split_counts[r.split] += 1;
        }
        summary->mean_label_time = summary->total_label_time / count;
    }
    return records;
}

std::string dataset_record_to_json(const DatasetRecord& rec) {
    nlohmann::ordered_json j;
    j["instance"] = nlohmann::ordered_json::parse(instance_to_json(rec.instance));
    j["y"] = rec.label.y;
    j["obj"] = rec.objective;
    j["labeler"] = to_string(rec.labeler);
    j["status"] = to_string(rec.label_status);
    j["nodes"] = rec.nodes;
    j["split"] = rec.split;
    return j.dump();
}

DatasetRecord dataset_record_from_json(const std::string& line) {
    const auto j = nlohmann::ordered_json::parse(line);
    DatasetRecord rec;
    rec.instance = instance_from_json(j.at("instance").dump());
    rec.label.y = j.at("y").get<std::vector<int>>();
    rec.objective = j.at("obj").get<Money>();
    const auto labeler = j.at("labeler").get<std::string>();
    rec.labeler = labeler == "brute_force" ? Provenance::BruteForce : Provenance::BranchAndBound;
    const auto status = j.at("status").get<std::string>();
    rec.label_status = status == "optimal" ? SolveStatus::Optimal : SolveStatus::Feasible;
    rec.nodes = j.at("nodes").get<std::int64_t>();
    rec.split = j.at("split").get<std::string>();
    return rec;
}

void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records) {
    for (const auto& rec : records) out << dataset_record_to_json(rec) << '\n';
}

std::vector<DatasetRecord> load_dataset(std::istream& in) {
    std::vector<DatasetRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        DatasetRecord rec = dataset_record_from_json(line);
        const auto flow = solve_fixed_setup(rec.instance, rec.label);
        if (!flow || flow->objective != rec.objective)
            throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                     ": stored objective disagrees with re-evaluation");
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace clsp
