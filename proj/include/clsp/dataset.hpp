#ifndef CLSP_DATASET_HPP
#define CLSP_DATASET_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "clsp/core.hpp"
#include "clsp/exact_solver.hpp"

namespace clsp {

// One labeled instance. solve_time is the wall time measured when the label
// was computed; it is reported by the build summary but deliberately kept out
// of the serialized row so dataset files are byte-identical across runs.
struct DatasetRecord {
    Instance instance;
    SetupPlan label;
    Money objective = 0;
    Provenance labeler = Provenance::BranchAndBound;
    SolveStatus label_status = SolveStatus::Optimal;
    std::int64_t nodes = 0;
    double solve_time = 0.0;
    std::string split; // "train" | "valid" | "test"
};

enum class LabelSolver { BruteForce, BranchAndBound };

struct BuildOptions {
    LabelSolver solver = LabelSolver::BranchAndBound;
    BnBOptions bnb;        // node limit should be finite for large T
    int max_retries = 16;  // fresh-seed retries for instances infeasible at generation
};

struct BuildSummary {
    int count = 0;
    int retries = 0;
    double total_label_time = 0.0;
    double mean_label_time = 0.0;
    std::map<std::string, int> split_counts;
};

// Instance i uses seed derive_seed(config.seed, i); infeasible draws are
// retried with derive_seed of the failed seed. Splits are assigned 80/10/10
// by a hash of the instance seed, so they are stable under regeneration.
// Throws if a label objective is not strictly positive.
std::vector<DatasetRecord> build_dataset(const GeneratorConfig& config, int count,
                                         const BuildOptions& options = {},
                                         BuildSummary* summary = nullptr);

std::string dataset_record_to_json(const DatasetRecord& rec);
DatasetRecord dataset_record_from_json(const std::string& line);

void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records);

// Re-solves each stored setup and rejects any record whose stored objective
// differs from the recomputed one (exact integer comparison).
std::vector<DatasetRecord> load_dataset(std::istream& in);

const char* split_of_seed(std::uint64_t seed);

} // namespace clsp

#endif
