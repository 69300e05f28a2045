#ifndef CLSP_PIPELINE_HPP
#define CLSP_PIPELINE_HPP

#include "clsp/checkpoint.hpp"
#include "clsp/core.hpp"
#include "clsp/exact_solver.hpp"

namespace clsp {

struct RepairOptions {
    bool flip_last = true;
    bool fallback_exact = true;
    bool evaluate_candidates_concurrently = false;
    BnBOptions fallback; // limits for the exact fallback solve
};

// Tokenize with the checkpoint's frozen normalizer stats, greedy-decode a
// setup plan of length T. Throws when T exceeds the model's sequence limits.
SetupPlan predict_setup(const Instance& inst, const ModelCheckpoint& ckpt);

// Candidate A is the prediction as-is, candidate B the prediction with y[T]
// flipped (1 - y[T]). Both are solved by the fixed-setup solver; infeasible
// candidates are discarded and the cheaper feasible one wins (ties keep the
// unflipped plan). If neither is feasible and fallback_exact is set, the
// branch-and-bound result is returned with ExactFallback provenance;
// otherwise an Infeasible solution.
Solution repair_and_solve(const Instance& inst, const SetupPlan& predicted,
                          const RepairOptions& options = {});

// predict_setup + repair_and_solve, with the end-to-end wall time recorded
// in solve_time.
Solution solve_ml(const Instance& inst, const ModelCheckpoint& ckpt,
                  const RepairOptions& options = {});

} // namespace clsp

#endif
