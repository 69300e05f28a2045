#include "clsp/pipeline.hpp"

#include <chrono>
#include <future>
#include <stdexcept>

namespace clsp {

SetupPlan predict_setup(const Instance& inst, const ModelCheckpoint& ckpt) {
    if (inst.T * kNumFeatures > ckpt.model.max_src_len || inst.T + 1 > ckpt.model.max_tgt_len)
        throw std::invalid_argument("predict_setup: T = " + std::to_string(inst.T) +
                                    " exceeds the model's sequence capacity");
    const SourceSequence src = encode_source(inst, ckpt.tokenizer);
    return nn::greedy_decode(ckpt.params, src.tokens, inst.T);
}

Solution repair_and_solve(const Instance& inst, const SetupPlan& predicted,
                          const RepairOptions& options) {
    if (predicted.size() != inst.T)
        throw std::invalid_argument("repair_and_solve: plan length does not match T");

    SetupPlan flipped = predicted;
    flipped.y[inst.T - 1] = 1 - flipped.y[inst.T - 1];

    std::optional<FlowSolution> direct, alternate;
    if (options.flip_last && options.evaluate_candidates_concurrently) {
        auto fut = std::async(std::launch::async,
                              [&] { return solve_fixed_setup(inst, flipped); });
        direct = solve_fixed_setup(inst, predicted);
        alternate = fut.get();
    } else {
        direct = solve_fixed_setup(inst, predicted);
        if (options.flip_last) alternate = solve_fixed_setup(inst, flipped);
    }

    Solution out;
    if (direct && (!alternate || direct->objective <= alternate->objective)) {
        out.setup = predicted;
        out.plan = direct->plan;
        out.objective = direct->objective;
        out.status = SolveStatus::Feasible;
        out.provenance = Provenance::MLDirect;
        return out;
    }
    if (alternate) {
        out.setup = flipped;
        out.plan = alternate->plan;
        out.objective = alternate->objective;
        out.status = SolveStatus::Feasible;
        out.provenance = Provenance::MLFlipped;
        return out;
    }
    if (options.fallback_exact) {
        out = bnb_solve(inst, options.fallback).solution;
        out.provenance = Provenance::ExactFallback;
        return out;
    }
    out.status = SolveStatus::Infeasible;
    out.provenance = Provenance::MLDirect;
    return out;
}

Solution solve_ml(const Instance& inst, const ModelCheckpoint& ckpt, const RepairOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const SetupPlan predicted = predict_setup(inst, ckpt);
    Solution out = repair_and_solve(inst, predicted, options);
    out.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace clsp
