#ifndef CLSP_METRICS_HPP
#define CLSP_METRICS_HPP

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "clsp/checkpoint.hpp"
#include "clsp/dataset.hpp"
#include "clsp/pipeline.hpp"

namespace clsp {

// Setup predictor used by the evaluation harness. The oracle variants exist
// for calibration runs: a perfect oracle must score zero gap and zero
// infeasibility, and a corrupted oracle exercises the repair path.
class EvalPredictor {
public:
    virtual ~EvalPredictor() = default;
    virtual SetupPlan predict(const DatasetRecord& rec) const = 0;
    virtual std::string name() const = 0;
};

class CheckpointPredictor : public EvalPredictor {
public:
    explicit CheckpointPredictor(const ModelCheckpoint& ckpt) : ckpt_(ckpt) {}
    SetupPlan predict(const DatasetRecord& rec) const override { return predict_setup(rec.instance, ckpt_); }
    std::string name() const override { return "model"; }

private:
    const ModelCheckpoint& ckpt_;
};

class PerfectOraclePredictor : public EvalPredictor {
public:
    SetupPlan predict(const DatasetRecord& rec) const override { return rec.label; }
    std::string name() const override { return "oracle"; }
};

// Label with the last period flipped: the failure mode the repair targets.
class LastFlipOraclePredictor : public EvalPredictor {
public:
    SetupPlan predict(const DatasetRecord& rec) const override;
    std::string name() const override { return "oracle-flip-last"; }
};

// Label with `flips` random positions toggled (seeded per instance).
class CorruptingOraclePredictor : public EvalPredictor {
public:
    CorruptingOraclePredictor(std::uint64_t seed, int flips) : seed_(seed), flips_(flips) {}
    SetupPlan predict(const DatasetRecord& rec) const override;
    std::string name() const override { return "oracle-corrupt"; }

private:
    std::uint64_t seed_;
    int flips_;
};

struct PerInstanceRow {
    int index = 0;
    int c = -1, f = -1; // generator group, -1 when hand-made
    int T = 0;
    Money label_obj = 0;
    bool pre_repair_feasible = false; // candidate A alone, before any repair
    SolveStatus ml_status = SolveStatus::Infeasible;
    Provenance provenance = Provenance::MLDirect;
    Money ml_obj = 0;
    double optgap_pct = 0.0; // valid only when ml_status != Infeasible
    double time_ml = 0.0;    // seconds, predict + repair
    double time_exact = 0.0; // seconds, exact reference solve (0 if not measured)
};

struct GroupMetrics {
    int count = 0;
    int pre_repair_infeasible = 0;
    int infeasible = 0;
    int ml_direct = 0, ml_flipped = 0, exact_fallback = 0;
    double optgap_sum = 0.0;
    int optgap_count = 0;
    double time_ml_sum = 0.0;
    double time_exact_sum = 0.0;

    double inf_pct() const { return count ? 100.0 * infeasible / count : 0.0; }
    double pre_repair_inf_pct() const { return count ? 100.0 * pre_repair_infeasible / count : 0.0; }
    double optgap_pct() const { return optgap_count ? optgap_sum / optgap_count : 0.0; }
    double time_ml_mean() const { return count ? time_ml_sum / count : 0.0; }
    double time_exact_mean() const { return count ? time_exact_sum / count : 0.0; }
    double timegain_pct() const {
        const double te = time_exact_mean();
        return te > 0.0 ? 100.0 * (te - time_ml_mean()) / te : 0.0;
    }
};

struct Metrics {
    // Groups keyed by (c, f), in first-appearance order; (-1, -1) collects
    // hand-made instances.
    std::vector<std::pair<std::pair<int, int>, GroupMetrics>> groups;
    GroupMetrics overall;
    bool exact_timed = false;
};

struct EvalOptions {
    RepairOptions repair;
    bool measure_exact = true; // time a reference exact solve per instance
    BnBOptions exact;
};

struct EvalResult {
    Metrics metrics;
    std::vector<PerInstanceRow> rows;
};

EvalResult evaluate_model(const EvalPredictor& predictor, const std::vector<DatasetRecord>& dataset,
                          const EvalOptions& options = {});

// Aggregation used by evaluate_model, exposed so reports can be recomputed
// from per-instance rows.
Metrics aggregate_rows(const std::vector<PerInstanceRow>& rows, bool exact_timed);

// Deterministic per-instance CSV (no wall-clock columns).
void write_rows_csv(std::ostream& out, const std::vector<PerInstanceRow>& rows);
std::vector<PerInstanceRow> read_rows_csv(std::istream& in);

// Wall-clock sidecar (microsecond columns); separated so the main CSV is
// byte-stable across runs.
void write_times_csv(std::ostream& out, const std::vector<PerInstanceRow>& rows);

std::string metrics_to_json(const Metrics& metrics);

// Table-style textual report, one line per (c, f) group plus the average.
void print_report(std::ostream& out, const Metrics& metrics);

// Cross-attention (default), encoder or decoder self-attention weights from
// one forward pass on the greedy-decoded plan, as CSV rows
// (kind, layer, head, query, w0..w{n-1}). Returns the number of data rows.
enum class AttentionKind { Cross, EncoderSelf, DecoderSelf };
int export_attention(const ModelCheckpoint& ckpt, const Instance& inst, std::ostream& out,
                     AttentionKind kind = AttentionKind::Cross);

} // namespace clsp

#endif
