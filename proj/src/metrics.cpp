#include "clsp/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "clsp/rng.hpp"
#include "json.hpp"

namespace clsp {

SetupPlan LastFlipOraclePredictor::predict(const DatasetRecord& rec) const {
    SetupPlan plan = rec.label;
    plan.y.back() = 1 - plan.y.back();
    return plan;
}

SetupPlan CorruptingOraclePredictor::predict(const DatasetRecord& rec) const {
    SetupPlan plan = rec.label;
    SplitMix64 rng(derive_seed(seed_, rec.instance.gen.seed));
    for (int k = 0; k < flips_; ++k) {
        const auto t = rng.uniform_int(0, rec.instance.T - 1);
        plan.y[t] = 1 - plan.y[t];
    }
    return plan;
}

namespace {

using Clock = std::chrono::steady_clock;

PerInstanceRow evaluate_one(const EvalPredictor& predictor, const DatasetRecord& rec, int index,
                            const EvalOptions& options) {
    PerInstanceRow row;
    row.index = index;
    row.c = rec.instance.gen.c;
    row.f = rec.instance.gen.f;
    row.T = rec.instance.T;
    row.label_obj = rec.objective;

    const auto t0 = Clock::now();
    const SetupPlan predicted = predictor.predict(rec);
    const Solution sol = repair_and_solve(rec.instance, predicted, options.repair);
    row.time_ml = std::chrono::duration<double>(Clock::now() - t0).count();

    row.pre_repair_feasible = setup_feasible(rec.instance, predicted);
    row.ml_status = sol.status;
    row.provenance = sol.provenance;
    if (sol.status != SolveStatus::Infeasible) {
        row.ml_obj = sol.objective;
        row.optgap_pct = 100.0 * static_cast<double>(sol.objective - rec.objective) /
                         static_cast<double>(rec.objective);
    }

    if (options.measure_exact) {
        const auto t1 = Clock::now();
        (void)bnb_solve(rec.instance, options.exact);
        row.time_exact = std::chrono::duration<double>(Clock::now() - t1).count();
    }
    return row;
}

} // namespace

Metrics aggregate_rows(const std::vector<PerInstanceRow>& rows, bool exact_timed) {
    Metrics m;
    m.exact_timed = exact_timed;
    auto update = [](GroupMetrics& g, const PerInstanceRow& row) {
        g.count += 1;
        g.pre_repair_infeasible += row.pre_repair_feasible ? 0 : 1;
        if (row.ml_status == SolveStatus::Infeasible) {
            g.infeasible += 1;
        } else {
            g.optgap_sum += row.optgap_pct;
            g.optgap_count += 1;
            switch (row.provenance) {
                case Provenance::MLDirect: g.ml_direct += 1; break;
                case Provenance::MLFlipped: g.ml_flipped += 1; break;
                default: g.exact_fallback += 1; break;
            }
        }
        g.time_ml_sum += row.time_ml;
        g.time_exact_sum += row.time_exact;
    };
    for (const auto& row : rows) {
        const std::pair<int, int> key{row.c, row.f};
        auto it = std::find_if(m.groups.begin(), m.groups.end(),
                               [&](const auto& g) { return g.first == key; });
        if (it == m.groups.end()) {
            m.groups.push_back({key, {}});
            it = m.groups.end() - 1;
        }
        update(it->second, row);
        update(m.overall, row);
    }
    return m;
}

EvalResult evaluate_model(const EvalPredictor& predictor, const std::vector<DatasetRecord>& dataset,
                          const EvalOptions& options) {
    EvalResult result;
    result.rows.resize(dataset.size());
    std::string error;

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(dataset.size()); ++i) {
        try {
            result.rows[i] = evaluate_one(predictor, dataset[i], static_cast<int>(i), options);
        } catch (const std::exception& e) {
#pragma omp critical
            if (error.empty()) error = e.what();
        }
    }
    if (!error.empty()) throw std::runtime_error(error);

    result.metrics = aggregate_rows(result.rows, options.measure_exact);
    return result;
}

void write_rows_csv(std::ostream& out, const std::vector<PerInstanceRow>& rows) {
    out << "index,c,f,T,label_obj,pre_repair_feasible,ml_status,provenance,ml_obj,optgap_pct\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.optgap_pct);
        out << r.index << ',' << r.c << ',' << r.f << ',' << r.T << ',' << r.label_obj << ','
            << (r.pre_repair_feasible ? 1 : 0) << ',' << to_string(r.ml_status) << ','
            << to_string(r.provenance) << ',' << r.ml_obj << ',' << buf << '\n';
    }
}

std::vector<PerInstanceRow> read_rows_csv(std::istream& in) {
    std::vector<PerInstanceRow> rows;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("rows csv: missing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        auto next = [&] {
            if (!std::getline(ss, field, ',')) throw std::runtime_error("rows csv: short line");
            return field;
        };
        PerInstanceRow r;
        r.index = std::stoi(next());
        r.c = std::stoi(next());
        r.f = std::stoi(next());
        r.T = std::stoi(next());
        r.label_obj = std::stoll(next());
        r.pre_repair_feasible = next() == "1";
        const std::string status = next();
        r.ml_status = status == "infeasible" ? SolveStatus::Infeasible
                      : status == "optimal"  ? SolveStatus::Optimal
                                             : SolveStatus::Feasible;
        const std::string prov = next();
        r.provenance = prov == "ml_direct"    ? Provenance::MLDirect
                       : prov == "ml_flipped" ? Provenance::MLFlipped
                       : prov == "bnb"        ? Provenance::BranchAndBound
                                              : Provenance::ExactFallback;
        r.ml_obj = std::stoll(next());
        r.optgap_pct = std::stod(next());
        rows.push_back(r);
    }
    return rows;
}

void write_times_csv(std::ostream& out, const std::vector<PerInstanceRow>& rows) {
    out << "index,time_ml_us,time_exact_us\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.3f,%.3f", r.index, r.time_ml * 1e6, r.time_exact * 1e6);
        out << buf << '\n';
    }
}

namespace {

nlohmann::ordered_json group_json(const GroupMetrics& g, bool exact_timed) {
    nlohmann::ordered_json j;
    j["count"] = g.count;
    j["pre_repair_inf_pct"] = g.pre_repair_inf_pct();
    j["inf_pct"] = g.inf_pct();
    j["optgap_pct"] = g.optgap_pct();
    j["time_ml_s"] = g.time_ml_mean();
    if (exact_timed) {
        j["time_exact_s"] = g.time_exact_mean();
        j["timegain_pct"] = g.timegain_pct();
    }
    j["provenance"] = {{"ml_direct", g.ml_direct},
                       {"ml_flipped", g.ml_flipped},
                       {"exact_fallback", g.exact_fallback}};
    return j;
}

} // namespace

std::string metrics_to_json(const Metrics& metrics) {
    nlohmann::ordered_json j;
    j["groups"] = nlohmann::ordered_json::array();
    for (const auto& [key, g] : metrics.groups) {
        auto gj = group_json(g, metrics.exact_timed);
        gj["c"] = key.first;
        gj["f"] = key.second;
        j["groups"].push_back(std::move(gj));
    }
    j["overall"] = group_json(metrics.overall, metrics.exact_timed);
    j["exact_timed"] = metrics.exact_timed;
    return j.dump(2);
}

void print_report(std::ostream& out, const Metrics& metrics) {
    char line[256];
    std::snprintf(line, sizeof(line), "%3s %6s %10s %10s %12s %8s %10s %8s\n", "c", "f",
                  "TimeExact", "TimeML", "Timegain(%)", "Inf(%)", "Optgap(%)", "count");
    out << line;
    auto print_group = [&](const char* c_label, const char* f_label, const GroupMetrics& g) {
        std::snprintf(line, sizeof(line), "%3s %6s %10.5f %10.5f %12.2f %8.3f %10.3f %8d\n",
                      c_label, f_label, g.time_exact_mean(), g.time_ml_mean(), g.timegain_pct(),
                      g.inf_pct(), g.optgap_pct(), g.count);
        out << line;
    };
    for (const auto& [key, g] : metrics.groups) {
        print_group(std::to_string(key.first).c_str(), std::to_string(key.second).c_str(), g);
    }
    print_group("avg", "-", metrics.overall);
}

int export_attention(const ModelCheckpoint& ckpt, const Instance& inst, std::ostream& out,
                     AttentionKind kind) {
    const SourceSequence src = encode_source(inst, ckpt.tokenizer);
    const SetupPlan plan = nn::greedy_decode(ckpt.params, src.tokens, inst.T);
    const TargetSequence tgt = encode_target(plan);
    const auto result = nn::forward(ckpt.params, src.tokens, tgt.tokens);

    const auto& maps = kind == AttentionKind::Cross       ? result.attention.cross
                       : kind == AttentionKind::EncoderSelf ? result.attention.enc_self
                                                            : result.attention.dec_self;
    const char* kind_name = kind == AttentionKind::Cross       ? "cross"
                            : kind == AttentionKind::EncoderSelf ? "enc_self"
                                                                 : "dec_self";
    const int heads = ckpt.model.heads;
    const int keys = maps.empty() ? 0 : maps[0].cols;

    out << "kind,layer,head,query";
    for (int k = 0; k < keys; ++k) out << ",w" << k;
    out << '\n';

    char buf[32];
    int rows = 0;
    for (std::size_t mi = 0; mi < maps.size(); ++mi) {
        const int layer = static_cast<int>(mi) / heads;
        const int head = static_cast<int>(mi) % heads;
        const auto& m = maps[mi];
        for (int q = 0; q < m.rows; ++q) {
            out << kind_name << ',' << layer << ',' << head << ',' << q;
            for (int k = 0; k < m.cols; ++k) {
                std::snprintf(buf, sizeof(buf), "%.8f", static_cast<double>(m.at(q, k)));
                out << ',' << buf;
            }
            out << '\n';
            ++rows;
        }
    }
    return rows;
}

} // namespace clsp
