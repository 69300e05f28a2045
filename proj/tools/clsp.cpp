// Command-line front end: generate/label benchmark instances, solve them
// exactly, train the setup-prediction model, run inference, evaluate, and
// export attention weights. Every command prints one machine-readable JSON
// object to stdout on success; progress and reports go to stderr.
// Exit codes: 0 success, 1 usage/config error, 2 infeasible or limit tripped.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "clsp/dataset.hpp"
#include "clsp/rng.hpp"
#include "clsp/metrics.hpp"
#include "clsp/pipeline.hpp"

using namespace clsp;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;

std::vector<Instance> load_instances_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file: " + path);
    auto instances = read_instances(in);
    if (instances.empty()) throw std::runtime_error("no instances in " + path);
    return instances;
}

std::vector<DatasetRecord> load_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    auto records = load_dataset(in);
    if (records.empty()) throw std::runtime_error("no records in " + path);
    return records;
}

void emit(const ordered_json& result) { std::cout << result.dump(2) << std::endl; }

// ---------------------------------------------------------------------------

struct GenArgs {
    int T = 90;
    int c = 3;
    int f = 1000;
    int count = 1;
    std::uint64_t seed = 0;
    std::string out;
    std::string solver = "bnb";
    std::int64_t node_limit = 200000;
    std::string times_out;
};

int run_gen(const GenArgs& args) {
    GeneratorConfig cfg;
    cfg.T = args.T;
    cfg.capacity_ratio = args.c;
    cfg.setup_ratio = args.f;
    cfg.seed = args.seed;

    std::ofstream out(args.out);
    if (!out) throw std::runtime_error("cannot open output file: " + args.out);

    ordered_json result;
    result["command"] = "gen";
    result["out"] = args.out;
    result["count"] = args.count;
    result["solver"] = args.solver;

    if (args.solver == "none") {
        for (int i = 0; i < args.count; ++i) {
            GeneratorConfig one = cfg;
            one.seed = derive_seed(cfg.seed, i);
            out << instance_to_json(generate_instance(one)) << '\n';
        }
        emit(result);
        return kExitOk;
    }

    BuildOptions opts;
    opts.solver = args.solver == "brute-force" ? LabelSolver::BruteForce : LabelSolver::BranchAndBound;
    opts.bnb.node_limit = args.node_limit;
    BuildSummary summary;
    const auto records = build_dataset(cfg, args.count, opts, &summary);
    write_dataset(out, records);

    if (!args.times_out.empty()) {
        std::ofstream times(args.times_out);
        if (!times) throw std::runtime_error("cannot open times file: " + args.times_out);
        times << "index,label_time_us\n";
        char buf[64];
        for (std::size_t i = 0; i < records.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.3f", i, records[i].solve_time * 1e6);
            times << buf << '\n';
        }
        result["times_out"] = args.times_out;
    }

    result["retries"] = summary.retries;
    result["splits"] = summary.split_counts;
    result["total_label_time_s"] = summary.total_label_time;
    result["mean_label_time_s"] = summary.mean_label_time;
    int not_proven = 0;
    for (const auto& r : records) not_proven += r.label_status != SolveStatus::Optimal;
    result["labels_not_proven_optimal"] = not_proven;
    emit(result);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
    std::string input;
    bool brute = false;
    bool bnb = false;
    std::int64_t node_limit = 0;
    double time_limit = 0.0;
};

int run_solve(const SolveArgs& args) {
    const auto instances = load_instances_file(args.input);
    BnBOptions opts;
    if (args.node_limit > 0) opts.node_limit = args.node_limit;
    if (args.time_limit > 0) opts.time_limit = args.time_limit;

    ordered_json results = ordered_json::array();
    bool any_not_optimal = false;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        Solution sol;
        std::int64_t nodes = -1;
        if (args.brute) {
            sol = brute_force_solve(instances[i]);
        } else {
            const BnBResult res = bnb_solve(instances[i], opts);
            sol = res.solution;
            nodes = res.nodes;
        }
        any_not_optimal = any_not_optimal || sol.status != SolveStatus::Optimal;
        ordered_json r;
        r["index"] = i;
        r["status"] = to_string(sol.status);
        if (sol.status != SolveStatus::Infeasible) {
            r["objective"] = sol.objective;
            r["y"] = sol.setup.y;
            r["x"] = sol.plan.x;
        }
        if (nodes >= 0) r["nodes"] = nodes;
        r["time_s"] = sol.solve_time;
        results.push_back(std::move(r));
    }
    ordered_json out;
    out["command"] = "solve";
    out["solver"] = args.brute ? "brute_force" : "bnb";
    out["results"] = std::move(results);
    emit(out);
    return any_not_optimal ? kExitInfeasible : kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_train(const TrainArgs& args) {
    const auto records = load_dataset_file(args.data);

    nn::ModelConfig model;
    nn::TrainConfig tc;
    tc.steps = 2000;
    tc.warmup_steps = 100;
    if (!args.config.empty()) {
        std::ifstream in(args.config);
        if (!in) throw std::runtime_error("cannot open config file: " + args.config);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto j = ordered_json::parse(buf.str());
        if (j.contains("model")) model = nn::ModelConfig::from_json(j["model"].dump());
        if (j.contains("train")) tc = nn::TrainConfig::from_json(j["train"].dump());
    }
    if (args.seed_set) {
        model.param_seed = args.seed;
        tc.data_seed = args.seed;
    }

    const int T = records.front().instance.T;
    for (const auto& rec : records)
        if (rec.instance.T != T)
            throw std::runtime_error("train: dataset mixes horizons; expected uniform T");
    model.max_src_len = std::max(model.max_src_len, kNumFeatures * T);
    model.max_tgt_len = std::max(model.max_tgt_len, T + 1);
    model.validate();

    std::vector<Instance> train_instances;
    for (const auto& rec : records)
        if (rec.split == "train") train_instances.push_back(rec.instance);
    if (train_instances.empty()) throw std::runtime_error("train: dataset has no train split");
    const TokenizerConfig tokenizer =
        fit_normalizer(train_instances, model.src_vocab / kNumFeatures);

    auto to_example = [&](const DatasetRecord& rec) {
        nn::TrainExample ex;
        ex.src = encode_source(rec.instance, tokenizer).tokens;
        const TargetSequence tgt = encode_target(rec.label);
        ex.dec_in.assign(tgt.tokens.begin(), tgt.tokens.end() - 1);
        ex.target = tgt.labels();
        return ex;
    };
    std::vector<nn::TrainExample> train_set, val_set;
    for (const auto& rec : records) {
        if (rec.split == "train") train_set.push_back(to_example(rec));
        else if (rec.split == "valid") val_set.push_back(to_example(rec));
    }
    std::cerr << "training on " << train_set.size() << " examples, validating on "
              << val_set.size() << ", T = " << T << "\n";

    auto [params, adam, report] = nn::train(model, tc, train_set, val_set);

    ModelCheckpoint ckpt;
    ckpt.model = model;
    ckpt.tokenizer = tokenizer;
    ckpt.params = std::move(params);
    ckpt.adam = std::move(adam);
    ckpt.train_step = report.steps_completed;
    save_checkpoint(ckpt, args.out);

    ordered_json result;
    result["command"] = "train";
    result["checkpoint"] = args.out;
    result["steps"] = report.steps_completed;
    result["diverged"] = report.diverged;
    result["final_loss"] = report.loss_history.empty() ? 0.0 : report.loss_history.back();
    result["train_token_accuracy"] = report.final_train_token_accuracy;
    if (!report.val_token_accuracy.empty())
        result["val_token_accuracy"] = report.val_token_accuracy.back().second;
    emit(result);
    return report.diverged ? kExitInfeasible : kExitOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string ckpt;
    std::string input;
};

int run_predict(const PredictArgs& args) {
    const ModelCheckpoint ckpt = load_checkpoint(args.ckpt);
    const auto instances = load_instances_file(args.input);
    ordered_json plans = ordered_json::array();
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const SetupPlan plan = predict_setup(instances[i], ckpt);
        plans.push_back(ordered_json{{"index", i}, {"y", plan.y}});
    }
    ordered_json out;
    out["command"] = "predict";
    out["checkpoint"] = args.ckpt;
    out["plans"] = std::move(plans);
    emit(out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string predictor = "model";
    std::string csv;
    std::string times_csv;
    std::string split = "all";
    bool no_flip = false;
    bool no_fallback = false;
    bool no_exact = false;
    std::int64_t node_limit = 200000;
    int corrupt_flips = 1;
    std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& args) {
    auto records = load_dataset_file(args.data);
    if (args.split != "all") {
        std::erase_if(records, [&](const DatasetRecord& r) { return r.split != args.split; });
        if (records.empty()) throw std::runtime_error("eval: no records in split " + args.split);
    }

    std::unique_ptr<ModelCheckpoint> ckpt;
    std::unique_ptr<EvalPredictor> predictor;
    if (args.predictor == "model") {
        if (args.ckpt.empty()) throw std::runtime_error("--ckpt is required with --predictor model");
        ckpt = std::make_unique<ModelCheckpoint>(load_checkpoint(args.ckpt));
        predictor = std::make_unique<CheckpointPredictor>(*ckpt);
    } else if (args.predictor == "oracle") {
        predictor = std::make_unique<PerfectOraclePredictor>();
    } else if (args.predictor == "oracle-flip-last") {
        predictor = std::make_unique<LastFlipOraclePredictor>();
    } else if (args.predictor == "oracle-corrupt") {
        predictor = std::make_unique<CorruptingOraclePredictor>(args.seed, args.corrupt_flips);
    } else {
        throw std::runtime_error("unknown predictor: " + args.predictor);
    }

    EvalOptions opts;
    opts.repair.flip_last = !args.no_flip;
    opts.repair.fallback_exact = !args.no_fallback;
    opts.measure_exact = !args.no_exact;
    opts.exact.node_limit = args.node_limit;

    const EvalResult result = evaluate_model(*predictor, records, opts);

    const std::string csv_path = args.csv.empty() ? args.data + ".eval.csv" : args.csv;
    {
        std::ofstream csv(csv_path);
        if (!csv) throw std::runtime_error("cannot open csv output: " + csv_path);
        write_rows_csv(csv, result.rows);
    }
    const std::string times_path = args.times_csv.empty() ? csv_path + ".times.csv" : args.times_csv;
    {
        std::ofstream times(times_path);
        if (!times) throw std::runtime_error("cannot open times output: " + times_path);
        write_times_csv(times, result.rows);
    }

    print_report(std::cerr, result.metrics);

    ordered_json out = ordered_json::parse(metrics_to_json(result.metrics));
    out["command"] = "eval";
    out["predictor"] = predictor->name();
    out["csv"] = csv_path;
    out["times_csv"] = times_path;
    emit(out);
    return result.metrics.overall.infeasible > 0 ? kExitInfeasible : kExitOk;
}

// ---------------------------------------------------------------------------

struct AttnArgs {
    std::string ckpt;
    std::string input;
    std::string out;
    std::string kind = "cross";
};

int run_attn(const AttnArgs& args) {
    const ModelCheckpoint ckpt = load_checkpoint(args.ckpt);
    const auto instances = load_instances_file(args.input);
    const AttentionKind kind = args.kind == "enc-self"   ? AttentionKind::EncoderSelf
                               : args.kind == "dec-self" ? AttentionKind::DecoderSelf
                                                         : AttentionKind::Cross;
    std::ofstream out(args.out);
    if (!out) throw std::runtime_error("cannot open csv output: " + args.out);
    const int rows = export_attention(ckpt, instances.front(), out, kind);

    ordered_json result;
    result["command"] = "attn";
    result["out"] = args.out;
    result["kind"] = args.kind;
    result["rows"] = rows;
    emit(result);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn-to-optimize toolkit for the capacitated lot sizing problem"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen", "Generate benchmark instances or a labeled dataset");
    cmd_gen->add_option("--T", gen.T, "Planning horizon")->check(CLI::PositiveNumber);
    cmd_gen->add_option("--c", gen.c, "Capacity-to-demand ratio (3, 5 or 8)");
    cmd_gen->add_option("--f", gen.f, "Setup-to-holding cost ratio (1000 or 10000)");
    cmd_gen->add_option("--count", gen.count, "Number of instances")->check(CLI::PositiveNumber);
    cmd_gen->add_option("--seed", gen.seed, "Base seed");
    cmd_gen->add_option("--out", gen.out, "Output JSONL path")->required();
    cmd_gen->add_option("--solver", gen.solver, "Label solver: bnb, brute-force or none")
        ->check(CLI::IsMember({"bnb", "brute-force", "none"}));
    cmd_gen->add_option("--node-limit", gen.node_limit, "Node limit for bnb labeling");
    cmd_gen->add_option("--times", gen.times_out, "Optional CSV with per-label wall times");

    SolveArgs solve;
    auto* cmd_solve = app.add_subcommand("solve", "Solve instances exactly");
    cmd_solve->add_option("input", solve.input, "Instance JSONL file")->required();
    auto* brute_flag = cmd_solve->add_flag("--brute-force", solve.brute, "Enumerate all setups (T <= 24)");
    cmd_solve->add_flag("--bnb", solve.bnb, "Branch and bound (default)")->excludes(brute_flag);
    cmd_solve->add_option("--node-limit", solve.node_limit, "Search node limit");
    cmd_solve->add_option("--time-limit", solve.time_limit, "Wall-clock limit in seconds");
    std::uint64_t solve_seed = 0;
    cmd_solve->add_option("--seed", solve_seed, "Accepted for interface uniformity (unused)");

    TrainArgs train_args;
    auto* cmd_train = app.add_subcommand("train", "Train the setup-prediction transformer");
    cmd_train->add_option("--data", train_args.data, "Labeled dataset JSONL")->required();
    cmd_train->add_option("--config", train_args.config, "JSON file with model/train sections");
    cmd_train->add_option("--out", train_args.out, "Checkpoint output path")->required();
    auto* train_seed =
        cmd_train->add_option("--seed", train_args.seed, "Overrides both parameter and data seeds");

    PredictArgs predict;
    auto* cmd_predict = app.add_subcommand("predict", "Predict setup plans for instances");
    cmd_predict->add_option("--ckpt", predict.ckpt, "Model checkpoint")->required();
    cmd_predict->add_option("input", predict.input, "Instance JSONL file")->required();
    std::uint64_t predict_seed = 0;
    cmd_predict->add_option("--seed", predict_seed, "Accepted for interface uniformity (unused)");

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a predictor on a labeled dataset");
    cmd_eval->add_option("--ckpt", eval.ckpt, "Model checkpoint (with --predictor model)");
    cmd_eval->add_option("--data", eval.data, "Labeled dataset JSONL")->required();
    cmd_eval->add_option("--predictor", eval.predictor,
                         "model, oracle, oracle-flip-last or oracle-corrupt");
    cmd_eval->add_option("--csv", eval.csv, "Per-instance CSV path");
    cmd_eval->add_option("--times-csv", eval.times_csv, "Wall-clock CSV path");
    cmd_eval->add_option("--split", eval.split, "Restrict to a split: train, valid, test or all");
    cmd_eval->add_flag("--no-flip", eval.no_flip, "Disable the last-period flip candidate");
    cmd_eval->add_flag("--no-fallback", eval.no_fallback, "Disable the exact fallback");
    cmd_eval->add_flag("--no-exact", eval.no_exact, "Skip the timed exact reference solve");
    cmd_eval->add_option("--node-limit", eval.node_limit, "Node limit for exact solves");
    cmd_eval->add_option("--corrupt-flips", eval.corrupt_flips, "Flips for oracle-corrupt");
    cmd_eval->add_option("--seed", eval.seed, "Seed for oracle-corrupt");

    AttnArgs attn;
    auto* cmd_attn = app.add_subcommand("attn", "Export attention weights as CSV");
    cmd_attn->add_option("--ckpt", attn.ckpt, "Model checkpoint")->required();
    cmd_attn->add_option("input", attn.input, "Instance JSONL file")->required();
    cmd_attn->add_option("--out", attn.out, "CSV output path")->required();
    cmd_attn->add_option("--kind", attn.kind, "cross, enc-self or dec-self")
        ->check(CLI::IsMember({"cross", "enc-self", "dec-self"}));
    std::uint64_t attn_seed = 0;
    cmd_attn->add_option("--seed", attn_seed, "Accepted for interface uniformity (unused)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cmd_gen->parsed()) return run_gen(gen);
        if (cmd_solve->parsed()) return run_solve(solve);
        if (cmd_train->parsed()) {
            train_args.seed_set = train_seed->count() > 0;
            return run_train(train_args);
        }
        if (cmd_predict->parsed()) return run_predict(predict);
        if (cmd_eval->parsed()) return run_eval(eval);
        if (cmd_attn->parsed()) return run_attn(attn);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
