#include "clsp/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace clsp {

const std::array<const char*, kNumFeatures> kFeatureNames = {"d", "p", "f", "cap", "h"};

namespace {

double feature_value(const Instance& inst, int feature, int t) {
    switch (feature) {
        case 0: return static_cast<double>(inst.d[t]);
        case 1: return static_cast<double>(inst.p[t]);
        case 2: return static_cast<double>(inst.f[t]);
        case 3: return static_cast<double>(inst.cap[t]);
        case 4: return static_cast<double>(inst.h[t]);
    }
    throw std::logic_error("bad feature index");
}

} // namespace

std::string TokenizerConfig::to_json() const {
    nlohmann::ordered_json j;
    j["bins_per_feature"] = bins_per_feature;
    j["log_scale"] = log_scale;
    j["clip_sigma"] = clip_sigma;
    j["mean"] = mean;
    j["stddev"] = stddev;
    j["fitted"] = fitted;
    return j.dump();
}

TokenizerConfig TokenizerConfig::from_json(const std::string& json) {
    const auto j = nlohmann::ordered_json::parse(json);
    TokenizerConfig cfg;
    cfg.bins_per_feature = j.at("bins_per_feature").get<int>();
    cfg.log_scale = j.at("log_scale").get<std::array<bool, kNumFeatures>>();
    cfg.clip_sigma = j.at("clip_sigma").get<double>();
    cfg.mean = j.at("mean").get<std::array<double, kNumFeatures>>();
    cfg.stddev = j.at("stddev").get<std::array<double, kNumFeatures>>();
    cfg.fitted = j.at("fitted").get<bool>();
    return cfg;
}

TokenizerConfig fit_normalizer(const std::vector<Instance>& corpus, int bins_per_feature) {
    if (corpus.empty()) throw std::invalid_argument("fit_normalizer: empty corpus");
    if (bins_per_feature < 1) throw std::invalid_argument("fit_normalizer: bins must be positive");

    TokenizerConfig cfg;
    cfg.bins_per_feature = bins_per_feature;

    for (int j = 0; j < kNumFeatures; ++j) {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const auto& inst : corpus) {
            for (int t = 0; t < inst.T; ++t) {
                double v = feature_value(inst, j, t);
                if (cfg.log_scale[j]) v = std::log1p(v);
                sum += v;
                ++n;
            }
        }
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (const auto& inst : corpus) {
            for (int t = 0; t < inst.T; ++t) {
                double v = feature_value(inst, j, t);
                if (cfg.log_scale[j]) v = std::log1p(v);
                sq += (v - mean) * (v - mean);
            }
        }
        cfg.mean[j] = mean;
        cfg.stddev[j] = std::max(std::sqrt(sq / static_cast<double>(n)), 1e-6);
    }
    cfg.fitted = true;
    return cfg;
}

SourceSequence encode_source(const Instance& inst, const TokenizerConfig& config) {
    if (!config.fitted) throw std::invalid_argument("encode_source: tokenizer not fitted");
    const int B = config.bins_per_feature;
    SourceSequence seq;
    seq.tokens.resize(static_cast<std::size_t>(inst.T) * kNumFeatures);
    for (int t = 0; t < inst.T; ++t) {
        for (int j = 0; j < kNumFeatures; ++j) {
            double v = feature_value(inst, j, t);
            if (config.log_scale[j]) v = std::log1p(v);
            double z = (v - config.mean[j]) / config.stddev[j];
            z = std::clamp(z, -config.clip_sigma, config.clip_sigma);
            // [-clip, +clip] -> [0, B); the upper clip lands in the last bin.
            int bin = static_cast<int>(std::floor((z + config.clip_sigma) / (2.0 * config.clip_sigma) *
                                                  static_cast<double>(B)));
            bin = std::clamp(bin, 0, B - 1);
            seq.tokens[static_cast<std::size_t>(t) * kNumFeatures + j] = j * B + bin;
        }
    }
    return seq;
}

TargetSequence encode_target(const SetupPlan& setup) {
    TargetSequence seq;
    seq.tokens.reserve(setup.y.size() + 1);
    seq.tokens.push_back(TOK_BOS);
    for (int v : setup.y) {
        if (v != 0 && v != 1) throw std::invalid_argument("encode_target: setup entry not binary");
        seq.tokens.push_back(v == 1 ? TOK_ONE : TOK_ZERO);
    }
    return seq;
}

SetupPlan decode_target(const std::vector<int>& tokens) {
    SetupPlan plan;
    std::size_t start = 0;
    if (!tokens.empty() && tokens[0] == TOK_BOS) start = 1;
    plan.y.reserve(tokens.size() - start);
    for (std::size_t i = start; i < tokens.size(); ++i) {
        if (tokens[i] == TOK_ONE)
            plan.y.push_back(1);
        else if (tokens[i] == TOK_ZERO)
            plan.y.push_back(0);
        else
            throw std::invalid_argument("decode_target: malformed sequence, token " +
                                        std::to_string(tokens[i]) + " at position " + std::to_string(i));
    }
    return plan;
}

} // namespace clsp
