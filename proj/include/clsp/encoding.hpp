#ifndef CLSP_ENCODING_HPP
#define CLSP_ENCODING_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "clsp/core.hpp"

namespace clsp {

// Target vocabulary. Fixed; the decoder grammar is BOS followed by T
// ZERO/ONE labels.
enum TargetToken : int { TOK_PAD = 0, TOK_BOS = 1, TOK_ZERO = 2, TOK_ONE = 3 };
inline constexpr int kTargetVocab = 4;

inline constexpr int kNumFeatures = 5; // feature order: d, p, f, cap, h
extern const std::array<const char*, kNumFeatures> kFeatureNames;

// Numeric-to-token scheme: each (feature, period) value is log-scaled where
// flagged, standardized with corpus statistics, clipped to +-clip_sigma, and
// bucketed into bins_per_feature uniform bins. Token id = feature * B + bin,
// so the source vocabulary is 5 * B (12000 with the default B = 2400).
struct TokenizerConfig {
    int bins_per_feature = 2400;
    std::array<bool, kNumFeatures> log_scale = {true, false, true, true, false};
    double clip_sigma = 4.0;
    std::array<double, kNumFeatures> mean{};
    std::array<double, kNumFeatures> stddev{};
    bool fitted = false;

    int source_vocab() const { return kNumFeatures * bins_per_feature; }

    std::string to_json() const;
    static TokenizerConfig from_json(const std::string& json);
};

// Period-major token layout: position 5*t + feature.
struct SourceSequence {
    std::vector<int> tokens;
};

// Decoder-input form: BOS followed by the T labels.
struct TargetSequence {
    std::vector<int> tokens;

    // The teacher-forcing targets (everything after BOS).
    std::vector<int> labels() const { return {tokens.begin() + 1, tokens.end()}; }
};

// Per-feature mean/std over all periods of all instances, after log(1+v)
// scaling where flagged. Population std, floored at 1e-6. Throws on an empty
// corpus.
TokenizerConfig fit_normalizer(const std::vector<Instance>& corpus, int bins_per_feature = 2400);

SourceSequence encode_source(const Instance& inst, const TokenizerConfig& config);

TargetSequence encode_target(const SetupPlan& setup);

// Accepts sequences with or without the leading BOS; PAD or BOS anywhere
// after the head is a malformed-sequence error (std::invalid_argument).
SetupPlan decode_target(const std::vector<int>& tokens);

} // namespace clsp

#endif
