#ifndef CLSP_TRANSFORMER_HPP
#define CLSP_TRANSFORMER_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clsp/core.hpp"
#include "clsp/kernels.hpp"

namespace clsp::nn {

struct ModelConfig {
    int enc_layers = 2;
    int dec_layers = 2;
    int heads = 2;
    int d_model = 64;
    int d_ff = 256;
    int src_vocab = 12000;
    int tgt_vocab = 4;
    int max_src_len = 512;
    int max_tgt_len = 128;
    double dropout = 0.1;
    std::uint64_t param_seed = 1;

    int head_dim() const { return d_model / heads; }
    void validate() const; // throws std::invalid_argument (e.g. d_model % heads != 0)

    std::string to_json() const;
    static ModelConfig from_json(const std::string& json);
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 32;
    int steps = 1000;
    int warmup_steps = 0;
    double label_smoothing = 0.0;
    std::uint64_t data_seed = 1;
    bool shuffle = true;
    int log_every = 50;

    void validate() const;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& json);
};

template <typename S>
struct NamedTensor {
    std::string name;
    Mat<S> m;
    bool trainable = true;
};

// All model state: trainable tensors plus the precomputed sinusoidal
// positional encodings (non-trainable buffers). Tensor order is fixed by
// construction and is the canonical order for initialization draws, Adam
// state, gradient vectors and checkpoint layout.
template <typename S>
struct Parameters {
    ModelConfig config;
    std::vector<NamedTensor<S>> tensors;

    Mat<S>& get(const std::string& name);
    const Mat<S>& get(const std::string& name) const;
    int find(const std::string& name) const; // -1 if absent

    std::size_t trainable_scalars() const;
    std::vector<Mat<S>> zero_grads() const; // aligned with tensors (empty mats for buffers)
};

// Deterministic from config.param_seed: Glorot-uniform projections,
// 1/sqrt(d_model)-scaled uniform embeddings, unit layer-norm gains.
template <typename S>
Parameters<S> init_parameters(const ModelConfig& config);

// Attention maps from one forward pass, row-stochastic.
template <typename S>
struct AttentionMaps {
    // Indexed [layer * heads + head].
    std::vector<Mat<S>> enc_self; // [src_len, src_len]
    std::vector<Mat<S>> dec_self; // [tgt_len, tgt_len]
    std::vector<Mat<S>> cross;    // [tgt_len, src_len]
};

template <typename S>
struct ForwardResult {
    Mat<S> logits; // [tgt_len, tgt_vocab]
    AttentionMaps<S> attention;
};

// Single-sequence evaluation-mode forward pass (dropout off). Decoder
// self-attention is causally masked. Throws on out-of-range tokens or
// lengths beyond the configured maxima.
template <typename S>
ForwardResult<S> forward(const Parameters<S>& params, const std::vector<int>& src_tokens,
                         const std::vector<int>& dec_in_tokens);

// A teacher-forcing minibatch with uniform sequence lengths. target[i] is
// dec_in[i] shifted left by one; PAD target positions are excluded from the
// loss.
struct Batch {
    int size = 0;
    int src_len = 0;
    int tgt_len = 0;
    std::vector<int> src;    // size * src_len
    std::vector<int> dec_in; // size * tgt_len
    std::vector<int> target; // size * tgt_len

    void validate(const ModelConfig& config) const;
};

template <typename S>
struct LossGrads {
    double loss = 0.0;
    std::vector<Mat<S>> grads; // aligned with Parameters::tensors
};

// Mean cross-entropy over non-PAD target positions, with reverse-mode
// gradients for every trainable tensor. Dropout is applied only when
// train_mode is set (mask stream seeded by dropout_seed). loss_scale
// multiplies the loss and therefore every gradient.
template <typename S>
LossGrads<S> loss_and_grads(const Parameters<S>& params, const Batch& batch,
                            double label_smoothing = 0.0, bool train_mode = false,
                            std::uint64_t dropout_seed = 0, double loss_scale = 1.0);

template <typename S>
struct AdamState {
    std::vector<Mat<S>> m, v; // aligned with Parameters::tensors
    std::int64_t step = 0;

    static AdamState zeros_like(const Parameters<S>& params);
};

// Bias-corrected Adam with linear warmup on the learning rate. Validates all
// gradients finite before touching any parameter; throws std::runtime_error
// naming the offending tensor otherwise.
template <typename S>
void adam_step(Parameters<S>& params, const std::vector<Mat<S>>& grads, AdamState<S>& state,
               const TrainConfig& config);

struct TrainExample {
    std::vector<int> src;
    std::vector<int> dec_in;
    std::vector<int> target;
};

struct TrainReport {
    std::vector<double> loss_history; // one entry per completed step
    std::vector<std::pair<int, double>> val_token_accuracy;
    double final_train_token_accuracy = -1.0;
    bool diverged = false;
    int steps_completed = 0;
};

struct TrainOutput {
    Parameters<float> params;
    AdamState<float> adam;
    TrainReport report;
};

// Teacher-forced minibatch training. Deterministic given the two seeds (data
// order + dropout from train.data_seed, init from model.param_seed); kernel
// results are thread-count invariant. On divergence (non-finite loss) returns
// the parameters as of the last completed step with report.diverged set.
TrainOutput train(const ModelConfig& model, const TrainConfig& config,
                  const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& val_set = {});

// Evaluation-mode per-token argmax accuracy against the examples' targets.
template <typename S>
double token_accuracy(const Parameters<S>& params, const std::vector<TrainExample>& examples);

// Autoregressive argmax decode, exactly plan_length steps, restricted to the
// {ZERO, ONE} label tokens; ties resolve to ZERO.
template <typename S>
SetupPlan greedy_decode(const Parameters<S>& params, const std::vector<int>& src_tokens,
                        int plan_length);

// Central-difference verification of loss_and_grads at 64-bit precision on a
// tiny config. Samples scalars round-robin across all trainable tensors;
// returns the worst relative error.
double gradient_check(const ModelConfig& config, std::uint64_t seed, int samples = 200,
                      double fd_step = 1e-5);

} // namespace clsp::nn

#endif
