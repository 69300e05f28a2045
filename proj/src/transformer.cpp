#include "clsp/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "clsp/encoding.hpp"
#include "clsp/rng.hpp"
#include "json.hpp"

namespace clsp::nn {

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (enc_layers < 1 || dec_layers < 1) throw std::invalid_argument("model: need at least one layer per stack");
    if (heads < 1) throw std::invalid_argument("model: heads must be positive");
    if (d_model % heads != 0) throw std::invalid_argument("model: d_model must be divisible by heads");
    if (d_ff < 1 || d_model < 1) throw std::invalid_argument("model: dimensions must be positive");
    if (src_vocab < 1 || tgt_vocab < 2) throw std::invalid_argument("model: bad vocab sizes");
    if (max_src_len < 1 || max_tgt_len < 1) throw std::invalid_argument("model: bad max lengths");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model: dropout must be in [0, 1)");
}

std::string ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["enc_layers"] = enc_layers;
    j["dec_layers"] = dec_layers;
    j["heads"] = heads;
    j["d_model"] = d_model;
    j["d_ff"] = d_ff;
    j["src_vocab"] = src_vocab;
    j["tgt_vocab"] = tgt_vocab;
    j["max_src_len"] = max_src_len;
    j["max_tgt_len"] = max_tgt_len;
    j["dropout"] = dropout;
    j["param_seed"] = param_seed;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json) {
    const auto j = nlohmann::ordered_json::parse(json);
    ModelConfig c;
    c.enc_layers = j.value("enc_layers", c.enc_layers);
    c.dec_layers = j.value("dec_layers", c.dec_layers);
    c.heads = j.value("heads", c.heads);
    c.d_model = j.value("d_model", c.d_model);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.src_vocab = j.value("src_vocab", c.src_vocab);
    c.tgt_vocab = j.value("tgt_vocab", c.tgt_vocab);
    c.max_src_len = j.value("max_src_len", c.max_src_len);
    c.max_tgt_len = j.value("max_tgt_len", c.max_tgt_len);
    c.dropout = j.value("dropout", c.dropout);
    c.param_seed = j.value("param_seed", c.param_seed);
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (!(lr > 0)) throw std::invalid_argument("train: lr must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw std::invalid_argument("train: bad betas");
    if (!(eps > 0)) throw std::invalid_argument("train: eps must be positive");
    if (batch_size < 1 || steps < 0 || warmup_steps < 0) throw std::invalid_argument("train: bad counts");
    if (label_smoothing < 0 || label_smoothing >= 1) throw std::invalid_argument("train: bad label smoothing");
}

std::string TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["eps"] = eps;
    j["batch_size"] = batch_size;
    j["steps"] = steps;
    j["warmup_steps"] = warmup_steps;
    j["label_smoothing"] = label_smoothing;
    j["data_seed"] = data_seed;
    j["shuffle"] = shuffle;
    j["log_every"] = log_every;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& json) {
    const auto j = nlohmann::ordered_json::parse(json);
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.shuffle = j.value("shuffle", c.shuffle);
    c.log_every = j.value("log_every", c.log_every);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Parameter construction.
//
// Tensor order is canonical; the Layout struct below derives flat indices
// from it, so the two must stay in sync.
// ---------------------------------------------------------------------------

namespace {

enum class Init { Glorot, Embedding, Zeros, Ones, Buffer };

struct TensorSpec {
    std::string name;
    int rows, cols;
    Init init;
    bool trainable;
};

std::vector<TensorSpec> build_specs(const ModelConfig& c) {
    std::vector<TensorSpec> specs;
    auto add = [&](std::string name, int r, int cc, Init init) {
        specs.push_back({std::move(name), r, cc, init, init != Init::Buffer});
    };
    auto add_ln = [&](const std::string& prefix) {
        add(prefix + ".g", 1, c.d_model, Init::Ones);
        add(prefix + ".b", 1, c.d_model, Init::Zeros);
    };
    auto add_attn = [&](const std::string& prefix) {
        for (const char* w : {"wq", "wk", "wv", "wo"}) {
            add(prefix + "." + w, c.d_model, c.d_model, Init::Glorot);
            std::string b = w;
            b[0] = 'b';
            add(prefix + "." + b, 1, c.d_model, Init::Zeros);
        }
    };
    auto add_ff = [&](const std::string& prefix) {
        add(prefix + ".w1", c.d_model, c.d_ff, Init::Glorot);
        add(prefix + ".b1", 1, c.d_ff, Init::Zeros);
        add(prefix + ".w2", c.d_ff, c.d_model, Init::Glorot);
        add(prefix + ".b2", 1, c.d_model, Init::Zeros);
    };

    add("src_embed", c.src_vocab, c.d_model, Init::Embedding);
    add("tgt_embed", c.tgt_vocab, c.d_model, Init::Embedding);
    add("pos_src", c.max_src_len, c.d_model, Init::Buffer);
    add("pos_tgt", c.max_tgt_len, c.d_model, Init::Buffer);
    for (int i = 0; i < c.enc_layers; ++i) {
        const std::string p = "enc" + std::to_string(i);
        add_ln(p + ".ln1");
        add_attn(p + ".attn");
        add_ln(p + ".ln2");
        add_ff(p + ".ff");
    }
    for (int i = 0; i < c.dec_layers; ++i) {
        const std::string p = "dec" + std::to_string(i);
        add_ln(p + ".ln1");
        add_attn(p + ".self");
        add_ln(p + ".ln2");
        add_attn(p + ".cross");
        add_ln(p + ".ln3");
        add_ff(p + ".ff");
    }
    add_ln("enc_ln");
    add_ln("dec_ln");
    add("out.w", c.d_model, c.tgt_vocab, Init::Glorot);
    add("out.b", 1, c.tgt_vocab, Init::Zeros);
    return specs;
}

// Flat tensor indices implied by build_specs order.
struct Layout {
    int enc_layers, dec_layers;
    static constexpr int kAttn = 8;       // wq bq wk bk wv bv wo bo
    static constexpr int kEncStride = 16; // ln1(2) attn(8) ln2(2) ff(4)
    static constexpr int kDecStride = 26; // ln1(2) self(8) ln2(2) cross(8) ln3(2) ff(4)

    explicit Layout(const ModelConfig& c) : enc_layers(c.enc_layers), dec_layers(c.dec_layers) {}

    int src_embed() const { return 0; }
    int tgt_embed() const { return 1; }
    int pos_src() const { return 2; }
    int pos_tgt() const { return 3; }
    int enc(int layer) const { return 4 + layer * kEncStride; }
    int dec(int layer) const { return 4 + enc_layers * kEncStride + layer * kDecStride; }
    int tail() const { return 4 + enc_layers * kEncStride + dec_layers * kDecStride; }
    int enc_ln() const { return tail(); }
    int dec_ln() const { return tail() + 2; }
    int out_w() const { return tail() + 4; }
    int out_b() const { return tail() + 5; }
    int total() const { return tail() + 6; }
};

template <typename S>
void fill_sinusoidal(Mat<S>& pe, int d_model) {
    for (int pos = 0; pos < pe.rows; ++pos) {
        for (int i = 0; i < d_model / 2; ++i) {
            const double angle = pos / std::pow(10000.0, (2.0 * i) / d_model);
            pe.at(pos, 2 * i) = static_cast<S>(std::sin(angle));
            if (2 * i + 1 < d_model) pe.at(pos, 2 * i + 1) = static_cast<S>(std::cos(angle));
        }
    }
}

} // namespace

template <typename S>
Mat<S>& Parameters<S>::get(const std::string& name) {
    const int i = find(name);
    if (i < 0) throw std::invalid_argument("no tensor named " + name);
    return tensors[i].m;
}

template <typename S>
const Mat<S>& Parameters<S>::get(const std::string& name) const {
    const int i = find(name);
    if (i < 0) throw std::invalid_argument("no tensor named " + name);
    return tensors[i].m;
}

template <typename S>
int Parameters<S>::find(const std::string& name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i)
        if (tensors[i].name == name) return static_cast<int>(i);
    return -1;
}

template <typename S>
std::size_t Parameters<S>::trainable_scalars() const {
    std::size_t n = 0;
    for (const auto& t : tensors)
        if (t.trainable) n += t.m.size();
    return n;
}

template <typename S>
std::vector<Mat<S>> Parameters<S>::zero_grads() const {
    std::vector<Mat<S>> g;
    g.reserve(tensors.size());
    for (const auto& t : tensors) g.emplace_back(t.trainable ? Mat<S>(t.m.rows, t.m.cols) : Mat<S>());
    return g;
}

template <typename S>
Parameters<S> init_parameters(const ModelConfig& config) {
    config.validate();
    Parameters<S> params;
    params.config = config;

    SplitMix64 rng(config.param_seed);
    for (const auto& spec : build_specs(config)) {
        NamedTensor<S> t;
        t.name = spec.name;
        t.trainable = spec.trainable;
        t.m = Mat<S>(spec.rows, spec.cols);
        switch (spec.init) {
            case Init::Glorot: {
                const double limit = std::sqrt(6.0 / (spec.rows + spec.cols));
                for (auto& v : t.m.a) v = static_cast<S>(rng.uniform_real(-limit, limit));
                break;
            }
            case Init::Embedding: {
                const double limit = std::sqrt(3.0 / config.d_model);
                for (auto& v : t.m.a) v = static_cast<S>(rng.uniform_real(-limit, limit));
                break;
            }
            case Init::Ones:
                std::fill(t.m.a.begin(), t.m.a.end(), S(1));
                break;
            case Init::Zeros:
                break;
            case Init::Buffer:
                fill_sinusoidal(t.m, config.d_model);
                break;
        }
        params.tensors.push_back(std::move(t));
    }
    return params;
}

// ---------------------------------------------------------------------------
// Elementwise / row-wise helpers
// ---------------------------------------------------------------------------

namespace {

template <typename S>
void add_bias_rows(Mat<S>& x, const Mat<S>& bias) {
#pragma omp parallel for schedule(static) if (x.rows >= 64)
    for (int i = 0; i < x.rows; ++i) {
        S* r = x.row(i);
        const S* b = bias.row(0);
        for (int j = 0; j < x.cols; ++j) r[j] += b[j];
    }
}

template <typename S>
void colsum_into(const Mat<S>& x, Mat<S>& out) {
    S* o = out.row(0);
    for (int i = 0; i < x.rows; ++i) {
        const S* r = x.row(i);
        for (int j = 0; j < x.cols; ++j) o[j] += r[j];
    }
}

template <typename S>
struct LnCache {
    Mat<S> xhat;
    std::vector<S> inv_std;
};

template <typename S>
void layernorm_forward(const Mat<S>& x, const Mat<S>& gain, const Mat<S>& bias, LnCache<S>& cache,
                       Mat<S>& out) {
    const S eps = static_cast<S>(1e-5);
    const int D = x.cols;
    cache.xhat = Mat<S>(x.rows, D);
    cache.inv_std.assign(x.rows, S(0));
    out = Mat<S>(x.rows, D);
#pragma omp parallel for schedule(static) if (x.rows >= 64)
    for (int i = 0; i < x.rows; ++i) {
        const S* r = x.row(i);
        S mean = 0;
        for (int j = 0; j < D; ++j) mean += r[j];
        mean /= static_cast<S>(D);
        S var = 0;
        for (int j = 0; j < D; ++j) var += (r[j] - mean) * (r[j] - mean);
        var /= static_cast<S>(D);
        const S inv = S(1) / std::sqrt(var + eps);
        cache.inv_std[i] = inv;
        S* xh = cache.xhat.row(i);
        S* o = out.row(i);
        const S* g = gain.row(0);
        const S* b = bias.row(0);
        for (int j = 0; j < D; ++j) {
            xh[j] = (r[j] - mean) * inv;
            o[j] = g[j] * xh[j] + b[j];
        }
    }
}

template <typename S>
void layernorm_backward(const Mat<S>& dy, const Mat<S>& gain, const LnCache<S>& cache,
                        Mat<S>& dx_accum, Mat<S>& dgain, Mat<S>& dbias) {
    const int D = dy.cols;
#pragma omp parallel for schedule(static) if (dy.rows >= 64)
    for (int i = 0; i < dy.rows; ++i) {
        const S* dyr = dy.row(i);
        const S* xh = cache.xhat.row(i);
        const S* g = gain.row(0);
        S* dx = dx_accum.row(i);
        S sum_dxhat = 0, dot_dxhat = 0;
        for (int j = 0; j < D; ++j) {
            const S dxh = dyr[j] * g[j];
            sum_dxhat += dxh;
            dot_dxhat += dxh * xh[j];
        }
        const S inv = cache.inv_std[i];
        const S invD = S(1) / static_cast<S>(D);
        for (int j = 0; j < D; ++j) {
            const S dxh = dyr[j] * g[j];
            dx[j] += inv * (dxh - sum_dxhat * invD - xh[j] * (dot_dxhat * invD));
        }
    }
    // Serial reductions for the gain/bias grads keep accumulation order fixed.
    S* dg = dgain.row(0);
    S* db = dbias.row(0);
    for (int i = 0; i < dy.rows; ++i) {
        const S* dyr = dy.row(i);
        const S* xh = cache.xhat.row(i);
        for (int j = 0; j < D; ++j) {
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
        }
    }
}

template <typename S>
struct DropCache {
    Mat<S> mask;
    bool active = false;
};

// Inverted dropout; mask entries are 0 or 1/(1-p), drawn serially so the
// stream is independent of thread count.
template <typename S>
void dropout_forward(Mat<S>& x, double p, SplitMix64& rng, DropCache<S>& cache) {
    if (p <= 0.0) {
        cache.active = false;
        return;
    }
    cache.active = true;
    cache.mask = Mat<S>(x.rows, x.cols);
    const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < x.a.size(); ++i) {
        const S m = rng.uniform_real() < p ? S(0) : keep_scale;
        cache.mask.a[i] = m;
        x.a[i] *= m;
    }
}

template <typename S>
void dropout_backward(Mat<S>& dx, const DropCache<S>& cache) {
    if (!cache.active) return;
    for (std::size_t i = 0; i < dx.a.size(); ++i) dx.a[i] *= cache.mask.a[i];
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

template <typename S>
struct AttnWeights {
    const Mat<S>&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo;
};

template <typename S>
struct AttnGrads {
    Mat<S>&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo;
};

template <typename S, typename Vec>
AttnWeights<S> attn_weights(const Vec& tensors, int base) {
    return {tensors[base + 0].m, tensors[base + 1].m, tensors[base + 2].m, tensors[base + 3].m,
            tensors[base + 4].m, tensors[base + 5].m, tensors[base + 6].m, tensors[base + 7].m};
}

template <typename S>
AttnGrads<S> attn_grads(std::vector<Mat<S>>& grads, int base) {
    return {grads[base + 0], grads[base + 1], grads[base + 2], grads[base + 3],
            grads[base + 4], grads[base + 5], grads[base + 6], grads[base + 7]};
}

template <typename S>
struct AttnCache {
    Mat<S> q_in, kv_in;        // layer-norm outputs feeding the projections
    Mat<S> Q, K, V, ctx;       // [B*Tq, D] / [B*Tk, D]
    std::vector<Mat<S>> probs; // per b*heads+h, [Tq, Tk], row-stochastic
};

// q_in: [B*Tq, D], kv_in: [B*Tk, D]; causal implies Tq == Tk and key j <= query i.
template <typename S>
void attention_forward(const AttnWeights<S>& w, const Mat<S>& q_in, const Mat<S>& kv_in, int B,
                       int Tq, int Tk, int heads, bool causal, AttnCache<S>& cache, Mat<S>& out) {
    const int D = q_in.cols;
    const int Dh = D / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(Dh)));

    cache.q_in = q_in;
    cache.kv_in = kv_in;
    cache.Q = Mat<S>(B * Tq, D);
    cache.K = Mat<S>(B * Tk, D);
    cache.V = Mat<S>(B * Tk, D);
    matmul_nn(q_in, w.wq, cache.Q);
    add_bias_rows(cache.Q, w.bq);
    matmul_nn(kv_in, w.wk, cache.K);
    add_bias_rows(cache.K, w.bk);
    matmul_nn(kv_in, w.wv, cache.V);
    add_bias_rows(cache.V, w.bv);

    cache.ctx = Mat<S>(B * Tq, D);
    cache.probs.assign(static_cast<std::size_t>(B) * heads, Mat<S>());

#pragma omp parallel for schedule(static)
    for (int bh = 0; bh < B * heads; ++bh) {
        const int b = bh / heads;
        const int h = bh % heads;
        const int off = h * Dh;
        Mat<S>& probs = cache.probs[bh];
        probs = Mat<S>(Tq, Tk);
        for (int i = 0; i < Tq; ++i) {
            const S* q = cache.Q.row(b * Tq + i) + off;
            const int kmax = causal ? i + 1 : Tk;
            S* pr = probs.row(i);
            S best = std::numeric_limits<S>::lowest();
            for (int j = 0; j < kmax; ++j) {
                const S* k = cache.K.row(b * Tk + j) + off;
                S dot = 0;
                for (int d = 0; d < Dh; ++d) dot += q[d] * k[d];
                pr[j] = dot * scale;
                best = std::max(best, pr[j]);
            }
            S denom = 0;
            for (int j = 0; j < kmax; ++j) {
                pr[j] = std::exp(pr[j] - best);
                denom += pr[j];
            }
            const S inv = S(1) / denom;
            for (int j = 0; j < kmax; ++j) pr[j] *= inv;
            S* cx = cache.ctx.row(b * Tq + i) + off;
            for (int j = 0; j < kmax; ++j) {
                const S* v = cache.V.row(b * Tk + j) + off;
                const S pij = pr[j];
                for (int d = 0; d < Dh; ++d) cx[d] += pij * v[d];
            }
        }
    }

    out = Mat<S>(B * Tq, D);
    matmul_nn(cache.ctx, w.wo, out);
    add_bias_rows(out, w.bo);
}

// dq_in and dkv_in are accumulated (+=); they may alias each other for
// self-attention.
template <typename S>
void attention_backward(const AttnWeights<S>& w, const AttnCache<S>& cache, const Mat<S>& dout,
                        int B, int Tq, int Tk, int heads, bool causal, Mat<S>& dq_in,
                        Mat<S>& dkv_in, AttnGrads<S>& g) {
    const int D = dout.cols;
    const int Dh = D / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(Dh)));

    Mat<S> dctx(B * Tq, D);
    matmul_nt(dout, w.wo, dctx);
    matmul_tn(cache.ctx, dout, g.wo);
    colsum_into(dout, g.bo);

    Mat<S> dQ(B * Tq, D), dK(B * Tk, D), dV(B * Tk, D);

#pragma omp parallel for schedule(static)
    for (int bh = 0; bh < B * heads; ++bh) {
        const int b = bh / heads;
        const int h = bh % heads;
        const int off = h * Dh;
        const Mat<S>& probs = cache.probs[bh];
        std::vector<S> dprobs(Tk);
        for (int i = 0; i < Tq; ++i) {
            const int kmax = causal ? i + 1 : Tk;
            const S* dcx = dctx.row(b * Tq + i) + off;
            const S* pr = probs.row(i);
            // dV and dprobs
            S dot = 0;
            for (int j = 0; j < kmax; ++j) {
                const S* v = cache.V.row(b * Tk + j) + off;
                S dp = 0;
                for (int d = 0; d < Dh; ++d) dp += dcx[d] * v[d];
                dprobs[j] = dp;
                dot += dp * pr[j];
                S* dv = dV.row(b * Tk + j) + off;
                const S pij = pr[j];
                for (int d = 0; d < Dh; ++d) dv[d] += pij * dcx[d];
            }
            // softmax backward, then dQ / dK through the scaled dot product
            const S* q = cache.Q.row(b * Tq + i) + off;
            S* dq = dQ.row(b * Tq + i) + off;
            for (int j = 0; j < kmax; ++j) {
                const S ds = pr[j] * (dprobs[j] - dot) * scale;
                const S* k = cache.K.row(b * Tk + j) + off;
                S* dk = dK.row(b * Tk + j) + off;
                for (int d = 0; d < Dh; ++d) {
                    dq[d] += ds * k[d];
                    dk[d] += ds * q[d];
                }
            }
        }
    }

    matmul_nt(dQ, w.wq, dq_in);
    matmul_tn(cache.q_in, dQ, g.wq);
    colsum_into(dQ, g.bq);
    matmul_nt(dK, w.wk, dkv_in);
    matmul_tn(cache.kv_in, dK, g.wk);
    colsum_into(dK, g.bk);
    matmul_nt(dV, w.wv, dkv_in);
    matmul_tn(cache.kv_in, dV, g.wv);
    colsum_into(dV, g.bv);
}

// ---------------------------------------------------------------------------
// Feed-forward block
// ---------------------------------------------------------------------------

template <typename S>
struct FfCache {
    Mat<S> in;    // layer-norm output feeding w1
    Mat<S> h_act; // relu(in*w1 + b1)
};

template <typename S>
void ff_forward(const Mat<S>& w1, const Mat<S>& b1, const Mat<S>& w2, const Mat<S>& b2,
                const Mat<S>& in, FfCache<S>& cache, Mat<S>& out) {
    cache.in = in;
    cache.h_act = Mat<S>(in.rows, w1.cols);
    matmul_nn(in, w1, cache.h_act);
    add_bias_rows(cache.h_act, b1);
    for (auto& v : cache.h_act.a) v = std::max(v, S(0));
    out = Mat<S>(in.rows, w2.cols);
    matmul_nn(cache.h_act, w2, out);
    add_bias_rows(out, b2);
}

template <typename S>
void ff_backward(const Mat<S>& w1, const Mat<S>& w2, const FfCache<S>& cache, const Mat<S>& dout,
                 Mat<S>& din, Mat<S>& dw1, Mat<S>& db1, Mat<S>& dw2, Mat<S>& db2) {
    matmul_tn(cache.h_act, dout, dw2);
    colsum_into(dout, db2);
    Mat<S> dh(cache.h_act.rows, cache.h_act.cols);
    matmul_nt(dout, w2, dh);
    for (std::size_t i = 0; i < dh.a.size(); ++i)
        if (cache.h_act.a[i] <= S(0)) dh.a[i] = S(0);
    matmul_tn(cache.in, dh, dw1);
    colsum_into(dh, db1);
    din = Mat<S>(cache.in.rows, cache.in.cols);
    matmul_nt(dh, w1, din);
}

// ---------------------------------------------------------------------------
// Full model forward/backward over a uniform-length batch
// ---------------------------------------------------------------------------

template <typename S>
struct EncLayerCache {
    LnCache<S> ln1, ln2;
    AttnCache<S> attn;
    FfCache<S> ff;
    DropCache<S> dp1, dp2;
};

template <typename S>
struct DecLayerCache {
    LnCache<S> ln1, ln2, ln3;
    AttnCache<S> self_attn, cross_attn;
    FfCache<S> ff;
    DropCache<S> dp1, dp2, dp3;
};

template <typename S>
struct ModelCache {
    int B = 0, S_len = 0, T_len = 0;
    DropCache<S> dp_src, dp_tgt;
    std::vector<EncLayerCache<S>> enc;
    LnCache<S> enc_ln;
    Mat<S> enc_out;
    std::vector<DecLayerCache<S>> dec;
    LnCache<S> dec_ln;
    Mat<S> dec_out;
    Mat<S> logits;
};

template <typename S>
void embed_tokens(const Mat<S>& table, const Mat<S>& pos, const std::vector<int>& tokens, int B,
                  int L, int d_model, Mat<S>& out) {
    const S scale = static_cast<S>(std::sqrt(static_cast<double>(d_model)));
    out = Mat<S>(B * L, d_model);
#pragma omp parallel for schedule(static) if (B * L >= 64)
    for (int r = 0; r < B * L; ++r) {
        const int tok = tokens[r];
        const int position = r % L;
        const S* e = table.row(tok);
        const S* pe = pos.row(position);
        S* o = out.row(r);
        for (int j = 0; j < d_model; ++j) o[j] = e[j] * scale + pe[j];
    }
}

template <typename S>
void check_tokens(const std::vector<int>& tokens, int vocab, const char* what) {
    for (int t : tokens)
        if (t < 0 || t >= vocab)
            throw std::invalid_argument(std::string(what) + ": token " + std::to_string(t) +
                                        " out of range [0, " + std::to_string(vocab) + ")");
}

template <typename S>
void model_forward(const Parameters<S>& params, const std::vector<int>& src,
                   const std::vector<int>& dec_in, int B, int S_len, int T_len, bool train_mode,
                   std::uint64_t dropout_seed, ModelCache<S>& mc) {
    const auto& c = params.config;
    const Layout ly(c);
    const double p_drop = train_mode ? c.dropout : 0.0;
    SplitMix64 drop_rng(dropout_seed);

    mc.B = B;
    mc.S_len = S_len;
    mc.T_len = T_len;

    check_tokens<S>(src, c.src_vocab, "source");
    check_tokens<S>(dec_in, c.tgt_vocab, "decoder input");
    if (S_len > c.max_src_len) throw std::invalid_argument("source length exceeds model maximum");
    if (T_len > c.max_tgt_len) throw std::invalid_argument("target length exceeds model maximum");

    const auto& tensors = params.tensors;

    // Encoder
    Mat<S> x;
    embed_tokens(tensors[ly.src_embed()].m, tensors[ly.pos_src()].m, src, B, S_len, c.d_model, x);
    dropout_forward(x, p_drop, drop_rng, mc.dp_src);
    mc.enc.assign(c.enc_layers, {});
    for (int l = 0; l < c.enc_layers; ++l) {
        auto& lc = mc.enc[l];
        const int base = ly.enc(l);
        Mat<S> n1;
        layernorm_forward(x, tensors[base].m, tensors[base + 1].m, lc.ln1, n1);
        Mat<S> attn_out;
        attention_forward(attn_weights<S>(tensors, base + 2), n1, n1, B, S_len, S_len, c.heads,
                          false, lc.attn, attn_out);
        dropout_forward(attn_out, p_drop, drop_rng, lc.dp1);
        for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] += attn_out.a[i];

        Mat<S> n2;
        layernorm_forward(x, tensors[base + 10].m, tensors[base + 11].m, lc.ln2, n2);
        Mat<S> ff_out;
        ff_forward(tensors[base + 12].m, tensors[base + 13].m, tensors[base + 14].m,
                   tensors[base + 15].m, n2, lc.ff, ff_out);
        dropout_forward(ff_out, p_drop, drop_rng, lc.dp2);
        for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] += ff_out.a[i];
    }
    layernorm_forward(x, tensors[ly.enc_ln()].m, tensors[ly.enc_ln() + 1].m, mc.enc_ln, mc.enc_out);

    // Decoder
    Mat<S> y;
    embed_tokens(tensors[ly.tgt_embed()].m, tensors[ly.pos_tgt()].m, dec_in, B, T_len, c.d_model, y);
    dropout_forward(y, p_drop, drop_rng, mc.dp_tgt);
    mc.dec.assign(c.dec_layers, {});
    for (int l = 0; l < c.dec_layers; ++l) {
        auto& lc = mc.dec[l];
        const int base = ly.dec(l);
        Mat<S> n1;
        layernorm_forward(y, tensors[base].m, tensors[base + 1].m, lc.ln1, n1);
        Mat<S> sa;
        attention_forward(attn_weights<S>(tensors, base + 2), n1, n1, B, T_len, T_len, c.heads,
                          true, lc.self_attn, sa);
        dropout_forward(sa, p_drop, drop_rng, lc.dp1);
        for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] += sa.a[i];

        Mat<S> n2;
        layernorm_forward(y, tensors[base + 10].m, tensors[base + 11].m, lc.ln2, n2);
        Mat<S> ca;
        attention_forward(attn_weights<S>(tensors, base + 12), n2, mc.enc_out, B, T_len, S_len,
                          c.heads, false, lc.cross_attn, ca);
        dropout_forward(ca, p_drop, drop_rng, lc.dp2);
        for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] += ca.a[i];

        Mat<S> n3;
        layernorm_forward(y, tensors[base + 20].m, tensors[base + 21].m, lc.ln3, n3);
        Mat<S> ff_out;
        ff_forward(tensors[base + 22].m, tensors[base + 23].m, tensors[base + 24].m,
                   tensors[base + 25].m, n3, lc.ff, ff_out);
        dropout_forward(ff_out, p_drop, drop_rng, lc.dp3);
        for (std::size_t i = 0; i < y.a.size(); ++i) y.a[i] += ff_out.a[i];
    }
    layernorm_forward(y, tensors[ly.dec_ln()].m, tensors[ly.dec_ln() + 1].m, mc.dec_ln, mc.dec_out);

    mc.logits = Mat<S>(B * T_len, c.tgt_vocab);
    matmul_nn(mc.dec_out, tensors[ly.out_w()].m, mc.logits);
    add_bias_rows(mc.logits, tensors[ly.out_b()].m);
}

// dlogits -> gradients for every trainable tensor.
template <typename S>
void model_backward(const Parameters<S>& params, const ModelCache<S>& mc,
                    const std::vector<int>& src, const std::vector<int>& dec_in,
                    const Mat<S>& dlogits, std::vector<Mat<S>>& grads) {
    const auto& c = params.config;
    const Layout ly(c);
    const auto& tensors = params.tensors;
    const int B = mc.B, S_len = mc.S_len, T_len = mc.T_len;

    // Output projection
    Mat<S> d_dec_out(B * T_len, c.d_model);
    matmul_nt(dlogits, tensors[ly.out_w()].m, d_dec_out);
    matmul_tn(mc.dec_out, dlogits, grads[ly.out_w()]);
    colsum_into(dlogits, grads[ly.out_b()]);

    Mat<S> dy(B * T_len, c.d_model);
    layernorm_backward(d_dec_out, tensors[ly.dec_ln()].m, mc.dec_ln, dy, grads[ly.dec_ln()],
                       grads[ly.dec_ln() + 1]);

    Mat<S> d_enc_out(B * S_len, c.d_model);

    for (int l = c.dec_layers - 1; l >= 0; --l) {
        const auto& lc = mc.dec[l];
        const int base = ly.dec(l);

        // feed-forward sublayer
        Mat<S> d_ff_out = dy;
        dropout_backward(d_ff_out, lc.dp3);
        Mat<S> d_n3;
        ff_backward(tensors[base + 22].m, tensors[base + 24].m, lc.ff, d_ff_out, d_n3,
                    grads[base + 22], grads[base + 23], grads[base + 24], grads[base + 25]);
        layernorm_backward(d_n3, tensors[base + 20].m, lc.ln3, dy, grads[base + 20],
                           grads[base + 21]);

        // cross-attention sublayer
        Mat<S> d_ca = dy;
        dropout_backward(d_ca, lc.dp2);
        Mat<S> d_n2(B * T_len, c.d_model);
        auto cross_g = attn_grads<S>(grads, base + 12);
        attention_backward(attn_weights<S>(tensors, base + 12), lc.cross_attn, d_ca, B, T_len,
                           S_len, c.heads, false, d_n2, d_enc_out, cross_g);
        layernorm_backward(d_n2, tensors[base + 10].m, lc.ln2, dy, grads[base + 10],
                           grads[base + 11]);

        // self-attention sublayer
        Mat<S> d_sa = dy;
        dropout_backward(d_sa, lc.dp1);
        Mat<S> d_n1(B * T_len, c.d_model);
        auto self_g = attn_grads<S>(grads, base + 2);
        attention_backward(attn_weights<S>(tensors, base + 2), lc.self_attn, d_sa, B, T_len, T_len,
                           c.heads, true, d_n1, d_n1, self_g);
        layernorm_backward(d_n1, tensors[base].m, lc.ln1, dy, grads[base], grads[base + 1]);
    }

    // decoder embedding
    dropout_backward(dy, mc.dp_tgt);
    {
        const S scale = static_cast<S>(std::sqrt(static_cast<double>(c.d_model)));
        Mat<S>& de = grads[ly.tgt_embed()];
        for (int r = 0; r < B * T_len; ++r) {
            const S* g = dy.row(r);
            S* e = de.row(dec_in[r]);
            for (int j = 0; j < c.d_model; ++j) e[j] += g[j] * scale;
        }
    }

    // encoder stack
    Mat<S> dx(B * S_len, c.d_model);
    layernorm_backward(d_enc_out, tensors[ly.enc_ln()].m, mc.enc_ln, dx, grads[ly.enc_ln()],
                       grads[ly.enc_ln() + 1]);
    for (int l = c.enc_layers - 1; l >= 0; --l) {
        const auto& lc = mc.enc[l];
        const int base = ly.enc(l);

        Mat<S> d_ff_out = dx;
        dropout_backward(d_ff_out, lc.dp2);
        Mat<S> d_n2;
        ff_backward(tensors[base + 12].m, tensors[base + 14].m, lc.ff, d_ff_out, d_n2,
                    grads[base + 12], grads[base + 13], grads[base + 14], grads[base + 15]);
        layernorm_backward(d_n2, tensors[base + 10].m, lc.ln2, dx, grads[base + 10],
                           grads[base + 11]);

        Mat<S> d_attn = dx;
        dropout_backward(d_attn, lc.dp1);
        Mat<S> d_n1(B * S_len, c.d_model);
        auto g = attn_grads<S>(grads, base + 2);
        attention_backward(attn_weights<S>(tensors, base + 2), lc.attn, d_attn, B, S_len, S_len,
                           c.heads, false, d_n1, d_n1, g);
        layernorm_backward(d_n1, tensors[base].m, lc.ln1, dx, grads[base], grads[base + 1]);
    }

    // encoder embedding
    dropout_backward(dx, mc.dp_src);
    {
        const S scale = static_cast<S>(std::sqrt(static_cast<double>(c.d_model)));
        Mat<S>& de = grads[ly.src_embed()];
        for (int r = 0; r < B * S_len; ++r) {
            const S* g = dx.row(r);
            S* e = de.row(src[r]);
            for (int j = 0; j < c.d_model; ++j) e[j] += g[j] * scale;
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

void Batch::validate(const ModelConfig& config) const {
    if (size < 1) throw std::invalid_argument("batch: empty");
    if (src.size() != static_cast<std::size_t>(size) * src_len ||
        dec_in.size() != static_cast<std::size_t>(size) * tgt_len ||
        target.size() != static_cast<std::size_t>(size) * tgt_len)
        throw std::invalid_argument("batch: token array sizes inconsistent");
    if (src_len > config.max_src_len || tgt_len > config.max_tgt_len)
        throw std::invalid_argument("batch: sequence length exceeds model maximum");
}

template <typename S>
ForwardResult<S> forward(const Parameters<S>& params, const std::vector<int>& src_tokens,
                         const std::vector<int>& dec_in_tokens) {
    ModelCache<S> mc;
    model_forward(params, src_tokens, dec_in_tokens, 1, static_cast<int>(src_tokens.size()),
                  static_cast<int>(dec_in_tokens.size()), false, 0, mc);
    ForwardResult<S> out;
    out.logits = std::move(mc.logits);
    for (auto& lc : mc.enc)
        for (auto& p : lc.attn.probs) out.attention.enc_self.push_back(std::move(p));
    for (auto& lc : mc.dec) {
        for (auto& p : lc.self_attn.probs) out.attention.dec_self.push_back(std::move(p));
        for (auto& p : lc.cross_attn.probs) out.attention.cross.push_back(std::move(p));
    }
    return out;
}

template <typename S>
LossGrads<S> loss_and_grads(const Parameters<S>& params, const Batch& batch,
                            double label_smoothing, bool train_mode, std::uint64_t dropout_seed,
                            double loss_scale) {
    batch.validate(params.config);
    const int V = params.config.tgt_vocab;

    ModelCache<S> mc;
    model_forward(params, batch.src, batch.dec_in, batch.size, batch.src_len, batch.tgt_len,
                  train_mode, dropout_seed, mc);

    int n_valid = 0;
    for (int t : batch.target)
        if (t != TOK_PAD) ++n_valid;
    if (n_valid == 0) throw std::invalid_argument("loss: batch has no non-PAD targets");

    const int rows = batch.size * batch.tgt_len;
    Mat<S> dlogits(rows, V);
    double loss = 0.0;
    const double sm = label_smoothing;
    const double grad_unit = loss_scale / static_cast<double>(n_valid);
    for (int r = 0; r < rows; ++r) {
        const int label = batch.target[r];
        if (label == TOK_PAD) continue;
        const S* l = mc.logits.row(r);
        S best = l[0];
        for (int k = 1; k < V; ++k) best = std::max(best, l[k]);
        double denom = 0.0;
        for (int k = 0; k < V; ++k) denom += std::exp(static_cast<double>(l[k] - best));
        const double lse = std::log(denom) + static_cast<double>(best);
        // q = (1-sm)*onehot + sm/V
        double row_loss = lse;
        for (int k = 0; k < V; ++k) {
            const double q = (k == label ? 1.0 - sm : 0.0) + sm / V;
            row_loss -= q * static_cast<double>(l[k]);
            const double p = std::exp(static_cast<double>(l[k]) - lse);
            dlogits.at(r, k) = static_cast<S>((p - q) * grad_unit);
        }
        loss += row_loss;
    }
    loss = loss / static_cast<double>(n_valid) * loss_scale;

    LossGrads<S> out;
    out.loss = loss;
    out.grads = params.zero_grads();
    model_backward(params, mc, batch.src, batch.dec_in, dlogits, out.grads);
    return out;
}

template <typename S>
AdamState<S> AdamState<S>::zeros_like(const Parameters<S>& params) {
    AdamState<S> st;
    st.m = params.zero_grads();
    st.v = params.zero_grads();
    st.step = 0;
    return st;
}

template <typename S>
void adam_step(Parameters<S>& params, const std::vector<Mat<S>>& grads, AdamState<S>& state,
               const TrainConfig& config) {
    if (grads.size() != params.tensors.size())
        throw std::invalid_argument("adam: gradient vector misaligned with parameters");

    // Validate first so a thrown error leaves the parameters untouched.
    for (std::size_t ti = 0; ti < grads.size(); ++ti) {
        if (!params.tensors[ti].trainable) continue;
        for (S v : grads[ti].a)
            if (!std::isfinite(static_cast<double>(v)))
                throw std::runtime_error("adam: non-finite gradient in tensor " +
                                         params.tensors[ti].name);
    }

    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    double lr = config.lr;
    if (config.warmup_steps > 0 && state.step < config.warmup_steps)
        lr *= static_cast<double>(state.step) / static_cast<double>(config.warmup_steps);

    const S b1 = static_cast<S>(config.beta1), b2 = static_cast<S>(config.beta2);
    const S one_m_b1 = static_cast<S>(1.0 - config.beta1), one_m_b2 = static_cast<S>(1.0 - config.beta2);
    const S eps = static_cast<S>(config.eps);
    const S alpha = static_cast<S>(lr);
    const S inv_bc1 = static_cast<S>(1.0 / bc1), inv_bc2 = static_cast<S>(1.0 / bc2);

    for (std::size_t ti = 0; ti < grads.size(); ++ti) {
        if (!params.tensors[ti].trainable) continue;
        auto& p = params.tensors[ti].m.a;
        const auto& g = grads[ti].a;
        auto& m = state.m[ti].a;
        auto& v = state.v[ti].a;
#pragma omp parallel for schedule(static) if (p.size() >= 4096)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(p.size()); ++i) {
            m[i] = b1 * m[i] + one_m_b1 * g[i];
            v[i] = b2 * v[i] + one_m_b2 * g[i] * g[i];
            const S mhat = m[i] * inv_bc1;
            const S vhat = v[i] * inv_bc2;
            p[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

Batch assemble_batch(const std::vector<TrainExample>& examples, const std::vector<int>& idx) {
    Batch b;
    b.size = static_cast<int>(idx.size());
    b.src_len = static_cast<int>(examples[idx[0]].src.size());
    b.tgt_len = static_cast<int>(examples[idx[0]].dec_in.size());
    b.src.reserve(static_cast<std::size_t>(b.size) * b.src_len);
    b.dec_in.reserve(static_cast<std::size_t>(b.size) * b.tgt_len);
    b.target.reserve(static_cast<std::size_t>(b.size) * b.tgt_len);
    for (int i : idx) {
        const auto& ex = examples[i];
        if (static_cast<int>(ex.src.size()) != b.src_len ||
            static_cast<int>(ex.dec_in.size()) != b.tgt_len ||
            ex.target.size() != ex.dec_in.size())
            throw std::invalid_argument("train: examples must have uniform sequence lengths");
        b.src.insert(b.src.end(), ex.src.begin(), ex.src.end());
        b.dec_in.insert(b.dec_in.end(), ex.dec_in.begin(), ex.dec_in.end());
        b.target.insert(b.target.end(), ex.target.begin(), ex.target.end());
    }
    return b;
}

} // namespace

template <typename S>
double token_accuracy(const Parameters<S>& params, const std::vector<TrainExample>& examples) {
    std::int64_t correct = 0, total = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> local(examples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(examples.size()); ++i) {
        const auto& ex = examples[i];
        const auto res = forward(params, ex.src, ex.dec_in);
        std::int64_t c = 0, n = 0;
        for (std::size_t t = 0; t < ex.target.size(); ++t) {
            if (ex.target[t] == TOK_PAD) continue;
            const S* l = res.logits.row(static_cast<int>(t));
            int arg = 0;
            for (int k = 1; k < res.logits.cols; ++k)
                if (l[k] > l[arg]) arg = k;
            c += arg == ex.target[t];
            ++n;
        }
        local[i] = {c, n};
    }
    for (auto [c, n] : local) {
        correct += c;
        total += n;
    }
    return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

TrainOutput train(const ModelConfig& model, const TrainConfig& config,
                  const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& val_set) {
    model.validate();
    config.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");

    auto params = init_parameters<float>(model);
    auto adam = AdamState<float>::zeros_like(params);
    TrainReport report;

    const int n = static_cast<int>(train_set.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    int cursor = n; // forces a reshuffle at step 0
    std::uint64_t epoch = 0;

    for (int step = 0; step < config.steps; ++step) {
        std::vector<int> idx;
        idx.reserve(config.batch_size);
        while (static_cast<int>(idx.size()) < config.batch_size) {
            if (cursor >= n) {
                if (config.shuffle) {
                    SplitMix64 rng(derive_seed(config.data_seed, epoch));
                    for (int i = n - 1; i > 0; --i)
                        std::swap(order[i], order[rng.uniform_int(0, i)]);
                }
                cursor = 0;
                ++epoch;
            }
            idx.push_back(order[cursor++]);
        }

        const Batch batch = assemble_batch(train_set, idx);
        const std::uint64_t dropout_seed = derive_seed(config.data_seed ^ 0xD50Full, step);
        auto lg = loss_and_grads(params, batch, config.label_smoothing, true, dropout_seed);

        if (!std::isfinite(lg.loss)) {
            // Parameters still hold the last completed step.
            report.diverged = true;
            break;
        }
        adam_step(params, lg.grads, adam, config);
        report.loss_history.push_back(lg.loss);
        report.steps_completed = step + 1;

        if (!val_set.empty() && config.log_every > 0 &&
            ((step + 1) % config.log_every == 0 || step + 1 == config.steps)) {
            report.val_token_accuracy.emplace_back(step + 1, token_accuracy(params, val_set));
        }
    }
    report.final_train_token_accuracy = token_accuracy(params, train_set);
    return {std::move(params), std::move(adam), std::move(report)};
}

// ---------------------------------------------------------------------------
// Incremental greedy decode. Per-row recomputation matches the batched
// forward bit-for-bit: every op is row-local and the self-attention keys are
// reused, not recomputed.
// ---------------------------------------------------------------------------

namespace {

template <typename S>
void layernorm_row(const S* x, const Mat<S>& gain, const Mat<S>& bias, int D, S* out) {
    const S eps = static_cast<S>(1e-5);
    S mean = 0;
    for (int j = 0; j < D; ++j) mean += x[j];
    mean /= static_cast<S>(D);
    S var = 0;
    for (int j = 0; j < D; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= static_cast<S>(D);
    const S inv = S(1) / std::sqrt(var + eps);
    const S* g = gain.row(0);
    const S* b = bias.row(0);
    for (int j = 0; j < D; ++j) out[j] = g[j] * ((x[j] - mean) * inv) + b[j];
}

// out[1,cols(W)] = x[1,D] * W + b
template <typename S>
void project_row(const S* x, const Mat<S>& W, const Mat<S>& b, S* out) {
    for (int j = 0; j < W.cols; ++j) out[j] = b.at(0, j);
    for (int k = 0; k < W.rows; ++k) {
        const S xk = x[k];
        const S* w = W.row(k);
        for (int j = 0; j < W.cols; ++j) out[j] += xk * w[j];
    }
}

// Single-query attention over cached keys/values.
template <typename S>
void attend_row(const S* q_full, const Mat<S>& K, const Mat<S>& V, int n_keys, int heads,
                const Mat<S>& wo, const Mat<S>& bo, S* out, int D) {
    const int Dh = D / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(Dh)));
    std::vector<S> ctx(D, S(0));
    std::vector<S> pr(n_keys);
    for (int h = 0; h < heads; ++h) {
        const int off = h * Dh;
        const S* q = q_full + off;
        S best = std::numeric_limits<S>::lowest();
        for (int j = 0; j < n_keys; ++j) {
            const S* k = K.row(j) + off;
            S dot = 0;
            for (int d = 0; d < Dh; ++d) dot += q[d] * k[d];
            pr[j] = dot * scale;
            best = std::max(best, pr[j]);
        }
        S denom = 0;
        for (int j = 0; j < n_keys; ++j) {
            pr[j] = std::exp(pr[j] - best);
            denom += pr[j];
        }
        const S inv = S(1) / denom;
        for (int j = 0; j < n_keys; ++j) {
            const S pij = pr[j] * inv;
            const S* v = V.row(j) + off;
            for (int d = 0; d < Dh; ++d) ctx[off + d] += pij * v[d];
        }
    }
    project_row(ctx.data(), wo, bo, out);
}

} // namespace

template <typename S>
SetupPlan greedy_decode(const Parameters<S>& params, const std::vector<int>& src_tokens,
                        int plan_length) {
    const auto& c = params.config;
    const Layout ly(c);
    if (plan_length < 1) throw std::invalid_argument("greedy_decode: plan length must be positive");
    if (plan_length + 1 > c.max_tgt_len)
        throw std::invalid_argument("greedy_decode: plan length exceeds model maximum");

    // Encoder once.
    ModelCache<S> mc;
    model_forward(params, src_tokens, std::vector<int>{TOK_BOS}, 1,
                  static_cast<int>(src_tokens.size()), 1, false, 0, mc);
    const Mat<S>& enc_out = mc.enc_out;
    const int S_len = enc_out.rows;
    const int D = c.d_model;
    const auto& tensors = params.tensors;

    // Cross-attention K/V are fixed per layer.
    struct LayerState {
        Mat<S> cross_k, cross_v;
        Mat<S> self_k, self_v;
    };
    std::vector<LayerState> st(c.dec_layers);
    for (int l = 0; l < c.dec_layers; ++l) {
        const int base = ly.dec(l);
        const auto w = attn_weights<S>(tensors, base + 12);
        st[l].cross_k = Mat<S>(S_len, D);
        matmul_nn(enc_out, w.wk, st[l].cross_k);
        add_bias_rows(st[l].cross_k, w.bk);
        st[l].cross_v = Mat<S>(S_len, D);
        matmul_nn(enc_out, w.wv, st[l].cross_v);
        add_bias_rows(st[l].cross_v, w.bv);
        st[l].self_k = Mat<S>(plan_length + 1, D);
        st[l].self_v = Mat<S>(plan_length + 1, D);
    }

    SetupPlan plan;
    plan.y.reserve(plan_length);
    const S emb_scale = static_cast<S>(std::sqrt(static_cast<double>(D)));
    std::vector<S> y(D), n1(D), q(D), sub(D), tmp(D);
    int token = TOK_BOS;

    for (int pos = 0; pos < plan_length; ++pos) {
        const S* e = tensors[ly.tgt_embed()].m.row(token);
        const S* pe = tensors[ly.pos_tgt()].m.row(pos);
        for (int j = 0; j < D; ++j) y[j] = e[j] * emb_scale + pe[j];

        for (int l = 0; l < c.dec_layers; ++l) {
            const int base = ly.dec(l);
            auto& ls = st[l];
            // self-attention
            {
                const auto w = attn_weights<S>(tensors, base + 2);
                layernorm_row(y.data(), tensors[base].m, tensors[base + 1].m, D, n1.data());
                project_row(n1.data(), w.wq, w.bq, q.data());
                project_row(n1.data(), w.wk, w.bk, ls.self_k.row(pos));
                project_row(n1.data(), w.wv, w.bv, ls.self_v.row(pos));
                attend_row(q.data(), ls.self_k, ls.self_v, pos + 1, c.heads, w.wo, w.bo, sub.data(), D);
                for (int j = 0; j < D; ++j) y[j] += sub[j];
            }
            // cross-attention
            {
                const auto w = attn_weights<S>(tensors, base + 12);
                layernorm_row(y.data(), tensors[base + 10].m, tensors[base + 11].m, D, n1.data());
                project_row(n1.data(), w.wq, w.bq, q.data());
                attend_row(q.data(), ls.cross_k, ls.cross_v, S_len, c.heads, w.wo, w.bo, sub.data(), D);
                for (int j = 0; j < D; ++j) y[j] += sub[j];
            }
            // feed-forward
            {
                layernorm_row(y.data(), tensors[base + 20].m, tensors[base + 21].m, D, n1.data());
                std::vector<S> hidden(c.d_ff);
                project_row(n1.data(), tensors[base + 22].m, tensors[base + 23].m, hidden.data());
                for (auto& v : hidden) v = std::max(v, S(0));
                const Mat<S>& w2 = tensors[base + 24].m;
                const Mat<S>& b2 = tensors[base + 25].m;
                for (int j = 0; j < D; ++j) sub[j] = b2.at(0, j);
                for (int k = 0; k < c.d_ff; ++k) {
                    const S hk = hidden[k];
                    const S* w = w2.row(k);
                    for (int j = 0; j < D; ++j) sub[j] += hk * w[j];
                }
                for (int j = 0; j < D; ++j) y[j] += sub[j];
            }
        }

        layernorm_row(y.data(), tensors[ly.dec_ln()].m, tensors[ly.dec_ln() + 1].m, D, tmp.data());
        std::vector<S> logits(c.tgt_vocab);
        project_row(tmp.data(), tensors[ly.out_w()].m, tensors[ly.out_b()].m, logits.data());

        // argmax restricted to the label tokens; strict > keeps ties at ZERO
        token = logits[TOK_ONE] > logits[TOK_ZERO] ? TOK_ONE : TOK_ZERO;
        plan.y.push_back(token == TOK_ONE ? 1 : 0);
    }
    return plan;
}

double gradient_check(const ModelConfig& config, std::uint64_t seed, int samples, double fd_step) {
    ModelConfig cfg = config;
    cfg.dropout = 0.0; // finite differences need a deterministic loss surface
    cfg.validate();
    auto params = init_parameters<double>(cfg);

    // Small synthetic batch.
    SplitMix64 rng(seed);
    Batch batch;
    batch.size = 2;
    batch.src_len = std::min(10, cfg.max_src_len);
    batch.tgt_len = std::min(5, cfg.max_tgt_len);
    for (int i = 0; i < batch.size * batch.src_len; ++i)
        batch.src.push_back(static_cast<int>(rng.uniform_int(0, cfg.src_vocab - 1)));
    for (int b = 0; b < batch.size; ++b) {
        batch.dec_in.push_back(TOK_BOS);
        for (int t = 1; t < batch.tgt_len; ++t)
            batch.dec_in.push_back(rng.uniform_int(0, 1) ? TOK_ONE : TOK_ZERO);
        for (int t = 1; t < batch.tgt_len; ++t)
            batch.target.push_back(rng.uniform_int(0, 1) ? TOK_ONE : TOK_ZERO);
        batch.target.push_back(rng.uniform_int(0, 1) ? TOK_ONE : TOK_ZERO);
    }

    const auto analytic = loss_and_grads(params, batch);

    // Round-robin over trainable tensors so every kind is exercised.
    std::vector<int> trainables;
    for (std::size_t i = 0; i < params.tensors.size(); ++i)
        if (params.tensors[i].trainable) trainables.push_back(static_cast<int>(i));

    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const int ti = trainables[s % trainables.size()];
        auto& tensor = params.tensors[ti].m;
        const std::size_t ei = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(tensor.size()) - 1));

        const double orig = tensor.a[ei];
        tensor.a[ei] = orig + fd_step;
        const double lp = loss_and_grads(params, batch).loss;
        tensor.a[ei] = orig - fd_step;
        const double lm = loss_and_grads(params, batch).loss;
        tensor.a[ei] = orig;

        const double numeric = (lp - lm) / (2.0 * fd_step);
        const double a = analytic.grads[ti].a[ei];
        // The 1e-6 floor absorbs central-difference roundoff (~1e-11 at this
        // loss scale) on parameters whose true gradient is zero, e.g. the
        // attention key biases, which cancel inside the row softmax.
        const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
        worst = std::max(worst, rel);
    }
    return worst;
}

// Explicit instantiations: float for training/inference, double for the
// finite-difference verification path.
template struct Parameters<float>;
template struct Parameters<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template Parameters<float> init_parameters<float>(const ModelConfig&);
template Parameters<double> init_parameters<double>(const ModelConfig&);
template ForwardResult<float> forward<float>(const Parameters<float>&, const std::vector<int>&,
                                             const std::vector<int>&);
template ForwardResult<double> forward<double>(const Parameters<double>&, const std::vector<int>&,
                                               const std::vector<int>&);
template LossGrads<float> loss_and_grads<float>(const Parameters<float>&, const Batch&, double,
                                                bool, std::uint64_t, double);
template LossGrads<double> loss_and_grads<double>(const Parameters<double>&, const Batch&, double,
                                                  bool, std::uint64_t, double);
template void adam_step<float>(Parameters<float>&, const std::vector<Mat<float>>&,
                               AdamState<float>&, const TrainConfig&);
template void adam_step<double>(Parameters<double>&, const std::vector<Mat<double>>&,
                                AdamState<double>&, const TrainConfig&);
template double token_accuracy<float>(const Parameters<float>&, const std::vector<TrainExample>&);
template double token_accuracy<double>(const Parameters<double>&, const std::vector<TrainExample>&);
template SetupPlan greedy_decode<float>(const Parameters<float>&, const std::vector<int>&, int);
template SetupPlan greedy_decode<double>(const Parameters<double>&, const std::vector<int>&, int);

} // namespace clsp::nn
