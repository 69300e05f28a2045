#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "clsp/checkpoint.hpp"
#include "clsp/encoding.hpp"
#include "clsp/rng.hpp"
#include "clsp/transformer.hpp"

using namespace clsp;
using namespace clsp::nn;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.enc_layers = 1;
    c.dec_layers = 1;
    c.heads = 2;
    c.d_model = 16;
    c.d_ff = 32;
    c.src_vocab = 50;
    c.tgt_vocab = 4;
    c.max_src_len = 32;
    c.max_tgt_len = 16;
    c.dropout = 0.0;
    c.param_seed = 3;
    return c;
}

std::vector<int> random_tokens(SplitMix64& rng, int n, int vocab) {
    std::vector<int> out(n);
    for (auto& t : out) t = static_cast<int>(rng.uniform_int(0, vocab - 1));
    return out;
}

std::vector<int> random_labels(SplitMix64& rng, int n) {
    std::vector<int> out(n);
    for (auto& t : out) t = rng.uniform_int(0, 1) ? TOK_ONE : TOK_ZERO;
    return out;
}

Batch random_batch(SplitMix64& rng, const ModelConfig& c, int B, int S, int T) {
    Batch b;
    b.size = B;
    b.src_len = S;
    b.tgt_len = T;
    for (int i = 0; i < B; ++i) {
        const auto src = random_tokens(rng, S, c.src_vocab);
        b.src.insert(b.src.end(), src.begin(), src.end());
        const auto labels = random_labels(rng, T);
        b.dec_in.push_back(TOK_BOS);
        b.dec_in.insert(b.dec_in.end(), labels.begin(), labels.end() - 1);
        b.target.insert(b.target.end(), labels.begin(), labels.end());
    }
    return b;
}

template <typename S>
void zero_trainable(Parameters<S>& params) {
    for (auto& t : params.tensors)
        if (t.trainable) t.m.zero();
}

} // namespace

TEST_CASE("initialization is deterministic and validates the config") {
    const auto a = init_parameters<float>(tiny_config());
    const auto b = init_parameters<float>(tiny_config());
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        CHECK(a.tensors[i].name == b.tensors[i].name);
        CHECK(a.tensors[i].m == b.tensors[i].m);
    }
    auto c = tiny_config();
    c.param_seed = 4;
    const auto d = init_parameters<float>(c);
    CHECK(d.get("src_embed") != a.get("src_embed"));

    c = tiny_config();
    c.heads = 3;
    CHECK_THROWS_AS(init_parameters<float>(c), std::invalid_argument);
}

TEST_CASE("trainable parameter count matches the shape formula") {
    ModelConfig c;
    c.enc_layers = 2;
    c.dec_layers = 2;
    c.heads = 2;
    c.d_model = 64;
    c.d_ff = 256;
    c.src_vocab = 12000;
    c.tgt_vocab = 4;
    const auto params = init_parameters<float>(c);

    const std::size_t D = 64, F = 256;
    const std::size_t ln = 2 * D;
    const std::size_t attn = 4 * D * D + 4 * D;
    const std::size_t ff = D * F + F + F * D + D;
    const std::size_t enc_layer = ln + attn + ln + ff;
    const std::size_t dec_layer = ln + attn + ln + attn + ln + ff;
    const std::size_t expected = 12000 * D + 4 * D // embeddings
                                 + 2 * enc_layer + 2 * dec_layer
                                 + 2 * ln // final norms
                                 + D * 4 + 4; // output projection
    CHECK(params.trainable_scalars() == expected);
    CHECK(expected == 1002244);
}

TEST_CASE("zeroed output head gives uniform logits; zero params decode to all-zeros") {
    auto params = init_parameters<float>(tiny_config());
    zero_trainable(params);
    SplitMix64 rng(9);
    const auto src = random_tokens(rng, 10, params.config.src_vocab);
    const auto res = forward(params, src, {TOK_BOS, TOK_ONE, TOK_ZERO});
    for (int r = 0; r < res.logits.rows; ++r)
        for (int k = 1; k < res.logits.cols; ++k)
            CHECK(res.logits.at(r, k) == res.logits.at(r, 0));

    const SetupPlan plan = greedy_decode(params, src, 7);
    CHECK(plan.y == std::vector<int>(7, 0));
}

TEST_CASE("attention rows are stochastic and forward passes stay finite (fuzz)") {
    const auto params = init_parameters<float>(tiny_config());
    SplitMix64 rng(10);
    for (int trial = 0; trial < 1000; ++trial) {
        const int S = 1 + static_cast<int>(rng.uniform_int(0, 19));
        const int T = 1 + static_cast<int>(rng.uniform_int(0, 9));
        const auto src = random_tokens(rng, S, params.config.src_vocab);
        std::vector<int> dec_in = {TOK_BOS};
        const auto labels = random_labels(rng, T - 1);
        dec_in.insert(dec_in.end(), labels.begin(), labels.end());
        const auto res = forward(params, src, dec_in);
        for (const auto& v : res.logits.a) REQUIRE(std::isfinite(v));
        auto check_rows = [&](const std::vector<Mat<float>>& maps, bool causal) {
            for (const auto& m : maps) {
                for (int i = 0; i < m.rows; ++i) {
                    double sum = 0;
                    for (int j = 0; j < m.cols; ++j) {
                        REQUIRE(m.at(i, j) >= 0.0f);
                        sum += m.at(i, j);
                        if (causal && j > i) REQUIRE(m.at(i, j) == 0.0f);
                    }
                    REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
                }
            }
        };
        check_rows(res.attention.enc_self, false);
        check_rows(res.attention.dec_self, true);
        check_rows(res.attention.cross, false);
    }
}

TEST_CASE("decoder is causal: later inputs cannot affect earlier logits") {
    const auto params = init_parameters<float>(tiny_config());
    SplitMix64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto src = random_tokens(rng, 12, params.config.src_vocab);
        std::vector<int> dec_in = {TOK_BOS};
        auto labels = random_labels(rng, 7);
        dec_in.insert(dec_in.end(), labels.begin(), labels.end());
        const auto base = forward(params, src, dec_in);
        const int k = 1 + static_cast<int>(rng.uniform_int(0, 6));
        auto perturbed = dec_in;
        perturbed[k] = perturbed[k] == TOK_ONE ? TOK_ZERO : TOK_ONE;
        const auto alt = forward(params, src, perturbed);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < base.logits.cols; ++j)
                REQUIRE(base.logits.at(i, j) == alt.logits.at(i, j)); // bitwise
    }
}

TEST_CASE("without positional encodings the encoder is permutation-equivariant") {
    auto config = tiny_config();
    auto params = init_parameters<double>(config);
    params.get("pos_src").zero();
    SplitMix64 rng(13);
    const auto src = random_tokens(rng, 9, config.src_vocab);
    const std::vector<int> dec_in = {TOK_BOS, TOK_ONE};

    const auto base = forward(params, src, dec_in);
    auto swapped = src;
    std::swap(swapped[2], swapped[6]);
    const auto alt = forward(params, swapped, dec_in);
    for (std::size_t i = 0; i < base.logits.a.size(); ++i)
        CHECK(base.logits.a[i] == doctest::Approx(alt.logits.a[i]).epsilon(1e-9));

    // with positional encodings restored the permutation is visible
    const auto params_pos = init_parameters<double>(config);
    const auto b2 = forward(params_pos, src, dec_in);
    const auto a2 = forward(params_pos, swapped, dec_in);
    double diff = 0;
    for (std::size_t i = 0; i < b2.logits.a.size(); ++i)
        diff = std::max(diff, std::abs(b2.logits.a[i] - a2.logits.a[i]));
    CHECK(diff > 1e-8);
}

TEST_CASE("uniform logits give ln(4) loss and PAD positions are excluded") {
    auto params = init_parameters<float>(tiny_config());
    zero_trainable(params);
    SplitMix64 rng(14);
    auto batch = random_batch(rng, params.config, 3, 8, 5);
    const auto lg = loss_and_grads(params, batch);
    CHECK(lg.loss == doctest::Approx(std::log(4.0)).epsilon(1e-6));

    // PAD some targets: loss value is unchanged for uniform logits, and the
    // padded rows contribute no gradient
    auto padded = batch;
    padded.target[1] = TOK_PAD;
    padded.target[7] = TOK_PAD;
    const auto lg2 = loss_and_grads(params, padded);
    CHECK(lg2.loss == doctest::Approx(std::log(4.0)).epsilon(1e-6));

    Batch empty = batch;
    for (auto& t : empty.target) t = TOK_PAD;
    CHECK_THROWS_AS(loss_and_grads(params, empty), std::invalid_argument);
    Batch none = batch;
    none.size = 0;
    none.src.clear();
    none.dec_in.clear();
    none.target.clear();
    CHECK_THROWS_AS(loss_and_grads(params, none), std::invalid_argument);
}

TEST_CASE("duplicated batches give the same loss and gradients (mean reduction)") {
    const auto params = init_parameters<float>(tiny_config());
    SplitMix64 rng(15);
    const auto batch = random_batch(rng, params.config, 2, 6, 4);
    Batch doubled = batch;
    doubled.size = 4;
    doubled.src.insert(doubled.src.end(), batch.src.begin(), batch.src.end());
    doubled.dec_in.insert(doubled.dec_in.end(), batch.dec_in.begin(), batch.dec_in.end());
    doubled.target.insert(doubled.target.end(), batch.target.begin(), batch.target.end());

    const auto a = loss_and_grads(params, batch);
    const auto b = loss_and_grads(params, doubled);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-5));
    for (std::size_t ti = 0; ti < a.grads.size(); ++ti) {
        if (!params.tensors[ti].trainable) continue;
        for (std::size_t i = 0; i < a.grads[ti].a.size(); ++i)
            CHECK(a.grads[ti].a[i] == doctest::Approx(b.grads[ti].a[i]).epsilon(5e-4));
    }
}

TEST_CASE("doubling the loss scale doubles every gradient") {
    const auto params = init_parameters<double>(tiny_config());
    SplitMix64 rng(16);
    const auto batch = random_batch(rng, params.config, 2, 6, 4);
    const auto g1 = loss_and_grads(params, batch, 0.0, false, 0, 1.0);
    const auto g2 = loss_and_grads(params, batch, 0.0, false, 0, 2.0);
    CHECK(g2.loss == doctest::Approx(2.0 * g1.loss).epsilon(1e-12));
    for (std::size_t ti = 0; ti < g1.grads.size(); ++ti)
        for (std::size_t i = 0; i < g1.grads[ti].a.size(); ++i)
            CHECK(g2.grads[ti].a[i] == doctest::Approx(2.0 * g1.grads[ti].a[i]).epsilon(1e-9));
}

TEST_CASE("embedding rows untouched by the batch get exactly zero gradient") {
    const auto params = init_parameters<float>(tiny_config());
    Batch batch;
    batch.size = 1;
    batch.src_len = 3;
    batch.tgt_len = 2;
    batch.src = {5, 9, 5};
    batch.dec_in = {TOK_BOS, TOK_ONE};
    batch.target = {TOK_ONE, TOK_ZERO};
    const auto lg = loss_and_grads(params, batch);
    const auto& demb = lg.grads[0]; // src_embed
    for (int r = 0; r < demb.rows; ++r) {
        const bool touched = r == 5 || r == 9;
        float norm = 0;
        for (int j = 0; j < demb.cols; ++j) norm += std::abs(demb.at(r, j));
        if (touched)
            CHECK(norm > 0.0f);
        else
            CHECK(norm == 0.0f);
    }
}

TEST_CASE("adam first-step identity, zero-gradient fixpoint, determinism") {
    auto params = init_parameters<float>(tiny_config());
    auto state = AdamState<float>::zeros_like(params);
    TrainConfig tc;
    tc.lr = 1e-2;

    // constant gradient of +1 everywhere: delta == -lr/(1+eps)
    auto grads = params.zero_grads();
    for (std::size_t ti = 0; ti < grads.size(); ++ti)
        for (auto& v : grads[ti].a) v = 1.0f;
    auto before = params;
    adam_step(params, grads, state, tc);
    CHECK(state.step == 1);
    for (std::size_t ti = 0; ti < grads.size(); ++ti) {
        if (!params.tensors[ti].trainable) continue;
        for (std::size_t i = 0; i < grads[ti].a.size(); ++i) {
            const float delta = params.tensors[ti].m.a[i] - before.tensors[ti].m.a[i];
            CHECK(delta == doctest::Approx(-tc.lr).epsilon(1e-4));
        }
    }

    // zero gradient from a fresh state leaves parameters untouched
    auto fresh = init_parameters<float>(tiny_config());
    auto fresh_state = AdamState<float>::zeros_like(fresh);
    const auto frozen = fresh;
    adam_step(fresh, fresh.zero_grads(), fresh_state, tc);
    for (std::size_t ti = 0; ti < fresh.tensors.size(); ++ti)
        CHECK(fresh.tensors[ti].m == frozen.tensors[ti].m);

    // identical gradient sequences from identical states stay identical
    auto p1 = init_parameters<float>(tiny_config());
    auto p2 = init_parameters<float>(tiny_config());
    auto s1 = AdamState<float>::zeros_like(p1);
    auto s2 = AdamState<float>::zeros_like(p2);
    SplitMix64 rng(17);
    for (int step = 0; step < 3; ++step) {
        auto g = p1.zero_grads();
        for (auto& m : g)
            for (auto& v : m.a) v = static_cast<float>(rng.uniform_real(-1, 1));
        adam_step(p1, g, s1, tc);
        adam_step(p2, g, s2, tc);
    }
    for (std::size_t ti = 0; ti < p1.tensors.size(); ++ti)
        CHECK(p1.tensors[ti].m == p2.tensors[ti].m);

    // non-finite gradients are rejected with the tensor named
    auto bad = params.zero_grads();
    bad[0].a[3] = std::numeric_limits<float>::quiet_NaN();
    try {
        adam_step(params, bad, state, tc);
        FAIL("expected adam_step to throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("src_embed") != std::string::npos);
    }
}

TEST_CASE("analytic gradients match central differences at 64-bit precision") {
    ModelConfig c;
    c.enc_layers = 1;
    c.dec_layers = 1;
    c.heads = 2;
    c.d_model = 8;
    c.d_ff = 16;
    c.src_vocab = 30;
    c.tgt_vocab = 4;
    c.max_src_len = 16;
    c.max_tgt_len = 8;
    c.param_seed = 21;
    const double worst = gradient_check(c, 99, 200, 1e-5);
    CHECK(worst < 1e-4);
}

TEST_CASE("greedy decode emits exactly the requested length (fuzz)") {
    const auto params = init_parameters<float>(tiny_config());
    SplitMix64 rng(18);
    for (int trial = 0; trial < 50; ++trial) {
        const int T = 1 + static_cast<int>(rng.uniform_int(0, params.config.max_tgt_len - 2));
        const auto src = random_tokens(rng, 10, params.config.src_vocab);
        const auto plan = greedy_decode(params, src, T);
        REQUIRE(plan.size() == T);
        for (int v : plan.y) REQUIRE((v == 0 || v == 1));
    }
    CHECK_THROWS_AS(greedy_decode(params, random_tokens(rng, 4, 50), 0), std::invalid_argument);
    CHECK_THROWS_AS(greedy_decode(params, random_tokens(rng, 4, 50), 100), std::invalid_argument);
}

TEST_CASE("incremental decode agrees with the full forward pass") {
    const auto params = init_parameters<float>(tiny_config());
    SplitMix64 rng(19);
    for (int trial = 0; trial < 25; ++trial) {
        const auto src = random_tokens(rng, 15, params.config.src_vocab);
        const int T = 6;
        const auto plan = greedy_decode(params, src, T);

        // replay the same autoregressive decisions through the batched path
        std::vector<int> dec_in = {TOK_BOS};
        for (int t = 0; t < T; ++t) {
            const auto res = forward(params, src, dec_in);
            const int last = res.logits.rows - 1;
            const int tok =
                res.logits.at(last, TOK_ONE) > res.logits.at(last, TOK_ZERO) ? TOK_ONE : TOK_ZERO;
            CHECK(plan.y[t] == (tok == TOK_ONE ? 1 : 0));
            dec_in.push_back(tok);
        }
    }
}

TEST_CASE("checkpoint save/load round trip is bit-exact") {
    ModelCheckpoint ckpt;
    ckpt.model = tiny_config();
    ckpt.params = init_parameters<float>(ckpt.model);
    ckpt.adam = AdamState<float>::zeros_like(ckpt.params);
    ckpt.adam.step = 12;
    ckpt.train_step = 12;
    for (auto& m : ckpt.adam.m)
        for (auto& v : m.a) v = 0.25f;
    ckpt.tokenizer.fitted = true;
    ckpt.tokenizer.mean = {1, 2, 3, 4, 5};
    ckpt.tokenizer.stddev = {1, 1, 2, 2, 1e-6};

    const std::string path = "ckpt_roundtrip.bin";
    save_checkpoint(ckpt, path);
    const auto back = load_checkpoint(path);

    REQUIRE(back.params.tensors.size() == ckpt.params.tensors.size());
    for (std::size_t i = 0; i < back.params.tensors.size(); ++i)
        CHECK(back.params.tensors[i].m == ckpt.params.tensors[i].m);
    for (std::size_t i = 0; i < back.adam.m.size(); ++i) {
        CHECK(back.adam.m[i] == ckpt.adam.m[i]);
        CHECK(back.adam.v[i] == ckpt.adam.v[i]);
    }
    CHECK(back.adam.step == 12);
    CHECK(back.tokenizer.mean == ckpt.tokenizer.mean);

    // identical forward behaviour and identical bytes on re-save
    SplitMix64 rng(20);
    const auto src = random_tokens(rng, 8, ckpt.model.src_vocab);
    const auto a = forward(ckpt.params, src, {TOK_BOS, TOK_ONE});
    const auto b = forward(back.params, src, {TOK_BOS, TOK_ONE});
    CHECK(a.logits == b.logits);

    const std::string path2 = "ckpt_roundtrip2.bin";
    save_checkpoint(back, path2);
    auto slurp = [](const std::string& p) {
        std::FILE* f = std::fopen(p.c_str(), "rb");
        REQUIRE(f);
        std::string data;
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) data.append(buf, n);
        std::fclose(f);
        return data;
    };
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("tiny training run overfits and is reproducible") {
    ModelConfig mc = tiny_config();
    mc.dropout = 0.0;

    SplitMix64 rng(23);
    std::vector<TrainExample> examples;
    for (int i = 0; i < 16; ++i) {
        TrainExample ex;
        ex.src = random_tokens(rng, 10, mc.src_vocab);
        const auto labels = random_labels(rng, 5);
        ex.dec_in.push_back(TOK_BOS);
        ex.dec_in.insert(ex.dec_in.end(), labels.begin(), labels.end() - 1);
        ex.target = labels;
        examples.push_back(std::move(ex));
    }

    TrainConfig tc;
    tc.lr = 3e-3;
    tc.batch_size = 16;
    tc.steps = 150;
    tc.log_every = 0;
    tc.data_seed = 5;

    auto [params, adam, report] = train(mc, tc, examples);
    CHECK_FALSE(report.diverged);
    CHECK(report.steps_completed == 150);
    // full-batch training: the very first update must reduce the loss
    CHECK(report.loss_history[1] < report.loss_history[0]);
    CHECK(report.final_train_token_accuracy >= 0.99);

    auto [params2, adam2, report2] = train(mc, tc, examples);
    CHECK(report2.loss_history == report.loss_history);
    for (std::size_t i = 0; i < params.tensors.size(); ++i)
        CHECK(params.tensors[i].m == params2.tensors[i].m);
}
