// Benchmark comparing the serial reference kernels against the OpenMP
// versions, plus an end-to-end model forward/backward timing. The parallel
// kernels distribute whole output rows, so their results are checked
// bit-identical to the serial references while timing them.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "clsp/kernels.hpp"
#include "clsp/rng.hpp"
#include "clsp/transformer.hpp"

using namespace clsp;
using namespace clsp::nn;
using Clock = std::chrono::steady_clock;

namespace {

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

Mat<float> random_mat(int r, int c, SplitMix64& rng) {
    Mat<float> m(r, c);
    for (auto& v : m.a) v = static_cast<float>(rng.uniform_real(-1.0, 1.0));
    return m;
}

void bench_matmul(int m, int k, int n) {
    SplitMix64 rng(1);
    const auto A = random_mat(m, k, rng);
    const auto B = random_mat(k, n, rng);
    Mat<float> c_serial(m, n), c_parallel(m, n);

    const int reps = std::max(1, 50000000 / (m * k * n));
    const double t_serial = time_best_of(reps, [&] {
        c_serial.zero();
        matmul_nn_serial(A, B, c_serial);
    });
    const double t_parallel = time_best_of(reps, [&] {
        c_parallel.zero();
        matmul_nn(A, B, c_parallel);
    });
    const bool identical = c_serial == c_parallel;
    const double gflops = 2.0 * m * k * n / t_serial / 1e9;

    std::printf("matmul %4dx%-4dx%-4d  serial %9.3f ms (%5.2f GF/s)  omp %9.3f ms  speedup %5.2fx  %s\n",
                m, k, n, t_serial * 1e3, gflops, t_parallel * 1e3, t_serial / t_parallel,
                identical ? "bit-identical" : "MISMATCH");
}

void bench_model() {
    ModelConfig c;
    c.enc_layers = 2;
    c.dec_layers = 2;
    c.heads = 2;
    c.d_model = 64;
    c.d_ff = 256;
    c.max_src_len = 512;
    c.max_tgt_len = 128;
    c.dropout = 0.0;
    const auto params = init_parameters<float>(c);

    SplitMix64 rng(2);
    const int T = 90;
    Batch batch;
    batch.size = 8;
    batch.src_len = 5 * T;
    batch.tgt_len = T + 1;
    for (int i = 0; i < batch.size * batch.src_len; ++i)
        batch.src.push_back(static_cast<int>(rng.uniform_int(0, c.src_vocab - 1)));
    for (int b = 0; b < batch.size; ++b) {
        batch.dec_in.push_back(1);
        for (int t = 0; t < T; ++t) {
            const int tok = rng.uniform_int(0, 1) ? 3 : 2;
            if (t + 1 < batch.tgt_len) batch.dec_in.push_back(tok);
            batch.target.push_back(tok);
        }
        batch.target.push_back(rng.uniform_int(0, 1) ? 3 : 2);
    }

    const double t_step = time_best_of(3, [&] { (void)loss_and_grads(params, batch); });
    std::printf("model fwd+bwd     batch %d, T=%d: %8.1f ms\n", batch.size, T, t_step * 1e3);

    std::vector<int> src(batch.src.begin(), batch.src.begin() + batch.src_len);
    const double t_decode = time_best_of(3, [&] { (void)greedy_decode(params, src, T); });
    std::printf("greedy decode     T=%d: %8.3f ms\n", T, t_decode * 1e3);
}

} // namespace

int main(int argc, char** argv) {
    std::printf("threads: %d\n", thread_count());
    bench_matmul(64, 64, 64);
    bench_matmul(450, 64, 64);
    bench_matmul(450, 64, 256);
    bench_matmul(1024, 256, 64);
    if (argc > 1 && std::string(argv[1]) == "--quick") return 0;
    bench_model();
    return 0;
}
