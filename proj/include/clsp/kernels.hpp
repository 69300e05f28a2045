#ifndef CLSP_KERNELS_HPP
#define CLSP_KERNELS_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace clsp::nn {

// Dense row-major matrix.
template <typename S>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<S> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, S(0)) {}

    S* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const S* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }
    S& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    S at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
    std::size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), S(0)); }

    bool operator==(const Mat&) const = default;
};

// ---------------------------------------------------------------------------
// Matmul kernels.
//
// Each parallel kernel distributes whole output rows across threads; every
// output element is reduced in the same serial k-order as the reference
// kernel, so results are bit-identical to the serial versions for any thread
// count. The *_serial variants are kept as the reference implementations for
// the equivalence tests and the kernel benchmark.
// ---------------------------------------------------------------------------

namespace detail {
template <typename S>
inline void mm_nn_row(const Mat<S>& A, const Mat<S>& B, Mat<S>& C, int i) {
    S* c = C.row(i);
    const S* a = A.row(i);
    for (int k = 0; k < A.cols; ++k) {
        const S aik = a[k];
        const S* b = B.row(k);
        for (int j = 0; j < B.cols; ++j) c[j] += aik * b[j];
    }
}

template <typename S>
inline void mm_nt_row(const Mat<S>& A, const Mat<S>& B, Mat<S>& C, int i) {
    S* c = C.row(i);
    const S* a = A.row(i);
    for (int j = 0; j < B.rows; ++j) {
        const S* b = B.row(j);
        S acc = 0;
        for (int k = 0; k < A.cols; ++k) acc += a[k] * b[k];
        c[j] += acc;
    }
}

template <typename S>
inline void mm_tn_row(const Mat<S>& A, const Mat<S>& B, Mat<S>& C, int i) {
    S* c = C.row(i);
    for (int k = 0; k < A.rows; ++k) {
        const S aki = A.at(k, i);
        const S* b = B.row(k);
        for (int j = 0; j < B.cols; ++j) c[j] += aki * b[j];
    }
}
} // namespace detail

// C += A * B
template <typename S>
void matmul_nn_serial(const Mat<S>& A, const Mat<S>& B, Mat<S>& C) {
    if (A.cols != B.rows || C.rows != A.rows || C.cols != B.cols)
        throw std::invalid_argument("matmul_nn: shape mismatch");
    for (int i = 0; i < A.rows; ++i) detail::mm_nn_row(A, B, C, i);
}

template <typename S>
void matmul_nn(const Mat<S>& A, const Mat<S>& B, Mat<S>& C) {
    if (A.cols != B.rows || C.rows != A.rows || C.cols != B.cols)
        throw std::invalid_argument("matmul_nn: shape mismatch");
#pragma omp parallel for schedule(static) if (A.rows >= 32)
    for (int i = 0; i < A.rows; ++i) detail::mm_nn_row(A, B, C, i);
}

// C += A * B^T
template <typename S>
void matmul_nt_serial(const Mat<S>& A, const Mat<S>& B, Mat<S>& C) {
    if (A.cols != B.cols || C.rows != A.rows || C.cols != B.rows)
        throw std::invalid_argument("matmul_nt: shape mismatch");
    for (int i = 0; i < A.rows; ++i) detail::mm_nt_row(A, B, C, i);
}

template <typename S>
void matmul_nt(const Mat<S>& A, const Mat<S>& B, Mat<S>& C) {
    if (A.cols != B.cols || C.rows != A.rows || C.cols != B.rows)
        throw std::invalid_argument("matmul_nt: shape mismatch");
#pragma omp parallel for schedule(static) if (A.rows >= 32)
    for (int i = 0; i < A.rows; ++i) detail::mm_nt_row(A, B, C, i);
}

// C += A^T * B
template <typename S>
void matmul_tn_serial(const Mat<S>& A, const Mat<S>& B, Mat<S>& C) {
    if (A.rows != B.rows || C.rows != A.cols || C.cols != B.cols)
        throw std::invalid_argument("matmul_tn: shape mismatch");
    for (int i = 0; i < A.cols; ++i) detail::mm_tn_row(A, B, C, i);
}

template <typename S>
void matmul_tn(const Mat<S>& A, const Mat<S>& B, Mat<S>& C) {
    if (A.rows != B.rows || C.rows != A.cols || C.cols != B.cols)
        throw std::invalid_argument("matmul_tn: shape mismatch");
#pragma omp parallel for schedule(static) if (A.cols >= 32)
    for (int i = 0; i < A.cols; ++i) detail::mm_tn_row(A, B, C, i);
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace clsp::nn

#endif
