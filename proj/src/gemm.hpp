#pragma once

#include "rt/common.hpp"

// Small dense matmul kernels, row-major, written so gcc auto-vectorizes the
// inner loops. Sizes here are tiny (dims in the tens to low hundreds), so a
// blocked implementation buys nothing.

namespace rt::detail {

// C (+)= A(MxK) * B(KxN)
inline void gemm_nn(int M, int K, int N, const Scalar* A, const Scalar* B, Scalar* C,
                    bool accumulate) {
    for (int i = 0; i < M; ++i) {
        Scalar* c = C + static_cast<size_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c[j] = 0;
        const Scalar* a = A + static_cast<size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            Scalar av = a[k];
            const Scalar* b = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C (+)= A(MxK) * B(NxK)^T
inline void gemm_nt(int M, int K, int N, const Scalar* A, const Scalar* B, Scalar* C,
                    bool accumulate) {
    for (int i = 0; i < M; ++i) {
        const Scalar* a = A + static_cast<size_t>(i) * K;
        Scalar* c = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const Scalar* b = B + static_cast<size_t>(j) * K;
            Scalar s = 0;
            for (int k = 0; k < K; ++k) s += a[k] * b[k];
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

// C (+)= A(KxM)^T * B(KxN)
inline void gemm_tn(int M, int K, int N, const Scalar* A, const Scalar* B, Scalar* C,
                    bool accumulate) {
    if (!accumulate)
        for (size_t i = 0; i < static_cast<size_t>(M) * N; ++i) C[i] = 0;
    for (int k = 0; k < K; ++k) {
        const Scalar* a = A + static_cast<size_t>(k) * M;
        const Scalar* b = B + static_cast<size_t>(k) * N;
        for (int i = 0; i < M; ++i) {
            Scalar av = a[i];
            Scalar* c = C + static_cast<size_t>(i) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace rt::detail
