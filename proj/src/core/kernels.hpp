#pragma once

#include <cmath>
#include <cstddef>

// Shared dense kernels. The tape ops and the no-tape evaluation paths both
// call these, which keeps their arithmetic order (and hence results)
// bitwise identical.
namespace pdedpc::kernels {

// C[m,n] += A[m,k] * B[k,n]
inline void gemm_acc_nn(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * n;
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
inline void gemm_acc_nt(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] += acc;
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
inline void gemm_acc_tn(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int r = 0; r < m; ++r) {
        const double* arow = a + static_cast<std::size_t>(r) * k;
        const double* brow = b + static_cast<std::size_t>(r) * n;
        for (int i = 0; i < k; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }

}  // namespace pdedpc::kernels
