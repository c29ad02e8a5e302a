#pragma once

// Dense row-major tensor, rank 1..4, NHWC layout for rank-4. Float for
// training/inference; the same code instantiates with double for
// finite-difference gradient checks.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "diakrit/error.hpp"

namespace diakrit {

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        if (shape.empty() || shape.size() > 4)
            throw Error("tensor rank must be 1..4, got " + std::to_string(shape.size()));
        size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw Error("tensor dims must be positive: " + shape_str());
            n *= static_cast<size_t>(d);
        }
        v.assign(n, T(0));
    }

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    size_t numel() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    T& at(int n, int h, int w, int c) {
        return v[((static_cast<size_t>(n) * shape[1] + h) * shape[2] + w) * shape[3] + c];
    }
    T at(int n, int h, int w, int c) const {
        return v[((static_cast<size_t>(n) * shape[1] + h) * shape[2] + w) * shape[3] + c];
    }
    T& at(int n, int c) { return v[static_cast<size_t>(n) * shape[1] + c]; }
    T at(int n, int c) const { return v[static_cast<size_t>(n) * shape[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape[i]);
        return s + "]";
    }
};

template <typename T>
inline bool all_finite(const Tensor<T>& t) {
    for (T x : t.v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

template <typename T>
inline void assert_finite(const Tensor<T>& t, const std::string& what) {
    if (!all_finite(t)) throw Error("non-finite values in " + what);
}

// ---- deterministic GEMM kernels ----------------------------------------------
// Fixed accumulation order (outer i, middle k, inner j vectorizes) so repeated
// runs are bit-identical.

// C[M,N] = A[M,K] · B[K,N]
template <typename T>
inline void gemm_nn(const T* A, const T* B, T* C, int M, int K, int N) {
    std::fill(C, C + static_cast<size_t>(M) * N, T(0));
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<size_t>(i) * N;
        const T* a = A + static_cast<size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            T aik = a[k];
            if (aik == T(0)) continue;
            const T* b = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += aik * b[j];
        }
    }
}

// C[K,N] += A[M,K]ᵀ · B[M,N]; caller zeroes C when accumulation isn't wanted
template <typename T>
inline void gemm_tn_acc(const T* A, const T* B, T* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const T* a = A + static_cast<size_t>(m) * K;
        const T* b = B + static_cast<size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            T amk = a[k];
            if (amk == T(0)) continue;
            T* c = C + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += amk * b[j];
        }
    }
}

// C[M,K] = A[M,N] · B[K,N]ᵀ
template <typename T>
inline void gemm_nt(const T* A, const T* B, T* C, int M, int N, int K) {
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const T* b = B + static_cast<size_t>(k) * N;
            T s = 0;
            for (int j = 0; j < N; ++j) s += a[j] * b[j];
            C[static_cast<size_t>(i) * K + k] = s;
        }
    }
}

} // namespace diakrit
