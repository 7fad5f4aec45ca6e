#pragma once

#include <cmath>
#include <cstddef>

// Reference implementations. These define the semantics every SIMD variant
// is tested against.

namespace tstlab::kernels::scalar_impl {

template <class T>
T dot(const T* a, const T* b, size_t n) {
    T acc = T(0);
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void add(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void mul(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void mul_acc(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

template <class T>
void scale(const T* a, T alpha, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = alpha * a[i];
}

template <class T>
T sum(const T* a, size_t n) {
    T acc = T(0);
    for (size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

template <class T>
T max(const T* a, size_t n) {
    T m = a[0];
    for (size_t i = 1; i < n; ++i) m = a[i] > m ? a[i] : m;
    return m;
}

template <class X>
void accum_widen(const X* x, double* acc, size_t n) {
    for (size_t i = 0; i < n; ++i) acc[i] += (double)x[i];
}

template <class T>
void adamw_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T beta1, T beta2,
                  T eps, T weight_decay, T bias1, T bias2) {
    const T one = T(1);
    for (size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (one - beta1) * g[i];
        v[i] = beta2 * v[i] + (one - beta2) * g[i] * g[i];
        T mhat = m[i] / bias1;
        T vhat = v[i] / bias2;
        p[i] = p[i] - lr * weight_decay * p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace tstlab::kernels::scalar_impl
