#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops used by the tensor engine and the optimizer.
// Every kernel has a scalar reference implementation and may have SIMD
// variants; which one runs is decided once at startup (or forced via
// kernels::force / the TSTLAB_ISA environment variable). All variants of a
// kernel compute the same mathematical sum but may associate differently, so
// cross-variant agreement is approximate, not bitwise. Within one variant
// results are bit-reproducible run to run.

namespace tstlab::kernels {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
bool avx2_supported();

// Currently active variant. Initialized on first use: AVX2 when the CPU has
// it, unless TSTLAB_ISA=scalar|avx2 overrides.
Isa active();
void force(Isa isa);  // throws ContractError if unsupported on this machine

template <class T>
T dot(const T* a, const T* b, size_t n);

// y += alpha * x
template <class T>
void axpy(T alpha, const T* x, T* y, size_t n);

template <class T>
void add(const T* a, const T* b, T* out, size_t n);

template <class T>
void mul(const T* a, const T* b, T* out, size_t n);

// out += a * b elementwise
template <class T>
void mul_acc(const T* a, const T* b, T* out, size_t n);

// out = alpha * a
template <class T>
void scale(const T* a, T alpha, T* out, size_t n);

template <class T>
T sum(const T* a, size_t n);

// Maximum value; n must be >= 1.
template <class T>
T max(const T* a, size_t n);

// acc[i] += x[i], accumulating in double regardless of input width.
void accum_widen(const float* x, double* acc, size_t n);
void accum_widen(const double* x, double* acc, size_t n);

// Decoupled weight decay step. bias1/bias2 are 1-beta^t corrections.
//   m = beta1*m + (1-beta1)*g
//   v = beta2*v + (1-beta2)*g^2
//   p -= lr*wd*p + lr*(m/bias1) / (sqrt(v/bias2) + eps)
template <class T>
void adamw_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T beta1, T beta2,
                  T eps, T weight_decay, T bias1, T bias2);

}  // namespace tstlab::kernels
