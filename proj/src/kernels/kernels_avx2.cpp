// AVX2 kernel variants. This TU is compiled with -mavx2 -mfma; nothing here
// runs unless the dispatcher confirmed CPU support.

#include <immintrin.h>

#include <cmath>

#include "avx2_impl.hpp"

namespace tstlab::kernels::avx2_impl {

namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

inline float hmax(__m256 v) {
    __m128 lo = _mm_max_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
    lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_max_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

inline double hmax(__m256d v) {
    __m128d lo = _mm_max_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    return _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

float dot(const float* a, const float* b, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(float alpha, const float* x, float* y, size_t n) {
    __m256 va = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const double* x, double* y, size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void add(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(const float* a, const float* b, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vo = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i),
                                    _mm256_loadu_ps(out + i));
        _mm256_storeu_ps(out + i, vo);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vo = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                     _mm256_loadu_pd(out + i));
        _mm256_storeu_pd(out + i, vo);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

void scale(const float* a, float alpha, float* out, size_t n) {
    __m256 va = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(a + i)));
    for (; i < n; ++i) out[i] = alpha * a[i];
}

void scale(const double* a, double alpha, double* out, size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(a + i)));
    for (; i < n; ++i) out[i] = alpha * a[i];
}

float sum(const float* a, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(a + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

double sum(const double* a, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

float max(const float* a, size_t n) {
    size_t i = 0;
    float m = a[0];
    if (n >= 8) {
        __m256 vm = _mm256_loadu_ps(a);
        for (i = 8; i + 8 <= n; i += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(a + i));
        m = hmax(vm);
    }
    for (; i < n; ++i) m = a[i] > m ? a[i] : m;
    return m;
}

double max(const double* a, size_t n) {
    size_t i = 0;
    double m = a[0];
    if (n >= 4) {
        __m256d vm = _mm256_loadu_pd(a);
        for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(a + i));
        m = hmax(vm);
    }
    for (; i < n; ++i) m = a[i] > m ? a[i] : m;
    return m;
}

void accum_widen(const float* x, double* acc, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xd = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), xd));
    }
    for (; i < n; ++i) acc[i] += (double)x[i];
}

void accum_widen(const double* x, double* acc, size_t n) {
    add(acc, x, acc, n);
}

void adamw_update(float* p, const float* g, float* m, float* v, size_t n, float lr,
                  float beta1, float beta2, float eps, float weight_decay, float bias1,
                  float bias2) {
    __m256 vb1 = _mm256_set1_ps(beta1);
    __m256 vb2 = _mm256_set1_ps(beta2);
    __m256 vc1 = _mm256_set1_ps(1.0f - beta1);
    __m256 vc2 = _mm256_set1_ps(1.0f - beta2);
    __m256 vlr = _mm256_set1_ps(lr);
    __m256 veps = _mm256_set1_ps(eps);
    __m256 vlrwd = _mm256_set1_ps(lr * weight_decay);
    __m256 vib1 = _mm256_set1_ps(bias1);
    __m256 vib2 = _mm256_set1_ps(bias2);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vg = _mm256_loadu_ps(g + i);
        __m256 vm = _mm256_fmadd_ps(vb1, _mm256_loadu_ps(m + i), _mm256_mul_ps(vc1, vg));
        __m256 vv = _mm256_fmadd_ps(vb2, _mm256_loadu_ps(v + i),
                                    _mm256_mul_ps(vc2, _mm256_mul_ps(vg, vg)));
        _mm256_storeu_ps(m + i, vm);
        _mm256_storeu_ps(v + i, vv);
        __m256 mhat = _mm256_div_ps(vm, vib1);
        __m256 vhat = _mm256_div_ps(vv, vib2);
        __m256 upd = _mm256_div_ps(mhat, _mm256_add_ps(_mm256_sqrt_ps(vhat), veps));
        __m256 vp = _mm256_loadu_ps(p + i);
        vp = _mm256_fnmadd_ps(vlrwd, vp, vp);
        vp = _mm256_fnmadd_ps(vlr, upd, vp);
        _mm256_storeu_ps(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
        float mhat = m[i] / bias1;
        float vhat = v[i] / bias2;
        p[i] = p[i] - lr * weight_decay * p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

void adamw_update(double* p, const double* g, double* m, double* v, size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay,
                  double bias1, double bias2) {
    __m256d vb1 = _mm256_set1_pd(beta1);
    __m256d vb2 = _mm256_set1_pd(beta2);
    __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
    __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
    __m256d vlr = _mm256_set1_pd(lr);
    __m256d veps = _mm256_set1_pd(eps);
    __m256d vlrwd = _mm256_set1_pd(lr * weight_decay);
    __m256d vib1 = _mm256_set1_pd(bias1);
    __m256d vib2 = _mm256_set1_pd(bias2);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_fmadd_pd(vb1, _mm256_loadu_pd(m + i), _mm256_mul_pd(vc1, vg));
        __m256d vv = _mm256_fmadd_pd(vb2, _mm256_loadu_pd(v + i),
                                     _mm256_mul_pd(vc2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        __m256d mhat = _mm256_div_pd(vm, vib1);
        __m256d vhat = _mm256_div_pd(vv, vib2);
        __m256d upd = _mm256_div_pd(mhat, _mm256_add_pd(_mm256_sqrt_pd(vhat), veps));
        __m256d vp = _mm256_loadu_pd(p + i);
        vp = _mm256_fnmadd_pd(vlrwd, vp, vp);
        vp = _mm256_fnmadd_pd(vlr, upd, vp);
        _mm256_storeu_pd(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = m[i] / bias1;
        double vhat = v[i] / bias2;
        p[i] = p[i] - lr * weight_decay * p[i] - lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace tstlab::kernels::avx2_impl
