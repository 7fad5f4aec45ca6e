#pragma once

#include <cstddef>

// AVX2 variants, defined in kernels_avx2.cpp (the only TU built with
// -mavx2 -mfma). Callers must check kernels::avx2_supported() first.

namespace tstlab::kernels::avx2_impl {

float dot(const float* a, const float* b, size_t n);
double dot(const double* a, const double* b, size_t n);

void axpy(float alpha, const float* x, float* y, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);

void add(const float* a, const float* b, float* out, size_t n);
void add(const double* a, const double* b, double* out, size_t n);

void mul(const float* a, const float* b, float* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);

void mul_acc(const float* a, const float* b, float* out, size_t n);
void mul_acc(const double* a, const double* b, double* out, size_t n);

void scale(const float* a, float alpha, float* out, size_t n);
void scale(const double* a, double alpha, double* out, size_t n);

float sum(const float* a, size_t n);
double sum(const double* a, size_t n);

float max(const float* a, size_t n);
double max(const double* a, size_t n);

void accum_widen(const float* x, double* acc, size_t n);
void accum_widen(const double* x, double* acc, size_t n);

void adamw_update(float* p, const float* g, float* m, float* v, size_t n, float lr,
                  float beta1, float beta2, float eps, float weight_decay, float bias1,
                  float bias2);
void adamw_update(double* p, const double* g, double* m, double* v, size_t n, double lr,
                  double beta1, double beta2, double eps, double weight_decay,
                  double bias1, double bias2);

}  // namespace tstlab::kernels::avx2_impl
