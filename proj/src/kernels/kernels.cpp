#include "tstlab/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "tstlab/common.hpp"
#include "avx2_impl.hpp"
#include "scalar_impl.hpp"

namespace tstlab::kernels {

const char* isa_name(Isa isa) {
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Isa pick_initial() {
    if (const char* env = std::getenv("TSTLAB_ISA")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0) {
            if (!avx2_supported())
                throw ContractError("TSTLAB_ISA=avx2 but this CPU lacks AVX2+FMA");
            return Isa::avx2;
        }
        throw ContractError(std::string("unknown TSTLAB_ISA value: ") + env);
    }
    return avx2_supported() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& state() {
    static std::atomic<Isa> isa{pick_initial()};
    return isa;
}

}  // namespace

Isa active() {
    return state().load(std::memory_order_relaxed);
}

void force(Isa isa) {
    if (isa == Isa::avx2 && !avx2_supported())
        throw ContractError("cannot force avx2 kernels: unsupported CPU");
    state().store(isa, std::memory_order_relaxed);
}

template <class T>
T dot(const T* a, const T* b, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::dot(a, b, n);
    return scalar_impl::dot(a, b, n);
}

template <class T>
void axpy(T alpha, const T* x, T* y, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::axpy(alpha, x, y, n);
    return scalar_impl::axpy(alpha, x, y, n);
}

template <class T>
void add(const T* a, const T* b, T* out, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::add(a, b, out, n);
    return scalar_impl::add(a, b, out, n);
}

template <class T>
void mul(const T* a, const T* b, T* out, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::mul(a, b, out, n);
    return scalar_impl::mul(a, b, out, n);
}

template <class T>
void mul_acc(const T* a, const T* b, T* out, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::mul_acc(a, b, out, n);
    return scalar_impl::mul_acc(a, b, out, n);
}

template <class T>
void scale(const T* a, T alpha, T* out, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::scale(a, alpha, out, n);
    return scalar_impl::scale(a, alpha, out, n);
}

template <class T>
T sum(const T* a, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::sum(a, n);
    return scalar_impl::sum(a, n);
}

template <class T>
T max(const T* a, size_t n) {
    if (n == 0) throw ContractError("kernels::max on empty range");
    if (active() == Isa::avx2) return avx2_impl::max(a, n);
    return scalar_impl::max(a, n);
}

void accum_widen(const float* x, double* acc, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::accum_widen(x, acc, n);
    return scalar_impl::accum_widen(x, acc, n);
}

void accum_widen(const double* x, double* acc, size_t n) {
    if (active() == Isa::avx2) return avx2_impl::accum_widen(x, acc, n);
    return scalar_impl::accum_widen(x, acc, n);
}

template <class T>
void adamw_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T beta1, T beta2,
                  T eps, T weight_decay, T bias1, T bias2) {
    if (active() == Isa::avx2)
        return avx2_impl::adamw_update(p, g, m, v, n, lr, beta1, beta2, eps, weight_decay,
                                       bias1, bias2);
    return scalar_impl::adamw_update(p, g, m, v, n, lr, beta1, beta2, eps, weight_decay,
                                     bias1, bias2);
}

template float dot<float>(const float*, const float*, size_t);
template double dot<double>(const double*, const double*, size_t);
template void axpy<float>(float, const float*, float*, size_t);
template void axpy<double>(double, const double*, double*, size_t);
template void add<float>(const float*, const float*, float*, size_t);
template void add<double>(const double*, const double*, double*, size_t);
template void mul<float>(const float*, const float*, float*, size_t);
template void mul<double>(const double*, const double*, double*, size_t);
template void mul_acc<float>(const float*, const float*, float*, size_t);
template void mul_acc<double>(const double*, const double*, double*, size_t);
template void scale<float>(const float*, float, float*, size_t);
template void scale<double>(const double*, double, double*, size_t);
template float sum<float>(const float*, size_t);
template double sum<double>(const double*, size_t);
template float max<float>(const float*, size_t);
template double max<double>(const double*, size_t);
template void adamw_update<float>(float*, const float*, float*, float*, size_t, float,
                                  float, float, float, float, float, float);
template void adamw_update<double>(double*, const double*, double*, double*, size_t,
                                   double, double, double, double, double, double,
                                   double);

}  // namespace tstlab::kernels
