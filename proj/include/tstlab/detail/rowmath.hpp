#pragma once

#include <cmath>
#include <cstdint>

#include "tstlab/kernels.hpp"

// Shared per-row logit math. Both cross-entropy variants and the softmax op
// go through these, so a bag of size 1 reduces to the plain path bit for bit.

namespace tstlab::detail {

// exp-sum of z - max(z), accumulated in double.
template <class T>
struct RowStat {
    T maxv;
    double expsum;
};

template <class T>
RowStat<T> row_expsum(const T* z, int64_t n) {
    RowStat<T> r;
    r.maxv = kernels::max(z, (size_t)n);
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += std::exp((double)(z[i] - r.maxv));
    r.expsum = s;
    return r;
}

template <class T>
double row_lse(const RowStat<T>& r) {
    return (double)r.maxv + std::log(r.expsum);
}

}  // namespace tstlab::detail
