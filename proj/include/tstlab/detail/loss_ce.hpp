#pragma once

#include "tstlab/detail/rowmath.hpp"

// ce_loss definition. The arithmetic here is deliberately kept in the same
// form as the bag loss (coefficients of the shape g/(G*count), probabilities
// scattered then targets subtracted) so that a bag of size one agrees with
// this path bitwise.

namespace tstlab {

template <class T>
Tensor<T> ce_loss(Graph<T>& g, const Tensor<T>& logits, const IntTensor& labels,
                  LossReport* report) {
    if (logits.ndim() != 2) throw ShapeError("ce_loss: logits must be [N,V]");
    int64_t n = logits.dim(0), v = logits.dim(1);
    if (labels.size() != n)
        throw ShapeError("ce_loss: labels size " + std::to_string(labels.size()) +
                         " does not match logits rows " + std::to_string(n));

    const T* zs = logits.values().data();
    const int32_t* ys = labels.data.data();

    int64_t cnt = 0;
    double sum = 0.0;
    std::vector<double> lse((size_t)n, 0.0);
    bool part = logits.has_grad();
    std::vector<T> probs;
    if (part) probs.assign((size_t)(n * v), T(0));

    for (int64_t r = 0; r < n; ++r) {
        int32_t y = ys[r];
        if (y == kIgnoreIndex) continue;
        if (y < 0 || y >= v)
            throw ContractError("ce_loss: label " + std::to_string(y) +
                                " outside vocab " + std::to_string(v));
        const T* zr = zs + r * v;
        auto st = detail::row_expsum(zr, v);
        lse[(size_t)r] = detail::row_lse(st);
        sum += lse[(size_t)r] - (double)zr[y];
        ++cnt;
        if (part) {
            T* pr = probs.data() + r * v;
            for (int64_t j = 0; j < v; ++j)
                pr[j] = (T)(std::exp((double)(zr[j] - st.maxv)) / st.expsum);
        }
    }
    if (cnt == 0) throw ContractError("ce_loss: every label is ignored");

    double mean = sum / (double)cnt;
    Tensor<T> out = g.make_node({1}, part);
    out.values()[0] = (T)mean;
    check_finite<T>("ce_loss", out.values());

    if (report) {
        report->value = mean;
        report->per_slot = {mean};
        report->valid_per_slot = {cnt};
        report->positions = cnt;
        report->valid_total = cnt;
        report->correction = 0.0;
    }

    if (part) {
        Tensor<T> cl = logits;
        IntTensor yv = labels;
        // Same coefficient form as the bag loss with g = G = 1.
        double coef = 1.0 / (1.0 * (double)cnt);
        g.record([logits = cl, out, yv, probs = std::move(probs), coef, n, v]() mutable {
            double go = (double)out.grad()[0];
            T* gz = logits.grad().data();
            const int32_t* ys2 = yv.data.data();
            for (int64_t r = 0; r < n; ++r) {
                if (ys2[r] == kIgnoreIndex) continue;
                T gc = (T)(go * coef);
                kernels::axpy(gc, probs.data() + r * v, gz + r * v, (size_t)v);
                gz[r * v + ys2[r]] -= gc;
            }
        });
    }
    return out;
}

}  // namespace tstlab
