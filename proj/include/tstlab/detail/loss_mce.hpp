#pragma once

#include <algorithm>

#include "tstlab/detail/rowmath.hpp"

// Bag loss definitions. Slot-major aggregation: each slot i gets the masked
// mean CE over positions where it is valid, and the value is the
// weight-normalized combination of those slot means. Keep the coefficient
// and update forms in sync with loss_ce.hpp; the s=1 bitwise reduction
// depends on it.

namespace tstlab {

template <class T>
Tensor<T> mce_loss(Graph<T>& g, const Tensor<T>& logits, const IntTensor& bags,
                   MceVariant variant, const BagWeighting& weighting,
                   LossReport* report) {
    if (logits.ndim() != 2) throw ShapeError("mce_loss: logits must be [N,V]");
    if (bags.ndim() != 2) throw ShapeError("mce_loss: bags must be [N,s]");
    int64_t n = logits.dim(0), v = logits.dim(1), s = bags.dim(1);
    if (bags.dim(0) != n)
        throw ShapeError("mce_loss: bag rows " + std::to_string(bags.dim(0)) +
                         " do not match logits rows " + std::to_string(n));
    if (variant == MceVariant::corrected && weighting.kind != WeightKind::uniform)
        throw ContractError("mce_loss: the corrected variant is defined for uniform weighting");

    const T* zs = logits.values().data();
    const int32_t* ys = bags.data.data();

    for (int64_t i = 0; i < n * s; ++i)
        if (ys[i] != kIgnoreIndex && (ys[i] < 0 || ys[i] >= v))
            throw ContractError("mce_loss: label " + std::to_string(ys[i]) +
                                " outside vocab " + std::to_string(v));

    bool part = logits.has_grad();
    std::vector<T> probs;
    if (part) probs.assign((size_t)(n * v), T(0));

    std::vector<double> lse((size_t)n, 0.0);
    std::vector<double> bag_lse((size_t)n, 0.0);
    std::vector<int32_t> row_valid((size_t)n, 0);
    std::vector<double> slot_sum((size_t)s, 0.0);
    std::vector<int64_t> slot_cnt((size_t)s, 0);
    int64_t positions = 0, valid_total = 0;
    double alt_sum = 0.0, corr_sum = 0.0;

    for (int64_t r = 0; r < n; ++r) {
        const int32_t* br = ys + r * s;
        int32_t nv = 0;
        for (int64_t i = 0; i < s; ++i)
            if (br[i] != kIgnoreIndex) ++nv;
        row_valid[(size_t)r] = nv;
        if (nv == 0) continue;
        ++positions;
        valid_total += nv;

        const T* zr = zs + r * v;
        auto st = detail::row_expsum(zr, v);
        lse[(size_t)r] = detail::row_lse(st);
        for (int64_t i = 0; i < s; ++i) {
            if (br[i] == kIgnoreIndex) continue;
            slot_sum[(size_t)i] += lse[(size_t)r] - (double)zr[br[i]];
            slot_cnt[(size_t)i] += 1;
        }
        corr_sum += std::log((double)nv);

        if (variant == MceVariant::alternative) {
            // Duplicates inside a bag count once here.
            T bmax = T(0);
            bool first = true;
            for (int64_t i = 0; i < s; ++i) {
                if (br[i] == kIgnoreIndex) continue;
                bool dup = false;
                for (int64_t j = 0; j < i; ++j)
                    if (br[j] == br[i]) { dup = true; break; }
                if (dup) continue;
                T zy = zr[br[i]];
                if (first || zy > bmax) bmax = zy;
                first = false;
            }
            double bsum = 0.0;
            for (int64_t i = 0; i < s; ++i) {
                if (br[i] == kIgnoreIndex) continue;
                bool dup = false;
                for (int64_t j = 0; j < i; ++j)
                    if (br[j] == br[i]) { dup = true; break; }
                if (dup) continue;
                bsum += std::exp((double)(zr[br[i]] - bmax));
            }
            bag_lse[(size_t)r] = (double)bmax + std::log(bsum);
            alt_sum += lse[(size_t)r] - bag_lse[(size_t)r];
        }

        if (part) {
            T* pr = probs.data() + r * v;
            for (int64_t j = 0; j < v; ++j)
                pr[j] = (T)(std::exp((double)(zr[j] - st.maxv)) / st.expsum);
        }
    }
    if (positions == 0) throw ContractError("mce_loss: every bag slot is ignored");

    std::vector<double> gw((size_t)s, 0.0);
    double gtotal = 0.0;
    for (int64_t i = 0; i < s; ++i) {
        if (slot_cnt[(size_t)i] == 0) continue;
        gw[(size_t)i] = weighting.weight((int)i + 1);
        gtotal += gw[(size_t)i];
    }
    if (variant != MceVariant::alternative && gtotal <= 0.0)
        throw ContractError("mce_loss: slot weights sum to zero");

    std::vector<double> slot_mean((size_t)s, 0.0);
    for (int64_t i = 0; i < s; ++i)
        if (slot_cnt[(size_t)i] > 0)
            slot_mean[(size_t)i] = slot_sum[(size_t)i] / (double)slot_cnt[(size_t)i];

    double correction =
        variant == MceVariant::corrected ? corr_sum / (double)positions : 0.0;

    double value;
    if (variant == MceVariant::alternative) {
        value = alt_sum / (double)positions;
    } else {
        double acc = 0.0;
        for (int64_t i = 0; i < s; ++i)
            if (slot_cnt[(size_t)i] > 0) acc += gw[(size_t)i] * slot_mean[(size_t)i];
        value = acc / gtotal - correction;
    }

    Tensor<T> out = g.make_node({1}, part);
    out.values()[0] = (T)value;
    check_finite<T>("mce_loss", out.values());

    if (report) {
        report->value = value;
        report->per_slot = slot_mean;
        report->valid_per_slot = slot_cnt;
        report->positions = positions;
        report->valid_total = valid_total;
        report->correction = correction;
    }

    if (part) {
        Tensor<T> cl = logits;
        IntTensor bv = bags;
        if (variant == MceVariant::alternative) {
            std::vector<double> bl = bag_lse;
            g.record([logits = cl, out, bv, probs = std::move(probs), bl, positions, n, v,
                      s]() mutable {
                double go = (double)out.grad()[0];
                double coef = 1.0 / (double)positions;
                T* gz = logits.grad().data();
                const T* zs2 = logits.values().data();
                const int32_t* ys2 = bv.data.data();
                for (int64_t r = 0; r < n; ++r) {
                    const int32_t* br = ys2 + r * s;
                    bool any = false;
                    for (int64_t i = 0; i < s; ++i)
                        if (br[i] != kIgnoreIndex) { any = true; break; }
                    if (!any) continue;
                    T gc = (T)(go * coef);
                    kernels::axpy(gc, probs.data() + r * v, gz + r * v, (size_t)v);
                    for (int64_t i = 0; i < s; ++i) {
                        if (br[i] == kIgnoreIndex) continue;
                        bool dup = false;
                        for (int64_t j = 0; j < i; ++j)
                            if (br[j] == br[i]) { dup = true; break; }
                        if (dup) continue;
                        double q = std::exp((double)zs2[r * v + br[i]] - bl[(size_t)r]);
                        gz[r * v + br[i]] -= gc * (T)q;
                    }
                }
            });
        } else {
            // Per-slot coefficient g_i / (G * count_i); a position's softmax
            // term uses the sum of its valid slots' coefficients.
            std::vector<double> coef((size_t)s, 0.0);
            for (int64_t i = 0; i < s; ++i)
                if (slot_cnt[(size_t)i] > 0)
                    coef[(size_t)i] = gw[(size_t)i] / (gtotal * (double)slot_cnt[(size_t)i]);
            g.record([logits = cl, out, bv, probs = std::move(probs), coef, n, v,
                      s]() mutable {
                double go = (double)out.grad()[0];
                T* gz = logits.grad().data();
                const int32_t* ys2 = bv.data.data();
                for (int64_t r = 0; r < n; ++r) {
                    const int32_t* br = ys2 + r * s;
                    double cn = 0.0;
                    for (int64_t i = 0; i < s; ++i)
                        if (br[i] != kIgnoreIndex) cn += coef[(size_t)i];
                    if (cn == 0.0) {
                        bool any = false;
                        for (int64_t i = 0; i < s; ++i)
                            if (br[i] != kIgnoreIndex) { any = true; break; }
                        if (!any) continue;
                    }
                    T gc = (T)(go * cn);
                    kernels::axpy(gc, probs.data() + r * v, gz + r * v, (size_t)v);
                    for (int64_t i = 0; i < s; ++i) {
                        if (br[i] == kIgnoreIndex) continue;
                        gz[r * v + br[i]] -= (T)(go * coef[(size_t)i]);
                    }
                }
            });
        }
    }
    return out;
}

template <class T>
Tensor<T> loss_for_phase(Graph<T>& g, Phase phase, const Tensor<T>& logits,
                         const IntTensor& labels, MceVariant variant,
                         const BagWeighting& weighting, LossReport* report) {
    Tensor<T> z = logits.ndim() == 3
                      ? logits.reshaped({logits.dim(0) * logits.dim(1), logits.dim(2)})
                      : logits;
    if (phase == Phase::superposition) {
        if (labels.ndim() != 3)
            throw ShapeError("loss_for_phase: superposition labels must be [B,l,s]");
        IntTensor flat = labels.reshaped({labels.dim(0) * labels.dim(1), labels.dim(2)});
        return mce_loss(g, z, flat, variant, weighting, report);
    }
    if (labels.ndim() != 2)
        throw ShapeError("loss_for_phase: recovery labels must be [B,L]");
    IntTensor flat = labels.reshaped({labels.size()});
    return ce_loss(g, z, flat, report);
}

}  // namespace tstlab
