#pragma once

#include "tstlab/model.hpp"

// Bagged input path. Kept out of model.hpp so plain next-token binaries
// never see these templates; nothing here is instantiated unless called.

namespace tstlab {

// table [V,d], inputs [B,l,s] -> [B*l,d]: per latent position the mean of
// the bag's embedding rows, summed in double and cast back once. s=1
// delegates to the plain lookup and is bitwise identical to it.
template <class T>
Tensor<T> superpose_embed(Graph<T>& g, const Tensor<T>& table, const IntTensor& inputs) {
    if (inputs.ndim() != 3) throw ShapeError("superpose_embed: inputs must be [B,l,s]");
    int64_t s = inputs.dim(2);
    if (s == 1) return gather_rows(g, table, inputs);

    if (table.ndim() != 2) throw ShapeError("superpose_embed: table must be rank 2");
    int64_t v = table.dim(0), d = table.dim(1);
    int64_t n = inputs.dim(0) * inputs.dim(1);
    for (int64_t i = 0; i < n * s; ++i)
        if (inputs.data[(size_t)i] < 0 || inputs.data[(size_t)i] >= v)
            throw ContractError("superpose_embed: id " + std::to_string(inputs.data[(size_t)i]) +
                                " out of range [0," + std::to_string(v) + ")");

    bool part = table.has_grad();
    Tensor<T> out = g.make_node({n, d}, part);
    const T* src = table.values().data();
    T* dst = out.values().data();
    std::vector<double> acc((size_t)d);
    for (int64_t r = 0; r < n; ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int64_t i = 0; i < s; ++i)
            kernels::accum_widen(src + (int64_t)inputs.data[(size_t)(r * s + i)] * d,
                                 acc.data(), (size_t)d);
        for (int64_t c = 0; c < d; ++c) dst[r * d + c] = (T)(acc[(size_t)c] / (double)s);
    }
    check_finite<T>("superpose_embed", out.values());

    if (part) {
        Tensor<T> ct = table;
        IntTensor ids = inputs;
        g.record([table = ct, out, ids, n, s, d]() mutable {
            T coef = (T)(1.0 / (double)s);
            T* gt = table.grad().data();
            const T* go = out.grad().data();
            for (int64_t r = 0; r < n; ++r)
                for (int64_t i = 0; i < s; ++i)
                    kernels::axpy(coef, go + r * d,
                                  gt + (int64_t)ids.data[(size_t)(r * s + i)] * d, (size_t)d);
        });
    }
    return out;
}

// inputs [B,l,s] -> logits [B,l,V]. Rope sees latent indices 0..l-1, or the
// data offsets 0,s,2s,... under cfg.rope_raw_positions.
template <class T>
Tensor<T> model_forward_bagged(Graph<T>& g, const ModelState<T>& m, const IntTensor& inputs) {
    if (inputs.ndim() != 3) throw ShapeError("model_forward_bagged: inputs must be [B,l,s]");
    int64_t b = inputs.dim(0), l = inputs.dim(1), s = inputs.dim(2);
    Tensor<T> x = superpose_embed(g, m.embedding, inputs);
    std::vector<int32_t> pos = rope_positions(l, s, m.cfg.rope_raw_positions);
    Tensor<T> logits = forward_from_embeddings(g, m, x, b, l, pos);
    return logits.reshaped({b, l, m.cfg.vocab});
}

// Mode-checked entry: bagged 3-D inputs for full/input_only, flat 2-D for
// none/output_only.
template <class T>
Tensor<T> model_forward(Graph<T>& g, const ModelState<T>& m, const IntTensor& inputs,
                        Ablation mode) {
    bool bagged = mode == Ablation::full || mode == Ablation::input_only;
    if (bagged && inputs.ndim() != 3)
        throw ContractError(std::string("model_forward: ") + ablation_name(mode) +
                            " needs [B,l,s] inputs");
    if (!bagged && inputs.ndim() != 2)
        throw ContractError(std::string("model_forward: ") + ablation_name(mode) +
                            " needs [B,L] inputs");
    return bagged ? model_forward_bagged(g, m, inputs) : model_forward_flat(g, m, inputs);
}

}  // namespace tstlab
