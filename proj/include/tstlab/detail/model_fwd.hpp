#pragma once

#include <cmath>
#include <numeric>

// Transformer stack definitions. Header-only for the same reason as the ops:
// bodies must be visible wherever a precision is instantiated.

namespace tstlab {

namespace detail_model {
inline constexpr double kNormEps = 1e-6;

inline IntTensor causal_mask(int64_t len) {
    IntTensor m({len, len});
    for (int64_t i = 0; i < len; ++i)
        for (int64_t j = 0; j < len; ++j)
            m.data[(size_t)(i * len + j)] = j > i ? 1 : 0;
    return m;
}
}  // namespace detail_model

template <class T>
ModelState<T> init_model(const ModelConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.init_seed);
    T std = (T)(cfg.init_scale / std::sqrt((double)cfg.d_model));
    int64_t d = cfg.d_model, ff = cfg.d_ff, v = cfg.vocab;

    ModelState<T> m;
    m.cfg = cfg;
    m.embedding = Tensor<T>::randn({v, d}, rng, std, true);
    m.layers.resize((size_t)cfg.n_layers);
    for (auto& ly : m.layers) {
        ly.attn_norm = Tensor<T>::full({d}, T(1), true);
        ly.wq = Tensor<T>::randn({d, d}, rng, std, true);
        ly.wk = Tensor<T>::randn({d, d}, rng, std, true);
        ly.wv = Tensor<T>::randn({d, d}, rng, std, true);
        ly.wo = Tensor<T>::randn({d, d}, rng, std, true);
        ly.mlp_norm = Tensor<T>::full({d}, T(1), true);
        ly.w_gate = Tensor<T>::randn({d, ff}, rng, std, true);
        ly.w_up = Tensor<T>::randn({d, ff}, rng, std, true);
        ly.w_down = Tensor<T>::randn({ff, d}, rng, std, true);
    }
    m.final_norm = Tensor<T>::full({d}, T(1), true);
    m.head = Tensor<T>::randn({d, v}, rng, std, true);
    return m;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(ModelState<T>& m) {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.emplace_back("embedding", m.embedding);
    for (size_t i = 0; i < m.layers.size(); ++i) {
        std::string p = "layers." + std::to_string(i) + ".";
        auto& ly = m.layers[i];
        out.emplace_back(p + "attn_norm", ly.attn_norm);
        out.emplace_back(p + "wq", ly.wq);
        out.emplace_back(p + "wk", ly.wk);
        out.emplace_back(p + "wv", ly.wv);
        out.emplace_back(p + "wo", ly.wo);
        out.emplace_back(p + "mlp_norm", ly.mlp_norm);
        out.emplace_back(p + "w_gate", ly.w_gate);
        out.emplace_back(p + "w_up", ly.w_up);
        out.emplace_back(p + "w_down", ly.w_down);
    }
    out.emplace_back("final_norm", m.final_norm);
    out.emplace_back("head", m.head);
    return out;
}

template <class T>
int64_t param_count(const ModelState<T>& m) {
    int64_t n = m.embedding.size() + m.final_norm.size() + m.head.size();
    for (const auto& ly : m.layers)
        n += ly.attn_norm.size() + ly.wq.size() + ly.wk.size() + ly.wv.size() + ly.wo.size() +
             ly.mlp_norm.size() + ly.w_gate.size() + ly.w_up.size() + ly.w_down.size();
    return n;
}

template <class T>
void reinit_io(ModelState<T>& m, uint64_t seed) {
    Rng rng(seed);
    T std = (T)(m.cfg.init_scale / std::sqrt((double)m.cfg.d_model));
    for (auto& x : m.embedding.values()) x = (T)(rng.normal() * (double)std);
    for (auto& x : m.head.values()) x = (T)(rng.normal() * (double)std);
}

template <class T>
Tensor<T> forward_from_embeddings(Graph<T>& g, const ModelState<T>& m, const Tensor<T>& x0,
                                  int64_t batch, int64_t len,
                                  std::span<const int32_t> positions) {
    const ModelConfig& cfg = m.cfg;
    int64_t d = cfg.d_model, heads = cfg.n_heads, hd = d / heads;
    if (x0.ndim() != 2 || x0.dim(0) != batch * len || x0.dim(1) != d)
        throw ShapeError("forward: embedded input must be [batch*len, d_model]");
    if (len < 1 || len > cfg.max_seq)
        throw ContractError("forward: latent length " + std::to_string(len) +
                            " outside [1, " + std::to_string(cfg.max_seq) + "]");
    if ((int64_t)positions.size() != len)
        throw ShapeError("forward: positions length does not match latent length");

    IntTensor causal = detail_model::causal_mask(len);
    T eps = (T)detail_model::kNormEps;
    T att_scale = (T)(1.0 / std::sqrt((double)hd));

    Tensor<T> x = x0;
    for (const auto& ly : m.layers) {
        Tensor<T> h = rmsnorm(g, x, ly.attn_norm, eps);
        Tensor<T> q = matmul(g, h, ly.wq);
        Tensor<T> k = matmul(g, h, ly.wk);
        Tensor<T> v = matmul(g, h, ly.wv);

        auto split = [&](const Tensor<T>& t) {
            return transpose(g, t.reshaped({batch, len, heads, hd}), {0, 2, 1, 3})
                .reshaped({batch * heads, len, hd});
        };
        Tensor<T> qh = rope(g, split(q), positions, cfg.rope_base);
        Tensor<T> kh = rope(g, split(k), positions, cfg.rope_base);
        Tensor<T> vh = split(v);

        Tensor<T> scores = scale(g, bmm(g, qh, transpose(g, kh, {0, 2, 1})), att_scale);
        Tensor<T> masked = masked_fill(g, scores, causal, (T)-1e9);
        Tensor<T> probs = softmax_logsumexp(g, masked).probs;
        Tensor<T> ctx = bmm(g, probs, vh);
        Tensor<T> merged = transpose(g, ctx.reshaped({batch, heads, len, hd}), {0, 2, 1, 3})
                               .reshaped({batch * len, d});
        x = add(g, x, matmul(g, merged, ly.wo));

        Tensor<T> h2 = rmsnorm(g, x, ly.mlp_norm, eps);
        Tensor<T> gated = mul(g, silu(g, matmul(g, h2, ly.w_gate)), matmul(g, h2, ly.w_up));
        x = add(g, x, matmul(g, gated, ly.w_down));
    }
    Tensor<T> xn = rmsnorm(g, x, m.final_norm, eps);
    return matmul(g, xn, m.head);
}

template <class T>
Tensor<T> model_forward_flat(Graph<T>& g, const ModelState<T>& m, const IntTensor& inputs) {
    if (inputs.ndim() != 2) throw ShapeError("model_forward_flat: inputs must be [B, L]");
    int64_t b = inputs.dim(0), l = inputs.dim(1);
    Tensor<T> x = gather_rows(g, m.embedding, inputs);
    std::vector<int32_t> pos = rope_positions(l, 1, false);
    Tensor<T> logits = forward_from_embeddings(g, m, x, b, l, pos);
    return logits.reshaped({b, l, m.cfg.vocab});
}

template <class T>
std::vector<int32_t> generate(const ModelState<T>& m, const std::vector<int32_t>& prompt,
                              int64_t n, double temperature, uint64_t seed) {
    if (prompt.empty()) throw DataError("generate: empty prompt");
    for (int32_t t : prompt)
        if (t < 0 || t >= m.cfg.vocab)
            throw DataError("generate: prompt token " + std::to_string(t) +
                            " outside vocab " + std::to_string(m.cfg.vocab));
    if (temperature < 0.0) throw ContractError("generate: negative temperature");

    Rng rng(seed);
    std::vector<int32_t> ctx = prompt, out;
    int64_t v = m.cfg.vocab;
    out.reserve((size_t)n);
    for (int64_t step = 0; step < n; ++step) {
        int64_t l = std::min<int64_t>((int64_t)ctx.size(), m.cfg.max_seq);
        IntTensor window({1, l});
        std::copy(ctx.end() - l, ctx.end(), window.data.begin());
        Graph<T> g;
        Tensor<T> logits = model_forward_flat(g, m, window);
        std::span<const T> z = logits.values();
        const T* last = z.data() + (l - 1) * v;

        int32_t pick = 0;
        if (temperature == 0.0) {
            for (int64_t j = 1; j < v; ++j)
                if (last[j] > last[pick]) pick = (int32_t)j;
        } else {
            double mx = (double)last[0];
            for (int64_t j = 1; j < v; ++j) mx = std::max(mx, (double)last[j]);
            std::vector<double> p((size_t)v);
            double sum = 0.0;
            for (int64_t j = 0; j < v; ++j) {
                p[(size_t)j] = std::exp(((double)last[j] - mx) / temperature);
                sum += p[(size_t)j];
            }
            double u = rng.uniform() * sum, acc = 0.0;
            pick = (int32_t)(v - 1);
            for (int64_t j = 0; j < v; ++j) {
                acc += p[(size_t)j];
                if (u < acc) { pick = (int32_t)j; break; }
            }
        }
        out.push_back(pick);
        ctx.push_back(pick);
    }
    return out;
}

}  // namespace tstlab
