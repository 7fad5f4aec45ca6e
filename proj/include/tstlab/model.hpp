#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tstlab/rng.hpp"
#include "tstlab/tensor.hpp"

namespace tstlab {

// Pre-norm decoder blocks with RMS normalization, rotary positions and a
// gated MLP. Input embedding table and output head are separate parameters.
struct ModelConfig {
    int64_t d_model = 96;
    int64_t n_layers = 3;
    int64_t n_heads = 4;
    int64_t d_ff = 384;
    int64_t vocab = 32;
    int64_t max_seq = 512;  // longest latent sequence a forward accepts
    uint64_t init_seed = 1;
    double init_scale = 1.0;  // matrix std = init_scale / sqrt(d_model)
    // Rotary angles normally use latent positions 0..l-1. When folding bags
    // of size s upstream, this switches to the underlying data offsets
    // 0, s, 2s, ... instead (comparison switch; default off).
    bool rope_raw_positions = false;
    double rope_base = 10000.0;
};

void validate(const ModelConfig& cfg);
int64_t param_count(const ModelConfig& cfg);

enum class Ablation { none, full, input_only, output_only };
const char* ablation_name(Ablation a);
Ablation ablation_from(const std::string& s);

// 0..len-1 as rope positions, or 0, stride, 2*stride, ... when raw.
std::vector<int32_t> rope_positions(int64_t len, int64_t stride, bool raw);

template <class T>
struct LayerState {
    Tensor<T> attn_norm, wq, wk, wv, wo;
    Tensor<T> mlp_norm, w_gate, w_up, w_down;
};

template <class T>
struct ModelState {
    ModelConfig cfg;
    Tensor<T> embedding;  // [V, d]
    std::vector<LayerState<T>> layers;
    Tensor<T> final_norm;  // [d]
    Tensor<T> head;        // [d, V]
};

template <class T>
ModelState<T> init_model(const ModelConfig& cfg);

// Stable name -> tensor pairing; the order is the checkpoint layout.
template <class T>
std::vector<std::pair<std::string, Tensor<T>>> named_params(ModelState<T>& m);

template <class T>
int64_t param_count(const ModelState<T>& m);

// Redraws embedding and head from the init distribution under `seed`;
// every interior parameter keeps its exact bits.
template <class T>
void reinit_io(ModelState<T>& m, uint64_t seed);

// Core stack: x is the embedded sequence [batch*len, d_model], positions are
// the rope indices for the len axis. Returns logits [batch*len, vocab].
template <class T>
Tensor<T> forward_from_embeddings(Graph<T>& g, const ModelState<T>& m, const Tensor<T>& x,
                                  int64_t batch, int64_t len,
                                  std::span<const int32_t> positions);

// Plain token path: inputs [B, L] -> logits [B, L, V].
template <class T>
Tensor<T> model_forward_flat(Graph<T>& g, const ModelState<T>& m, const IntTensor& inputs);

// Samples `n` tokens after `prompt`; temperature 0 picks the argmax
// (lowest id on ties). Returns only the newly generated tokens.
template <class T>
std::vector<int32_t> generate(const ModelState<T>& m, const std::vector<int32_t>& prompt,
                              int64_t n, double temperature, uint64_t seed);

}  // namespace tstlab

#include "tstlab/detail/model_fwd.hpp"
