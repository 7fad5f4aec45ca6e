#include "tstlab/analysis.hpp"

namespace tstlab {

// Multiply-accumulate = 2 FLOPs throughout. Elementwise terms use small
// per-element constants; they are identical across phases, so any slack in
// them cancels in the superposition/baseline ratio.
double flops_per_step(const ModelConfig& cfg, int64_t base_len, int64_t s, Phase phase) {
    if (base_len < 1) throw ContractError("flops_per_step: base_len must be positive");
    if (s < 1) throw ContractError("flops_per_step: s must be at least 1");
    double l = (double)base_len;  // latent length, both phases
    double d = (double)cfg.d_model;
    double ff = (double)cfg.d_ff;
    double v = (double)cfg.vocab;
    double heads = (double)cfg.n_heads;

    // Embedding: plain lookup costs no arithmetic; a bag of s is s adds plus
    // one divide per channel.
    double embed = 0.0;
    if (phase == Phase::superposition && s > 1) embed = l * ((double)s + 1.0) * d;

    double norm = 4.0 * l * d;  // square-accumulate, rsqrt scale, weight mul
    double attn = 4.0 * (2.0 * l * d * d)  // q, k, v, o projections
                  + 6.0 * l * d            // rotary twist on q and k
                  + 2.0 * (2.0 * l * l * d)  // scores and value gather
                  + 5.0 * heads * l * l;     // softmax
    double mlp = 3.0 * (2.0 * l * d * ff) + 6.0 * l * ff;
    double per_layer = attn + mlp + 2.0 * norm;

    double head = 2.0 * l * d * v;
    return embed + (double)cfg.n_layers * per_layer + norm + head;
}

}  // namespace tstlab
