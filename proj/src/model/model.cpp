#include "tstlab/model.hpp"

namespace tstlab {

void validate(const ModelConfig& cfg) {
    if (cfg.d_model < 1) throw ConfigError("model: d_model must be positive");
    if (cfg.n_layers < 1) throw ConfigError("model: n_layers must be positive");
    if (cfg.n_heads < 1) throw ConfigError("model: n_heads must be positive");
    if (cfg.d_model % cfg.n_heads != 0)
        throw ConfigError("model: d_model " + std::to_string(cfg.d_model) +
                          " not divisible by n_heads " + std::to_string(cfg.n_heads));
    if ((cfg.d_model / cfg.n_heads) % 2 != 0)
        throw ConfigError("model: head dim must be even for rotary pairs");
    if (cfg.d_ff < 1) throw ConfigError("model: d_ff must be positive");
    if (cfg.vocab < 2) throw ConfigError("model: vocab must be at least 2");
    if (cfg.max_seq < 1) throw ConfigError("model: max_seq must be positive");
    if (!(cfg.init_scale > 0.0)) throw ConfigError("model: init_scale must be positive");
    if (!(cfg.rope_base > 1.0)) throw ConfigError("model: rope_base must exceed 1");
}

int64_t param_count(const ModelConfig& cfg) {
    int64_t d = cfg.d_model, ff = cfg.d_ff, v = cfg.vocab;
    int64_t per_layer = 4 * d * d + 3 * d * ff + 2 * d;
    return v * d + cfg.n_layers * per_layer + d + d * v;
}

const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::full: return "full";
        case Ablation::input_only: return "input_only";
        case Ablation::output_only: return "output_only";
    }
    throw ContractError("ablation_name: bad enum value");
}

Ablation ablation_from(const std::string& s) {
    if (s == "none") return Ablation::none;
    if (s == "full") return Ablation::full;
    if (s == "input_only") return Ablation::input_only;
    if (s == "output_only") return Ablation::output_only;
    throw ConfigError("unknown ablation mode '" + s + "'");
}

std::vector<int32_t> rope_positions(int64_t len, int64_t stride, bool raw) {
    if (len < 1) throw ContractError("rope_positions: empty sequence");
    if (stride < 1) throw ContractError("rope_positions: stride must be positive");
    int64_t step = raw ? stride : 1;
    if ((len - 1) * step > INT32_MAX) throw ContractError("rope_positions: position overflow");
    std::vector<int32_t> p((size_t)len);
    for (int64_t i = 0; i < len; ++i) p[(size_t)i] = (int32_t)(i * step);
    return p;
}

}  // namespace tstlab
