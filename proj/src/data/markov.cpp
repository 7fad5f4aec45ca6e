#include <cmath>

#include "tstlab/data.hpp"

namespace tstlab {

namespace {

int64_t pow_i64(int64_t base, int exp) {
    int64_t r = 1;
    for (int i = 0; i < exp; ++i) {
        r *= base;
        if (r > (int64_t)1 << 40) throw ContractError("markov state space too large");
    }
    return r;
}

}  // namespace

MarkovChain::MarkovChain(int order, int32_t vocab, uint64_t seed, double alpha) {
    if (order < 1 || order > 8) throw ContractError("markov order must be in [1,8]");
    if (vocab < 2) throw ContractError("markov vocab must be at least 2");
    if (alpha <= 0.0) throw ContractError("markov alpha must be positive");
    order_ = order;
    vocab_ = vocab;
    states_ = pow_i64(vocab, order);
    rows_.resize((size_t)(states_ * vocab));
    Rng rng(seed);
    for (int64_t s = 0; s < states_; ++s) {
        double* row = rows_.data() + s * vocab;
        double total = 0.0;
        for (int32_t t = 0; t < vocab; ++t) {
            row[t] = rng.gamma(alpha);
            total += row[t];
        }
        // Gamma draws are positive, so total > 0.
        for (int32_t t = 0; t < vocab; ++t) row[t] /= total;
    }
}

std::vector<int32_t> MarkovChain::sample(int64_t length, uint64_t seed) const {
    if (length <= 0) throw ContractError("markov sample length must be positive");
    Rng rng(seed);
    std::vector<int32_t> out;
    out.reserve((size_t)length);

    int64_t state = 0;
    for (int i = 0; i < order_; ++i)
        state = state * vocab_ + rng.uniform_int(vocab_);

    auto step = [&](int64_t st) {
        const double* row = rows_.data() + st * vocab_;
        double u = rng.uniform();
        double acc = 0.0;
        for (int32_t t = 0; t < vocab_; ++t) {
            acc += row[t];
            if (u < acc) return t;
        }
        return vocab_ - 1;  // guard against accumulated rounding
    };

    const int kBurn = 1024;
    for (int i = 0; i < kBurn; ++i) {
        int32_t t = step(state);
        state = (state * vocab_) % states_ + t;
    }
    for (int64_t i = 0; i < length; ++i) {
        int32_t t = step(state);
        out.push_back(t);
        state = (state * vocab_) % states_ + t;
    }
    return out;
}

Corpus synth_markov(const MarkovSpec& spec) {
    MarkovChain chain(spec.order, spec.vocab, spec.seed, spec.alpha);
    Corpus c;
    c.vocab = spec.vocab;
    c.tokens = chain.sample(spec.length, spec.seed ^ 0x736d706cull);
    c.source = "markov(order=" + std::to_string(spec.order) +
               ",vocab=" + std::to_string(spec.vocab) +
               ",seed=" + std::to_string(spec.seed) + ")";
    return c;
}

}  // namespace tstlab
