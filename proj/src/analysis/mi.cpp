#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tstlab/analysis.hpp"

namespace tstlab {

namespace {

constexpr int kBlocks = 32;
constexpr int kReps = 64;

// Plug-in MI over a K x K joint count table, marginals from the same table.
// Never negative by construction; `clipped` records if rounding dips below 0.
double plugin_mi(const std::vector<int64_t>& joint, int32_t k, bool* clipped) {
    int64_t total = std::accumulate(joint.begin(), joint.end(), (int64_t)0);
    std::vector<int64_t> mx((size_t)k, 0), my((size_t)k, 0);
    for (int32_t x = 0; x < k; ++x)
        for (int32_t y = 0; y < k; ++y) {
            int64_t c = joint[(size_t)(x * k + y)];
            mx[(size_t)x] += c;
            my[(size_t)y] += c;
        }
    double n = (double)total, mi = 0.0;
    for (int32_t x = 0; x < k; ++x)
        for (int32_t y = 0; y < k; ++y) {
            int64_t c = joint[(size_t)(x * k + y)];
            if (c == 0) continue;
            mi += ((double)c / n) *
                  std::log((double)c * n / ((double)mx[(size_t)x] * (double)my[(size_t)y]));
        }
    if (clipped) *clipped = mi < 0.0;
    return std::max(mi, 0.0);
}

double miller_madow_note(const std::vector<int64_t>& joint, int32_t k, int64_t total) {
    int64_t nz_joint = 0;
    std::vector<int64_t> mx((size_t)k, 0), my((size_t)k, 0);
    for (int32_t x = 0; x < k; ++x)
        for (int32_t y = 0; y < k; ++y) {
            int64_t c = joint[(size_t)(x * k + y)];
            if (c > 0) ++nz_joint;
            mx[(size_t)x] += c;
            my[(size_t)y] += c;
        }
    int64_t nz_x = (int64_t)std::count_if(mx.begin(), mx.end(), [](int64_t c) { return c > 0; });
    int64_t nz_y = (int64_t)std::count_if(my.begin(), my.end(), [](int64_t c) { return c > 0; });
    // MI = H(x) + H(y) - H(x,y) and each plug-in entropy is low by about
    // (nonzero-1)/2N, so the MI estimate is high by about this much. A scale
    // for judging near-zero readings, not a correction we apply.
    return (double)(nz_joint - nz_x - nz_y + 1) / (2.0 * (double)total);
}

}  // namespace

MiCurve estimate_mi(const Corpus& corpus, int64_t max_distance, int32_t vocab_cap,
                    uint64_t bootstrap_seed) {
    if (max_distance < 1) throw ContractError("estimate_mi: max_distance must be positive");
    if (vocab_cap < 2) throw ContractError("estimate_mi: vocab_cap must be at least 2");
    int64_t n = corpus.size();
    if (n <= max_distance + 1)
        throw DataError("estimate_mi: corpus shorter than the distance range");

    // Cap the alphabet: the vocab_cap-1 most frequent tokens keep their own
    // cell, everything else shares the last one.
    int32_t k = std::min<int32_t>(vocab_cap, corpus.vocab);
    std::vector<int32_t> remap((size_t)corpus.vocab, k - 1);
    if (corpus.vocab <= vocab_cap) {
        for (int32_t t = 0; t < corpus.vocab; ++t) remap[(size_t)t] = t;
    } else {
        std::vector<int64_t> freq((size_t)corpus.vocab, 0);
        for (int32_t t : corpus.tokens) ++freq[(size_t)t];
        std::vector<int32_t> order((size_t)corpus.vocab);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&freq](int32_t a, int32_t b) {
            return freq[(size_t)a] > freq[(size_t)b];
        });
        for (int32_t i = 0; i + 1 < vocab_cap; ++i) remap[(size_t)order[(size_t)i]] = i;
    }
    std::vector<int32_t> ids((size_t)n);
    for (int64_t i = 0; i < n; ++i) ids[(size_t)i] = remap[(size_t)corpus.tokens[(size_t)i]];

    MiCurve curve;
    Rng rng(bootstrap_seed);
    for (int64_t d = 1; d <= max_distance; ++d) {
        int64_t pairs = n - d;
        curve.distances.push_back(d);
        curve.pairs.push_back(pairs);

        // Contiguous blocks of the pair index range back the bootstrap, so
        // serial dependence inside a block is preserved.
        std::vector<std::vector<int64_t>> block((size_t)kBlocks,
                                                std::vector<int64_t>((size_t)(k * k), 0));
        for (int64_t t = 0; t < pairs; ++t) {
            int b = (int)(t * kBlocks / pairs);
            ++block[(size_t)b][(size_t)(ids[(size_t)t] * k + ids[(size_t)(t + d)])];
        }
        std::vector<int64_t> joint((size_t)(k * k), 0);
        for (const auto& bl : block)
            for (size_t c = 0; c < joint.size(); ++c) joint[c] += bl[c];

        bool enough = pairs >= std::max<int64_t>(1000, (int64_t)k * k);
        curve.valid.push_back(enough ? 1 : 0);
        if (!enough) {
            curve.mi.push_back(0.0);
            curve.sigma.push_back(0.0);
            curve.bias_note.push_back(0.0);
            curve.clipped.push_back(0);
            continue;
        }

        bool clip = false;
        curve.mi.push_back(plugin_mi(joint, k, &clip));
        curve.clipped.push_back(clip ? 1 : 0);
        curve.bias_note.push_back(std::abs(miller_madow_note(joint, k, pairs)));

        std::vector<int64_t> resampled((size_t)(k * k));
        std::vector<double> reps;
        reps.reserve(kReps);
        for (int repi = 0; repi < kReps; ++repi) {
            std::fill(resampled.begin(), resampled.end(), (int64_t)0);
            for (int b = 0; b < kBlocks; ++b) {
                const auto& bl = block[(size_t)rng.uniform_int(kBlocks)];
                for (size_t c = 0; c < resampled.size(); ++c) resampled[c] += bl[c];
            }
            reps.push_back(plugin_mi(resampled, k, nullptr));
        }
        double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / (double)kReps;
        double var = 0.0;
        for (double v : reps) var += (v - mean) * (v - mean);
        curve.sigma.push_back(std::sqrt(var / (double)(kReps - 1)));
    }
    return curve;
}

std::string mi_curve_csv(const MiCurve& curve) {
    std::ostringstream os;
    os << "distance,mi,sigma,bias_note,pairs,clipped,valid\n";
    for (size_t i = 0; i < curve.distances.size(); ++i) {
        os << curve.distances[i] << ',' << curve.mi[i] << ',' << curve.sigma[i] << ','
           << curve.bias_note[i] << ',' << curve.pairs[i] << ',' << (int)curve.clipped[i] << ','
           << (int)curve.valid[i] << '\n';
    }
    return os.str();
}

}  // namespace tstlab
