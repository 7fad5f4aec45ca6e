#pragma once

#include <string>
#include <vector>

#include "tstlab/data.hpp"
#include "tstlab/losses.hpp"
#include "tstlab/model.hpp"

namespace tstlab {

struct MiCurve {
    std::vector<int64_t> distances;  // 1..D
    std::vector<double> mi;          // nats; plug-in estimate, clipped at 0
    std::vector<double> sigma;       // block-bootstrap standard error
    std::vector<double> bias_note;   // Miller-Madow style bias scale, reported not applied
    std::vector<int64_t> pairs;
    std::vector<uint8_t> clipped;  // raw estimate was negative before the clip
    std::vector<uint8_t> valid;    // enough pairs to report at this distance
};

// Plug-in MI between (x_t, x_{t+d}) for d = 1..max_distance, both marginals
// taken from the same pair set. Tokens beyond the vocab_cap-1 most frequent
// share one bucket. Distances with too few pairs are flagged, not guessed.
MiCurve estimate_mi(const Corpus& corpus, int64_t max_distance, int32_t vocab_cap,
                    uint64_t bootstrap_seed = 71);

std::string mi_curve_csv(const MiCurve& curve);

struct PowerLawFit {
    double c0 = 0.0, a = 0.0, k = 0.0;
    double rss = 0.0;
    int64_t points = 0;
    bool degenerate = false;  // flat curve, k unidentifiable
    bool decaying = false;    // k < 0
};

// Least squares for mi ~ c0 + a * d^k in linear space: coarse grid over
// k in [-3, -0.1], then local shrink refinement; (c0, a) solved exactly per k.
PowerLawFit fit_power_law(const MiCurve& curve);

std::string power_law_csv(const PowerLawFit& fit);

// Forward cost of one sequence, multiply-accumulate = 2 FLOPs. The latent
// length equals base_len in both phases (stretched data window during
// superposition); only the embedding-mean term depends on s. Backward is a
// uniform multiple, so phase ratios are unchanged by it.
double flops_per_step(const ModelConfig& cfg, int64_t base_len, int64_t s, Phase phase);

// Mean next-token CE over `batches` sequential [rows, base_len] windows
// starting at `begin`; plain path, deterministic.
template <class T>
double eval_ce(const ModelState<T>& m, const Corpus& corpus, int64_t begin, int64_t rows,
               int64_t base_len, int64_t batches);

struct SweepCell {
    int64_t s = 0;  // 0 means the summary never parsed; real cells have s >= 1
    double r = 0.0;
    uint64_t seed = 0;
    double final_ce = 0.0;
    std::string run_dir;
    bool ok = false;
};

// Reads each run directory's summary record.
std::vector<SweepCell> collect_sweep(const std::vector<std::string>& run_dirs);

// CSV grid: one row per r, one column per s, cells averaging final CE over
// seeds; failed cells print as "-".
std::string summarize_sweep(const std::vector<SweepCell>& cells);

}  // namespace tstlab

#include "tstlab/detail/eval_impl.hpp"
