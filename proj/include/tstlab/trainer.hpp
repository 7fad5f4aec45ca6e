#pragma once

#include <string>

#include "tstlab/config.hpp"
#include "tstlab/data.hpp"

namespace tstlab {

struct RunResult {
    std::string run_dir;
    double final_train_loss = 0.0;
    double final_eval_ce = 0.0;
    int64_t data_tokens_seen = 0;
    int64_t steps = 0;
    double wallclock = 0.0;
};

// Materializes the configured data source: synthesizes the Markov corpus for
// kind "markov", otherwise loads the token file at data.path.
Corpus open_corpus(const DataSpec& data);

// Two-phase run: superposed steps [0, boundary), then plain next-token steps
// [boundary, total). The boundary state is always written to disk and read
// back before phase two starts; one LR schedule spans both phases. Writes
// config.json, metrics.jsonl, checkpoints/ and summary.json under run_dir.
// Throws NumericError after recording a diagnostic summary if a step aborts.
RunResult run_two_phase(const RunConfig& cfg, const Corpus& corpus, const std::string& run_dir);

// kind: full | input_only | output_only | reinit_io. Adjusts the
// superposition block accordingly, then runs run_two_phase.
RunResult run_ablation(const std::string& kind, RunConfig cfg, const Corpus& corpus,
                       const std::string& run_dir);

// One run per (s, r, seed) grid cell under out_dir, plus summary.csv in the
// r-by-s layout. jobs > 1 fans cells out to child processes. Returns the
// number of failed cells.
int run_sweep(const RunConfig& cfg, const std::string& out_dir, int jobs);

}  // namespace tstlab
