#pragma once

#include <string>
#include <vector>

#include "tstlab/data.hpp"
#include "tstlab/losses.hpp"
#include "tstlab/model.hpp"
#include "tstlab/optim.hpp"

namespace tstlab {

struct SuperpositionSpec {
    int64_t s = 1;
    double r = 0.0;
    BagWeighting weighting;
    MceVariant variant = MceVariant::simplified;
    Ablation ablation = Ablation::full;
    // Redraw embedding and head (and drop their moments) at the phase
    // boundary instead of resuming them.
    bool reinit_io = false;
    uint64_t reinit_seed = 2718;
    // Fresh optimizer moments for every parameter at the boundary.
    bool reset_optimizer = false;
};

// Steps [0, boundary) run superposed, [boundary, total) run plain.
int64_t phase_boundary(const SuperpositionSpec& spec, int64_t total_steps);

void validate(const SuperpositionSpec& spec);

struct DataSpec {
    std::string kind = "markov";  // markov | tokens | text
    std::string path;             // for tokens/text
    MarkovSpec markov;
    double holdout_fraction = 0.05;  // corpus tail reserved for eval
};

struct EvalSpec {
    int64_t every = 200;  // 0 = only boundary and final
    int64_t rows = 16;    // batch rows per eval pass
    int64_t batches = 4;
};

struct SweepSpec {
    std::vector<int64_t> s{2};
    std::vector<double> r{0.3};
    std::vector<uint64_t> seeds{1};  // every (s, r) cell runs each seed
};

struct RunConfig {
    std::string run_name = "run";
    ModelConfig model;
    TrainPlan plan;
    SuperpositionSpec sup;
    DataSpec data;
    EvalSpec eval;
    SweepSpec sweep;
};

// Parses the JSON-with-comments dialect, applies dotted-key overrides
// ("plan.total_steps=100", last wins), fills derived defaults (warmup), and
// validates everything, reporting all problems in one ConfigError.
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

// Resolved snapshot; parse_run_config(render_run_config(c), {}) == c.
std::string render_run_config(const RunConfig& cfg);

void validate(const RunConfig& cfg);

}  // namespace tstlab
