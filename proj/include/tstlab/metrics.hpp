#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tstlab/common.hpp"

namespace tstlab {

struct MetricsRecord {
    int64_t step = 0;
    Phase phase = Phase::recovery;
    std::string loss_kind;  // "ce", "mce_simplified", ...
    double loss = 0.0;
    double lr = 0.0;
    int64_t data_tokens_seen = 0;
    double wallclock = 0.0;  // seconds since run start
    bool has_eval = false;
    double eval_ce = 0.0;
};

// One JSON object per line, flushed per record so a killed run keeps every
// completed step.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::filesystem::path& path);
    void append(const MetricsRecord& rec);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

// Field-by-field comparison for replay and twin-run checks. Wallclock is the
// only field allowed to differ; everything else must match exactly. On
// mismatch, fills `why` (when given) with the first offending record/field.
bool metrics_match(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b,
                   std::string* why = nullptr);

}  // namespace tstlab
