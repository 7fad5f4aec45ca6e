#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tstlab/common.hpp"

namespace tstlab {

template <class T>
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<T> values;
    std::vector<T> m, v;  // AdamW moments, same length as values
};

// Self-describing training snapshot. Raw little-endian scalars; round-trips
// bit-exactly in either precision.
template <class T>
struct Checkpoint {
    uint64_t step = 0;
    Phase phase = Phase::superposition;
    uint64_t data_tokens_seen = 0;
    uint64_t cursor = 0;  // batch stream offset into the corpus
    uint64_t epoch = 0;
    uint64_t opt_steps = 0;
    std::string config_text;  // resolved run config snapshot
    std::vector<CheckpointEntry<T>> entries;
};

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck);

// Throws IoError on damage or when the file's precision is not T.
template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// Reads only the header, so callers can pick the right load_checkpoint<T>.
Precision checkpoint_precision(const std::filesystem::path& path);

}  // namespace tstlab
