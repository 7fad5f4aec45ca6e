#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tstlab/common.hpp"
#include "tstlab/rng.hpp"

namespace tstlab {

struct Corpus {
    std::vector<int32_t> tokens;
    int32_t vocab = 0;
    std::string source;

    int64_t size() const { return (int64_t)tokens.size(); }
};

// Token files carry a small header (magic TSTC, version, id width, vocab,
// count) followed by little-endian ids. Anything without the magic is read as
// raw bytes with vocab 256. Loading validates every id against the vocab.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& c, const std::filesystem::path& path);

struct MarkovSpec {
    int order = 3;
    int32_t vocab = 32;
    int64_t length = 1 << 20;
    uint64_t seed = 1;
    double alpha = 0.5;  // Dirichlet concentration per transition row
};

// Order-k chain with Dirichlet-drawn transition rows. Rows are indexed by the
// base-V encoding of the context (oldest symbol in the highest digit).
class MarkovChain {
public:
    MarkovChain(int order, int32_t vocab, uint64_t seed, double alpha);

    int order() const { return order_; }
    int32_t vocab() const { return vocab_; }
    int64_t states() const { return states_; }
    // [states, vocab], rows sum to 1
    const std::vector<double>& rows() const { return rows_; }

    std::vector<int32_t> sample(int64_t length, uint64_t seed) const;

private:
    int order_;
    int32_t vocab_;
    int64_t states_;
    std::vector<double> rows_;
};

Corpus synth_markov(const MarkovSpec& spec);

struct Batch {
    IntTensor inputs;  // [B,l,s] in the superposition phase, [B,L] otherwise
    IntTensor labels;  // same layout as inputs; pads hold kIgnoreIndex
};

// ---- windowing and bag folding ----

// [B,L] token ids -> [B, L/bag, bag]; L must divide evenly.
IntTensor fold_inputs(const IntTensor& tokens, int bag);

// Next-token labels [B,L] -> bagged targets [B, L/bag, bag]. Within each row
// the labels slide forward by bag-1 and the tail pads with kIgnoreIndex, so
// bag j targets absolute positions [j*bag + bag, j*bag + 2*bag - 1] and the
// last bag keeps exactly one valid slot.
IntTensor shift_labels(const IntTensor& labels, int bag);

// Next-token labels [B,L] -> [B, L, bag] where position t targets the next
// bag tokens starting at t+1, clipped with kIgnoreIndex at the row end. Used
// when only the output side is bagged and the input stays flat.
IntTensor overlap_labels(const IntTensor& labels, int bag);

// Sequential non-overlapping windows over corpus[0, limit). One batch
// consumes rows * window tokens where window is base_len (recovery) or
// base_len * bag (superposition), keeping latent length fixed across phases.
class BatchStream {
public:
    BatchStream(const Corpus& corpus, int64_t limit, int rows, int base_len, int bag,
                Phase phase);

    // nullopt when the region cannot fit another batch; restart() begins the
    // next epoch at token zero.
    std::optional<Batch> next();
    void restart();

    int64_t cursor() const { return cursor_; }
    int64_t epoch() const { return epoch_; }
    void seek(int64_t cursor, int64_t epoch);

    int64_t window() const { return window_; }
    int64_t batch_tokens() const { return window_ * rows_; }

private:
    const Corpus* corpus_;
    int64_t limit_;
    int rows_;
    int base_len_;
    int bag_;
    Phase phase_;
    int64_t window_;
    int64_t cursor_ = 0;
    int64_t epoch_ = 0;
};

}  // namespace tstlab
