#include "tstlab/data.hpp"

namespace tstlab {

IntTensor fold_inputs(const IntTensor& tokens, int bag) {
    if (tokens.ndim() != 2) throw ShapeError("fold_inputs expects [B,L]");
    if (bag < 1) throw ContractError("fold_inputs: bag must be >= 1");
    int64_t b = tokens.dim(0), l = tokens.dim(1);
    if (l % bag != 0)
        throw ShapeError("fold_inputs: window " + std::to_string(l) +
                         " not divisible by bag " + std::to_string(bag));
    // Row-major [B,L] already groups each bag contiguously.
    return tokens.reshaped({b, l / bag, bag});
}

IntTensor shift_labels(const IntTensor& labels, int bag) {
    if (labels.ndim() != 2) throw ShapeError("shift_labels expects [B,L]");
    if (bag < 1) throw ContractError("shift_labels: bag must be >= 1");
    int64_t b = labels.dim(0), l = labels.dim(1);
    if (l % bag != 0)
        throw ShapeError("shift_labels: window " + std::to_string(l) +
                         " not divisible by bag " + std::to_string(bag));
    IntTensor out({b, l / bag, (int64_t)bag});
    for (int64_t r = 0; r < b; ++r) {
        const int32_t* src = labels.data.data() + r * l;
        int32_t* dst = out.data.data() + r * l;
        for (int64_t k = 0; k < l; ++k)
            dst[k] = (k + bag - 1 < l) ? src[k + bag - 1] : kIgnoreIndex;
    }
    return out;
}

IntTensor overlap_labels(const IntTensor& labels, int bag) {
    if (labels.ndim() != 2) throw ShapeError("overlap_labels expects [B,L]");
    if (bag < 1) throw ContractError("overlap_labels: bag must be >= 1");
    int64_t b = labels.dim(0), l = labels.dim(1);
    IntTensor out({b, l, (int64_t)bag});
    for (int64_t r = 0; r < b; ++r) {
        const int32_t* src = labels.data.data() + r * l;
        int32_t* dst = out.data.data() + r * l * bag;
        for (int64_t t = 0; t < l; ++t)
            for (int64_t i = 0; i < bag; ++i)
                dst[t * bag + i] = (t + i < l) ? src[t + i] : kIgnoreIndex;
    }
    return out;
}

BatchStream::BatchStream(const Corpus& corpus, int64_t limit, int rows, int base_len,
                         int bag, Phase phase)
    : corpus_(&corpus), limit_(limit), rows_(rows), base_len_(base_len), bag_(bag),
      phase_(phase) {
    if (rows < 1 || base_len < 1 || bag < 1)
        throw ContractError("BatchStream: rows, base_len and bag must be positive");
    if (limit_ > corpus.size()) throw ContractError("BatchStream: limit exceeds corpus");
    window_ = phase == Phase::superposition ? (int64_t)base_len * bag : (int64_t)base_len;
    // +1 because the last label in a window is the following token.
    if (limit_ < (int64_t)rows * window_ + 1)
        throw DataError("corpus region too small for even one batch: have " +
                        std::to_string(limit_) + " tokens, need " +
                        std::to_string((int64_t)rows * window_ + 1));
}

std::optional<Batch> BatchStream::next() {
    int64_t need = (int64_t)rows_ * window_ + 1;
    if (cursor_ + need > limit_) return std::nullopt;

    IntTensor flat({rows_, window_});
    IntTensor nextt({rows_, window_});
    const int32_t* toks = corpus_->tokens.data();
    for (int64_t r = 0; r < rows_; ++r) {
        int64_t start = cursor_ + r * window_;
        for (int64_t k = 0; k < window_; ++k) {
            flat.data[r * window_ + k] = toks[start + k];
            nextt.data[r * window_ + k] = toks[start + k + 1];
        }
    }
    cursor_ += (int64_t)rows_ * window_;

    Batch out;
    if (phase_ == Phase::superposition) {
        out.inputs = fold_inputs(flat, bag_);
        out.labels = shift_labels(nextt, bag_);
    } else {
        out.inputs = std::move(flat);
        out.labels = std::move(nextt);
    }
    return out;
}

void BatchStream::restart() {
    cursor_ = 0;
    ++epoch_;
}

void BatchStream::seek(int64_t cursor, int64_t epoch) {
    if (cursor < 0 || cursor > limit_) throw ContractError("BatchStream::seek out of range");
    cursor_ = cursor;
    epoch_ = epoch;
}

}  // namespace tstlab
