#pragma once

// eval_ce definition; see analysis.hpp for the contract.

namespace tstlab {

template <class T>
double eval_ce(const ModelState<T>& m, const Corpus& corpus, int64_t begin, int64_t rows,
               int64_t base_len, int64_t batches) {
    if (batches < 1) throw ContractError("eval_ce: need at least one batch");
    BatchStream stream(corpus, corpus.size(), (int)rows, (int)base_len, 1, Phase::recovery);
    stream.seek(begin, 0);
    double sum = 0.0;
    int64_t count = 0;
    for (int64_t b = 0; b < batches; ++b) {
        auto batch = stream.next();
        if (!batch)
            throw DataError("eval_ce: held-out region too small for " +
                            std::to_string(batches) + " batches of " + std::to_string(rows) +
                            "x" + std::to_string(base_len));
        Graph<T> g;
        Tensor<T> logits = model_forward_flat(g, m, batch->inputs);
        LossReport rep;
        IntTensor flat = batch->labels.reshaped({batch->labels.size()});
        Tensor<T> loss =
            ce_loss(g, logits.reshaped({flat.size(), m.cfg.vocab}), flat, &rep);
        sum += (double)loss.item() * (double)rep.valid_total;
        count += rep.valid_total;
    }
    return sum / (double)count;
}

}  // namespace tstlab
