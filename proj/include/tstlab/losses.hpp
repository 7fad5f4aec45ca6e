#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tstlab/tensor.hpp"

namespace tstlab {

// Weight applied to bag slot i (1-based). The fitted kind follows the decay
// curve measured on real text, clipped so weights stay positive.
enum class WeightKind { uniform, power_law, exponential, first_token, fitted };

struct BagWeighting {
    WeightKind kind = WeightKind::uniform;
    double c0 = 0.0, a = 0.0, k = 0.0;  // fitted: c0 + a * i^k
    double floor = 1e-6;

    double weight(int i) const {
        switch (kind) {
            case WeightKind::uniform: return 1.0;
            case WeightKind::power_law: return 1.0 / (double)i;
            case WeightKind::exponential: return std::exp(-(double)i);
            case WeightKind::first_token: return i == 1 ? 1.0 : 0.0;
            case WeightKind::fitted: {
                double w = c0 + a * std::pow((double)i, k);
                return w > floor ? w : floor;
            }
        }
        return 1.0;
    }
};

const char* weight_kind_name(WeightKind k);
WeightKind weight_kind_from(const std::string& name);

// simplified:  sum_i g(i) * CE_i / sum_i g(i), CE_i the masked mean over
//              positions where slot i is valid
// corrected:   simplified minus the mean of log(valid slots per position);
//              for full bags that is log(bag), turning the value into the
//              mean KL(uniform bag || softmax). Gradient unchanged. Only
//              defined for uniform weighting.
// alternative: mean over positions of lse(z) - lse(z restricted to the
//              distinct bag targets); zero exactly when the softmax puts all
//              mass on the bag.
enum class MceVariant { simplified, corrected, alternative };

const char* mce_variant_name(MceVariant v);
MceVariant mce_variant_from(const std::string& name);

struct LossReport {
    double value = 0.0;                   // scalar the graph trains on
    std::vector<double> per_slot;         // masked mean CE per slot
    std::vector<int64_t> valid_per_slot;  // contributing positions per slot
    int64_t positions = 0;                // positions with >= 1 valid target
    int64_t valid_total = 0;              // valid (position, slot) pairs
    double correction = 0.0;              // constant subtracted by `corrected`
};

// Mean next-token cross entropy. logits:[N,V], labels:[N] with kIgnoreIndex
// skipped. All labels ignored is an error, as is a label outside [0,V).
template <class T>
Tensor<T> ce_loss(Graph<T>& g, const Tensor<T>& logits, const IntTensor& labels,
                  LossReport* report = nullptr);

// Multi-target cross entropy over bags. logits:[N,V], bags:[N,s]. A bag slot
// holding kIgnoreIndex contributes nothing; a position with no valid slot is
// excluded. With bag size 1 and uniform weighting this reproduces ce_loss
// bit for bit, value and gradient both.
template <class T>
Tensor<T> mce_loss(Graph<T>& g, const Tensor<T>& logits, const IntTensor& bags,
                   MceVariant variant, const BagWeighting& weighting,
                   LossReport* report = nullptr);

// Dispatch on phase: 3-D labels go to mce_loss, 2-D to ce_loss.
template <class T>
Tensor<T> loss_for_phase(Graph<T>& g, Phase phase, const Tensor<T>& logits,
                         const IntTensor& labels, MceVariant variant,
                         const BagWeighting& weighting, LossReport* report = nullptr);

}  // namespace tstlab

#include "tstlab/detail/loss_ce.hpp"
#include "tstlab/detail/loss_mce.hpp"
