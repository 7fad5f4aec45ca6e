#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tstlab/tensor.hpp"

namespace tstlab {

struct TrainPlan {
    int64_t total_steps = 3000;
    int64_t batch_rows = 8;
    int64_t base_len = 32;
    double peak_lr = 1e-3;
    // Config leaves this at -1 to get min(2000, total_steps/10).
    int64_t warmup_steps = -1;
    double decay_fraction = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.1;
    double clip_norm = 1.0;  // global grad-norm ceiling; 0 disables
    uint64_t seed = 1;
    Precision precision = Precision::single_fp;
};

void validate(const TrainPlan& plan);

// Linear ramp 0 -> peak over warmup_steps, flat peak, then linear decay to
// zero over the last round(decay_fraction * total) steps.
double wsd_lr(int64_t step, const TrainPlan& plan);

// Decoupled weight decay: p -= lr*wd*p + lr * mhat / (sqrt(vhat) + eps).
// Moments are owned here, in the order the params were handed over; that
// order is the checkpoint layout.
template <class T>
class AdamW {
public:
    AdamW(std::vector<std::pair<std::string, Tensor<T>>> params, double beta1, double beta2,
          double weight_decay, double clip_norm, double eps = 1e-8);

    // Clips the global gradient norm, then applies one update everywhere.
    // Throws NumericError naming the offending parameter on a non-finite
    // gradient; the state is untouched in that case.
    void step(double lr);

    void zero_grad();

    int64_t steps_taken() const { return t_; }
    size_t param_slots() const { return params_.size(); }
    const std::string& name(size_t i) const { return params_[i].first; }
    Tensor<T>& param(size_t i) { return params_[i].second; }
    std::vector<T>& moment1(size_t i) { return m_[i]; }
    std::vector<T>& moment2(size_t i) { return v_[i]; }
    void set_steps_taken(int64_t t) { t_ = t; }

    // Drops the moment history of one named parameter (fresh-start ablation).
    void reset_moments(const std::string& name);

private:
    std::vector<std::pair<std::string, Tensor<T>>> params_;
    std::vector<std::vector<T>> m_, v_;
    double beta1_, beta2_, weight_decay_, clip_norm_, eps_;
    int64_t t_ = 0;
};

}  // namespace tstlab
