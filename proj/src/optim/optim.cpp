#include "tstlab/optim.hpp"

#include <cmath>

#include "tstlab/kernels.hpp"

namespace tstlab {

void validate(const TrainPlan& plan) {
    if (plan.total_steps < 1) throw ConfigError("plan: total_steps must be positive");
    if (plan.batch_rows < 1) throw ConfigError("plan: batch_rows must be positive");
    if (plan.base_len < 1) throw ConfigError("plan: base_len must be positive");
    if (!(plan.peak_lr > 0.0)) throw ConfigError("plan: peak_lr must be positive");
    if (plan.warmup_steps < 0) throw ConfigError("plan: warmup_steps unresolved");
    if (plan.decay_fraction < 0.0 || plan.decay_fraction > 1.0)
        throw ConfigError("plan: decay_fraction outside [0,1]");
    int64_t decay_steps = (int64_t)std::llround(plan.decay_fraction * (double)plan.total_steps);
    if (plan.warmup_steps + decay_steps > plan.total_steps)
        throw ConfigError("plan: warmup plus decay spans exceed total_steps");
    if (plan.beta1 < 0.0 || plan.beta1 >= 1.0) throw ConfigError("plan: beta1 outside [0,1)");
    if (plan.beta2 < 0.0 || plan.beta2 >= 1.0) throw ConfigError("plan: beta2 outside [0,1)");
    if (plan.weight_decay < 0.0) throw ConfigError("plan: negative weight_decay");
    if (plan.clip_norm < 0.0) throw ConfigError("plan: negative clip_norm");
}

double wsd_lr(int64_t step, const TrainPlan& plan) {
    if (step < 0 || step >= plan.total_steps)
        throw ContractError("wsd_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(plan.total_steps) + ")");
    if (step < plan.warmup_steps)
        return plan.peak_lr * (double)step / (double)plan.warmup_steps;
    int64_t decay_steps = (int64_t)std::llround(plan.decay_fraction * (double)plan.total_steps);
    int64_t decay_start = plan.total_steps - decay_steps;
    if (step >= decay_start)
        return plan.peak_lr * (double)(plan.total_steps - step) / (double)decay_steps;
    return plan.peak_lr;
}

template <class T>
AdamW<T>::AdamW(std::vector<std::pair<std::string, Tensor<T>>> params, double beta1,
                double beta2, double weight_decay, double clip_norm, double eps)
    : params_(std::move(params)),
      beta1_(beta1),
      beta2_(beta2),
      weight_decay_(weight_decay),
      clip_norm_(clip_norm),
      eps_(eps) {
    if (params_.empty()) throw ContractError("adamw: no parameters");
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        params_[i].second.ensure_grad();
        m_[i].assign((size_t)params_[i].second.size(), T(0));
        v_[i].assign((size_t)params_[i].second.size(), T(0));
    }
}

template <class T>
void AdamW<T>::step(double lr) {
    // Norm accumulation stays scalar double so the clip decision does not
    // depend on the active kernel ISA.
    double sumsq = 0.0;
    for (size_t i = 0; i < params_.size(); ++i) {
        auto g = params_[i].second.grad();
        for (size_t j = 0; j < g.size(); ++j) {
            double x = (double)g[j];
            if (!std::isfinite(x))
                throw NumericError("adamw: non-finite gradient in " + params_[i].first +
                                   " at index " + std::to_string(j));
            sumsq += x * x;
        }
    }
    double norm = std::sqrt(sumsq);
    if (clip_norm_ > 0.0 && norm > clip_norm_) {
        T f = (T)(clip_norm_ / norm);
        for (size_t i = 0; i < params_.size(); ++i) {
            auto g = params_[i].second.grad();
            kernels::scale(g.data(), f, g.data(), g.size());
        }
    }

    ++t_;
    T bias1 = (T)(1.0 - std::pow(beta1_, (double)t_));
    T bias2 = (T)(1.0 - std::pow(beta2_, (double)t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto p = params_[i].second.values();
        auto g = params_[i].second.grad();
        kernels::adamw_update(p.data(), g.data(), m_[i].data(), v_[i].data(), p.size(), (T)lr,
                              (T)beta1_, (T)beta2_, (T)eps_, (T)weight_decay_, bias1, bias2);
        check_finite<T>("adamw", std::span<const T>(p.data(), p.size()));
    }
}

template <class T>
void AdamW<T>::zero_grad() {
    for (auto& [name, p] : params_) {
        (void)name;
        p.zero_grad();
    }
}

template <class T>
void AdamW<T>::reset_moments(const std::string& name) {
    for (size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].first != name) continue;
        std::fill(m_[i].begin(), m_[i].end(), T(0));
        std::fill(v_[i].begin(), v_[i].end(), T(0));
        return;
    }
    throw ContractError("adamw: no parameter named '" + name + "'");
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace tstlab
