#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tstlab/tensor.hpp"

namespace tstlab {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    int64_t checked = 0;
};

// Central-difference check of d(loss)/d(param) for every element of every
// parameter. make_loss must rebuild the forward pass on a fresh graph each
// call. Denominators are floored so near-zero gradients compare absolutely.
// Parameters are perturbed in place and restored exactly.
template <class T, class MakeLoss>
GradCheckReport grad_check(std::vector<std::pair<std::string, Tensor<T>>>& params,
                           MakeLoss&& make_loss, T eps, double floor = 1e-6) {
    auto value = [&make_loss]() -> double {
        Graph<T> g;
        Tensor<T> loss = make_loss(g);
        return (double)loss.item();
    };

    std::vector<std::vector<double>> analytic(params.size());
    {
        for (auto& pr : params) {
            auto gr = pr.second.grad();
            std::fill(gr.begin(), gr.end(), (T)0);
        }
        Graph<T> g;
        Tensor<T> loss = make_loss(g);
        g.backward(loss);
        for (size_t p = 0; p < params.size(); ++p) {
            auto gr = params[p].second.grad();
            analytic[p].assign(gr.begin(), gr.end());
        }
    }

    GradCheckReport rep;
    for (size_t p = 0; p < params.size(); ++p) {
        auto vals = params[p].second.values();
        for (size_t i = 0; i < vals.size(); ++i) {
            T keep = vals[i];
            vals[i] = keep + eps;
            double f1 = value();
            vals[i] = keep - eps;
            double f2 = value();
            vals[i] = keep;
            double fd = (f1 - f2) / (2.0 * (double)eps);
            double a = analytic[p][i];
            double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), floor});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = params[p].first;
                rep.worst_index = (int64_t)i;
            }
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace tstlab
