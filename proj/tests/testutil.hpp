#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "tstlab/data.hpp"

namespace testutil {

// Copy any contiguous range (usually a tensor's value span) into a vector.
template <class R>
auto to_vec(R&& r) {
    using T = std::remove_cvref_t<decltype(*std::begin(r))>;
    return std::vector<T>(std::begin(r), std::end(r));
}

// Self-deleting scratch directory under the system temp root.
class TmpDir {
public:
    explicit TmpDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string((uintptr_t)this) + "-" + std::to_string(rand()));
        std::filesystem::create_directories(path_);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TmpDir(const TmpDir&) = delete;
    TmpDir& operator=(const TmpDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Exact MI(x_t; x_{t+d}) for d = 1..max_distance of the synthetic chain, by
// enumeration: stationary distribution pi over the V^order context states via
// power iteration, then the (token at t, state at t+d) joint pushed through
// the transition matrix d times. Feasible for small V^order only.
inline std::vector<double> markov_mi_oracle(const tstlab::MarkovChain& chain,
                                            int64_t max_distance) {
    const int64_t S = chain.states();
    const int32_t V = chain.vocab();
    const std::vector<double>& rows = chain.rows();

    // state s = base-V context, next state s' = (s*V + y) mod S
    auto step = [&](const std::vector<double>& in, std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (int64_t s = 0; s < S; ++s) {
            if (in[(size_t)s] == 0.0) continue;
            const double* row = rows.data() + s * V;
            int64_t base = (s * V) % S;
            for (int32_t y = 0; y < V; ++y) out[(size_t)(base + y)] += in[(size_t)s] * row[y];
        }
    };

    std::vector<double> pi(S, 1.0 / (double)S), nxt(S);
    for (int it = 0; it < 4096; ++it) {
        step(pi, nxt);
        double delta = 0.0;
        for (int64_t s = 0; s < S; ++s) delta += std::fabs(nxt[(size_t)s] - pi[(size_t)s]);
        pi.swap(nxt);
        if (delta < 1e-14) break;
    }

    // One distribution over states per value of the anchor token x_t.
    std::vector<std::vector<double>> cond((size_t)V, std::vector<double>(S, 0.0));
    for (int64_t s = 0; s < S; ++s) cond[(size_t)(s % V)][(size_t)s] = pi[(size_t)s];

    std::vector<double> marg((size_t)V, 0.0);
    for (int32_t a = 0; a < V; ++a)
        for (int64_t s = 0; s < S; ++s) marg[(size_t)a] += cond[(size_t)a][(size_t)s];

    std::vector<double> out;
    std::vector<double> tmp(S);
    for (int64_t d = 1; d <= max_distance; ++d) {
        double mi = 0.0;
        for (int32_t a = 0; a < V; ++a) {
            step(cond[(size_t)a], tmp);
            cond[(size_t)a].swap(tmp);
            std::vector<double> joint((size_t)V, 0.0);
            for (int64_t s = 0; s < S; ++s) joint[(size_t)(s % V)] += cond[(size_t)a][(size_t)s];
            for (int32_t b = 0; b < V; ++b) {
                double q = joint[(size_t)b];
                if (q <= 0.0) continue;
                mi += q * std::log(q / (marg[(size_t)a] * marg[(size_t)b]));
            }
        }
        out.push_back(mi);
    }
    return out;
}

}  // namespace testutil
