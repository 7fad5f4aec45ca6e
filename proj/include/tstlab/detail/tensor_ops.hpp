#pragma once

#include <cmath>
#include <cstring>

#include "tstlab/detail/rowmath.hpp"
#include "tstlab/kernels.hpp"

// Definitions for the ops declared in tensor.hpp. Header-only because every
// op records a local lambda on the tape, which rules out explicit
// instantiation from a single TU on the compilers we target.

namespace tstlab {

template <class T>
void check_finite(const char* op, std::span<const T> vals) {
    for (size_t i = 0; i < vals.size(); ++i) {
        if (!std::isfinite(vals[i]))
            throw NumericError(std::string(op) + ": non-finite value at index " +
                               std::to_string(i));
    }
}

namespace detail_ops {

template <class T>
bool participating(const Tensor<T>& a) {
    return a.has_grad();
}

template <class T, class... Rest>
bool participating(const Tensor<T>& a, const Rest&... rest) {
    return a.has_grad() || participating(rest...);
}

inline void require(bool ok, const char* op, const std::string& msg) {
    if (!ok) throw ShapeError(std::string(op) + ": " + msg);
}

// C[m,n] += A[m,k] * B[k,n]
template <class T>
void mm_acc_nn(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p)
            kernels::axpy(A[i * k + p], B + p * n, C + i * n, (size_t)n);
}

// C[m,n] += A[m,k] * B[n,k]^T, i.e. C[i,j] += dot(A[i,:], B[j,:])
template <class T>
void mm_acc_nt(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            C[i * n + j] += kernels::dot(A + i * k, B + j * k, (size_t)k);
}

// C[k,n] += A[m,k]^T * B[m,n]
template <class T>
void mm_acc_tn(const T* A, const T* B, T* C, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p)
            kernels::axpy(A[i * k + p], B + i * n, C + p * n, (size_t)n);
}

inline std::vector<int64_t> strides_of(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = (int)s.size() - 1; i >= 0; --i) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

// Calls fn(out_linear, src_linear) for every element, out-linear order.
template <class F>
void permute_walk(const Shape& sshape, const std::vector<int>& perm, F&& fn) {
    int nd = (int)sshape.size();
    auto sstr = strides_of(sshape);
    Shape oshape(nd);
    std::vector<int64_t> ostr_src(nd);  // src stride per output axis
    for (int o = 0; o < nd; ++o) {
        oshape[o] = sshape[perm[o]];
        ostr_src[o] = sstr[perm[o]];
    }
    std::vector<int64_t> idx(nd, 0);
    int64_t total = shape_numel(oshape);
    int64_t src = 0;
    for (int64_t lin = 0; lin < total; ++lin) {
        fn(lin, src);
        for (int ax = nd - 1; ax >= 0; --ax) {
            src += ostr_src[ax];
            if (++idx[ax] < oshape[ax]) break;
            src -= ostr_src[ax] * oshape[ax];
            idx[ax] = 0;
        }
    }
}

}  // namespace detail_ops

template <class T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
    detail_ops::require(a.shape() == b.shape(), "add",
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    bool part = detail_ops::participating(a, b);
    Tensor<T> out = g.make_node(a.shape(), part);
    kernels::add(a.values().data(), b.values().data(), out.values().data(), a.size());
    check_finite<T>("add", out.values());
    if (part) {
        Tensor<T> ca = a, cb = b;
        g.record([a = ca, b = cb, out]() mutable {
            auto go = out.grad();
            if (a.has_grad()) kernels::axpy(T(1), go.data(), a.grad().data(), go.size());
            if (b.has_grad()) kernels::axpy(T(1), go.data(), b.grad().data(), go.size());
        });
    }
    return out;
}

template <class T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
    detail_ops::require(a.shape() == b.shape(), "mul",
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    bool part = detail_ops::participating(a, b);
    Tensor<T> out = g.make_node(a.shape(), part);
    kernels::mul(a.values().data(), b.values().data(), out.values().data(), a.size());
    check_finite<T>("mul", out.values());
    if (part) {
        Tensor<T> ca = a, cb = b;
        g.record([a = ca, b = cb, out]() mutable {
            auto go = out.grad();
            if (a.has_grad())
                kernels::mul_acc(go.data(), b.values().data(), a.grad().data(), go.size());
            if (b.has_grad())
                kernels::mul_acc(go.data(), a.values().data(), b.grad().data(), go.size());
        });
    }
    return out;
}

template <class T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T alpha) {
    bool part = detail_ops::participating(a);
    Tensor<T> out = g.make_node(a.shape(), part);
    kernels::scale(a.values().data(), alpha, out.values().data(), a.size());
    check_finite<T>("scale", out.values());
    if (part) {
        Tensor<T> ca = a;
        g.record([a = ca, out, alpha]() mutable {
            kernels::axpy(alpha, out.grad().data(), a.grad().data(), (size_t)a.size());
        });
    }
    return out;
}

template <class T>
Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
    detail_ops::require(a.ndim() == 2 && b.ndim() == 2, "matmul", "inputs must be rank 2");
    detail_ops::require(a.dim(1) == b.dim(0), "matmul",
                        shape_str(a.shape()) + " x " + shape_str(b.shape()));
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    bool part = detail_ops::participating(a, b);
    Tensor<T> out = g.make_node({m, n}, part);
    detail_ops::mm_acc_nn(a.values().data(), b.values().data(), out.values().data(), m, k, n);
    check_finite<T>("matmul", out.values());
    if (part) {
        Tensor<T> ca = a, cb = b;
        g.record([a = ca, b = cb, out, m, k, n]() mutable {
            const T* go = out.grad().data();
            if (a.has_grad())
                detail_ops::mm_acc_nt(go, b.values().data(), a.grad().data(), m, n, k);
            if (b.has_grad())
                detail_ops::mm_acc_tn(a.values().data(), go, b.grad().data(), m, k, n);
        });
    }
    return out;
}

template <class T>
Tensor<T> bmm(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
    detail_ops::require(a.ndim() == 3 && b.ndim() == 3, "bmm", "inputs must be rank 3");
    detail_ops::require(a.dim(0) == b.dim(0), "bmm", "batch dims differ");
    detail_ops::require(a.dim(2) == b.dim(1), "bmm",
                        shape_str(a.shape()) + " x " + shape_str(b.shape()));
    int64_t nb = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    bool part = detail_ops::participating(a, b);
    Tensor<T> out = g.make_node({nb, m, n}, part);
    for (int64_t s = 0; s < nb; ++s)
        detail_ops::mm_acc_nn(a.values().data() + s * m * k, b.values().data() + s * k * n,
                              out.values().data() + s * m * n, m, k, n);
    check_finite<T>("bmm", out.values());
    if (part) {
        Tensor<T> ca = a, cb = b;
        g.record([a = ca, b = cb, out, nb, m, k, n]() mutable {
            for (int64_t s = 0; s < nb; ++s) {
                const T* go = out.grad().data() + s * m * n;
                if (a.has_grad())
                    detail_ops::mm_acc_nt(go, b.values().data() + s * k * n,
                                          a.grad().data() + s * m * k, m, n, k);
                if (b.has_grad())
                    detail_ops::mm_acc_tn(a.values().data() + s * m * k, go,
                                          b.grad().data() + s * k * n, m, k, n);
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> transpose(Graph<T>& g, const Tensor<T>& a, const std::vector<int>& perm) {
    int nd = a.ndim();
    detail_ops::require((int)perm.size() == nd, "transpose", "perm rank mismatch");
    std::vector<bool> seen(nd, false);
    for (int p : perm) {
        detail_ops::require(p >= 0 && p < nd && !seen[p], "transpose",
                            "perm is not a permutation");
        seen[p] = true;
    }
    Shape oshape(nd);
    for (int o = 0; o < nd; ++o) oshape[o] = a.dim(perm[o]);
    bool part = detail_ops::participating(a);
    Tensor<T> out = g.make_node(oshape, part);
    T* dst = out.values().data();
    const T* src = a.values().data();
    detail_ops::permute_walk(a.shape(), perm, [&](int64_t o, int64_t s) { dst[o] = src[s]; });
    if (part) {
        Shape sshape = a.shape();
        Tensor<T> ca = a;
        g.record([a = ca, out, sshape, perm]() mutable {
            T* ga = a.grad().data();
            const T* go = out.grad().data();
            detail_ops::permute_walk(sshape, perm,
                                     [&](int64_t o, int64_t s) { ga[s] += go[o]; });
        });
    }
    return out;
}

template <class T>
Tensor<T> gather_rows(Graph<T>& g, const Tensor<T>& table, const IntTensor& ids) {
    detail_ops::require(table.ndim() == 2, "gather_rows", "table must be rank 2");
    int64_t v = table.dim(0), d = table.dim(1);
    int64_t n = ids.size();
    for (int64_t i = 0; i < n; ++i)
        if (ids.data[i] < 0 || ids.data[i] >= v)
            throw ContractError("gather_rows: id " + std::to_string(ids.data[i]) +
                                " out of range [0," + std::to_string(v) + ")");
    bool part = detail_ops::participating(table);
    Tensor<T> out = g.make_node({n, d}, part);
    const T* src = table.values().data();
    T* dst = out.values().data();
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(dst + i * d, src + (int64_t)ids.data[i] * d, sizeof(T) * d);
    if (part) {
        std::vector<int32_t> idv(ids.data);
        Tensor<T> ct = table;
        g.record([table = ct, out, idv, d]() mutable {
            T* gt = table.grad().data();
            const T* go = out.grad().data();
            for (size_t i = 0; i < idv.size(); ++i)
                kernels::axpy(T(1), go + (int64_t)i * d, gt + (int64_t)idv[i] * d,
                              (size_t)d);
        });
    }
    return out;
}

template <class T>
Tensor<T> masked_fill(Graph<T>& g, const Tensor<T>& x, const IntTensor& mask, T value) {
    int64_t msize = mask.size();
    detail_ops::require(msize > 0 && x.size() % msize == 0, "masked_fill",
                        "mask size must divide input size");
    int nd = x.ndim(), md = mask.ndim();
    detail_ops::require(md <= nd, "masked_fill", "mask rank exceeds input rank");
    for (int i = 0; i < md; ++i)
        detail_ops::require(mask.dim(md - 1 - i) == x.dim(nd - 1 - i), "masked_fill",
                            "mask must match trailing dims");
    bool part = detail_ops::participating(x);
    Tensor<T> out = g.make_node(x.shape(), part);
    const T* src = x.values().data();
    T* dst = out.values().data();
    const int32_t* mk = mask.data.data();
    int64_t total = x.size();
    for (int64_t i = 0; i < total; ++i) dst[i] = mk[i % msize] ? value : src[i];
    check_finite<T>("masked_fill", out.values());
    if (part) {
        IntTensor mcopy = mask;
        Tensor<T> cx = x;
        g.record([x = cx, out, mcopy, msize]() mutable {
            T* gx = x.grad().data();
            const T* go = out.grad().data();
            const int32_t* m2 = mcopy.data.data();
            int64_t total2 = x.size();
            for (int64_t i = 0; i < total2; ++i)
                if (!m2[i % msize]) gx[i] += go[i];
        });
    }
    return out;
}

template <class T>
SoftmaxOut<T> softmax_logsumexp(Graph<T>& g, const Tensor<T>& z) {
    detail_ops::require(z.ndim() >= 1, "softmax_logsumexp",
                        "input must have at least one axis");
    int64_t v = z.dim(z.ndim() - 1);
    int64_t rows = z.size() / v;
    Shape lshape(z.shape().begin(), z.shape().end() - 1);
    if (lshape.empty()) lshape = {1};
    bool part = detail_ops::participating(z);
    SoftmaxOut<T> out;
    out.probs = g.make_node(z.shape(), part);
    out.lse = g.make_node(lshape, part);
    const T* zs = z.values().data();
    T* ps = out.probs.values().data();
    T* ls = out.lse.values().data();
    for (int64_t r = 0; r < rows; ++r) {
        const T* zr = zs + r * v;
        auto st = detail::row_expsum(zr, v);
        ls[r] = (T)detail::row_lse(st);
        T* pr = ps + r * v;
        for (int64_t i = 0; i < v; ++i)
            pr[i] = (T)(std::exp((double)(zr[i] - st.maxv)) / st.expsum);
    }
    check_finite<T>("softmax_logsumexp", out.probs.values());
    check_finite<T>("softmax_logsumexp", out.lse.values());
    if (part) {
        Tensor<T> probs = out.probs, lse = out.lse, cz = z;
        g.record([z = cz, probs, lse, rows, v]() mutable {
            T* gz = z.grad().data();
            const T* p = probs.values().data();
            const T* gp = probs.grad().data();
            const T* gl = lse.grad().data();
            for (int64_t r = 0; r < rows; ++r) {
                const T* pr = p + r * v;
                const T* gpr = gp + r * v;
                T s = kernels::dot(gpr, pr, (size_t)v);
                T* gzr = gz + r * v;
                for (int64_t i = 0; i < v; ++i)
                    gzr[i] += pr[i] * (gpr[i] - s) + gl[r] * pr[i];
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> rmsnorm(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& w, T eps) {
    detail_ops::require(x.ndim() == 2 && w.ndim() == 1, "rmsnorm", "expects x:[N,d], w:[d]");
    detail_ops::require(x.dim(1) == w.dim(0), "rmsnorm", "feature dims differ");
    int64_t n = x.dim(0), d = x.dim(1);
    bool part = detail_ops::participating(x, w);
    Tensor<T> out = g.make_node(x.shape(), part);
    const T* xs = x.values().data();
    const T* ws = w.values().data();
    T* ys = out.values().data();
    std::vector<T> rinv((size_t)n);
    for (int64_t r = 0; r < n; ++r) {
        const T* xr = xs + r * d;
        double ms = (double)kernels::dot(xr, xr, (size_t)d) / (double)d;
        T rv = (T)(1.0 / std::sqrt(ms + (double)eps));
        rinv[(size_t)r] = rv;
        T* yr = ys + r * d;
        for (int64_t j = 0; j < d; ++j) yr[j] = xr[j] * rv * ws[j];
    }
    check_finite<T>("rmsnorm", out.values());
    if (part) {
        Tensor<T> cx = x, cw = w;
        g.record([x = cx, w = cw, out, rinv, n, d]() mutable {
            const T* xs2 = x.values().data();
            const T* ws2 = w.values().data();
            const T* go = out.grad().data();
            std::vector<T> t((size_t)d);
            for (int64_t r = 0; r < n; ++r) {
                const T* xr = xs2 + r * d;
                const T* gor = go + r * d;
                T rv = rinv[(size_t)r];
                kernels::mul(gor, ws2, t.data(), (size_t)d);
                if (x.has_grad()) {
                    T s = kernels::dot(t.data(), xr, (size_t)d);
                    T c = -(rv * rv * rv) * s / (T)d;
                    T* gx = x.grad().data() + r * d;
                    kernels::axpy(rv, t.data(), gx, (size_t)d);
                    kernels::axpy(c, xr, gx, (size_t)d);
                }
                if (w.has_grad()) {
                    T* gw = w.grad().data();
                    for (int64_t j = 0; j < d; ++j) gw[j] += gor[j] * xr[j] * rv;
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> silu(Graph<T>& g, const Tensor<T>& x) {
    bool part = detail_ops::participating(x);
    Tensor<T> out = g.make_node(x.shape(), part);
    const T* xs = x.values().data();
    T* ys = out.values().data();
    int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) {
        double s = 1.0 / (1.0 + std::exp(-(double)xs[i]));
        ys[i] = (T)((double)xs[i] * s);
    }
    check_finite<T>("silu", out.values());
    if (part) {
        Tensor<T> cx = x;
        g.record([x = cx, out, n]() mutable {
            const T* xs2 = x.values().data();
            const T* go = out.grad().data();
            T* gx = x.grad().data();
            for (int64_t i = 0; i < n; ++i) {
                double s = 1.0 / (1.0 + std::exp(-(double)xs2[i]));
                gx[i] += go[i] * (T)(s * (1.0 + (double)xs2[i] * (1.0 - s)));
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> rope(Graph<T>& g, const Tensor<T>& x, std::span<const int32_t> positions,
               double base) {
    detail_ops::require(x.ndim() == 3, "rope", "expects [rows, len, head_dim]");
    int64_t rows = x.dim(0), len = x.dim(1), hd = x.dim(2);
    detail_ops::require(hd % 2 == 0, "rope", "head_dim must be even");
    detail_ops::require((int64_t)positions.size() == len, "rope",
                        "positions length mismatch");
    int64_t half = hd / 2;
    std::vector<T> cs((size_t)(len * half)), sn((size_t)(len * half));
    for (int64_t j = 0; j < len; ++j) {
        for (int64_t c = 0; c < half; ++c) {
            double angle =
                (double)positions[j] * std::pow(base, -2.0 * (double)c / (double)hd);
            cs[(size_t)(j * half + c)] = (T)std::cos(angle);
            sn[(size_t)(j * half + c)] = (T)std::sin(angle);
        }
    }
    bool part = detail_ops::participating(x);
    Tensor<T> out = g.make_node(x.shape(), part);
    const T* xs = x.values().data();
    T* ys = out.values().data();
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < len; ++j) {
            const T* xr = xs + (r * len + j) * hd;
            T* yr = ys + (r * len + j) * hd;
            for (int64_t c = 0; c < half; ++c) {
                T co = cs[(size_t)(j * half + c)], si = sn[(size_t)(j * half + c)];
                T a = xr[2 * c], b = xr[2 * c + 1];
                yr[2 * c] = a * co - b * si;
                yr[2 * c + 1] = a * si + b * co;
            }
        }
    check_finite<T>("rope", out.values());
    if (part) {
        Tensor<T> cx = x;
        g.record([x = cx, out, cs, sn, rows, len, half]() mutable {
            T* gx = x.grad().data();
            const T* go = out.grad().data();
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < len; ++j) {
                    T* gxr = gx + (r * len + j) * half * 2;
                    const T* gor = go + (r * len + j) * half * 2;
                    for (int64_t c = 0; c < half; ++c) {
                        T co = cs[(size_t)(j * half + c)];
                        T si = sn[(size_t)(j * half + c)];
                        T da = gor[2 * c], db = gor[2 * c + 1];
                        gxr[2 * c] += da * co + db * si;
                        gxr[2 * c + 1] += -da * si + db * co;
                    }
                }
        });
    }
    return out;
}

template <class T>
Tensor<T> sum_all(Graph<T>& g, const Tensor<T>& x) {
    bool part = detail_ops::participating(x);
    Tensor<T> out = g.make_node({1}, part);
    out.values()[0] = kernels::sum(x.values().data(), (size_t)x.size());
    check_finite<T>("sum_all", out.values());
    if (part) {
        Tensor<T> cx = x;
        g.record([x = cx, out]() mutable {
            T go = out.grad()[0];
            T* gx = x.grad().data();
            int64_t n = x.size();
            for (int64_t i = 0; i < n; ++i) gx[i] += go;
        });
    }
    return out;
}

template <class T>
Tensor<T> mean_all(Graph<T>& g, const Tensor<T>& x) {
    Tensor<T> s = sum_all(g, x);
    return scale(g, s, T(1) / (T)x.size());
}

}  // namespace tstlab
