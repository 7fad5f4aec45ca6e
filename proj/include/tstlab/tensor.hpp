#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tstlab/common.hpp"
#include "tstlab/rng.hpp"

// Dense row-major tensors plus a tape-based reverse-mode graph. Ops are free
// functions that take the graph; each one materializes its output, checks it
// for non-finite values, and records a backward closure when any input
// participates in differentiation. Gradients accumulate (+=) into whatever
// buffers already hold, so one buffer can receive contributions from several
// consumers; callers zero parameter grads between steps.
//
// reshaped() aliases storage (values and grad both), so it never needs a
// graph node. Everything else copies.

namespace tstlab {

template <class T>
struct TensorImpl {
    Shape shape;
    std::shared_ptr<std::vector<T>> values;
    std::shared_ptr<std::vector<T>> grad;  // null until the tensor participates
};

template <class T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, bool with_grad = false) {
        impl_ = std::make_shared<TensorImpl<T>>();
        impl_->shape = std::move(shape);
        impl_->values = std::make_shared<std::vector<T>>(shape_numel(impl_->shape), T(0));
        if (with_grad) ensure_grad();
    }

    Tensor(Shape shape, std::vector<T> values, bool with_grad = false) {
        if ((int64_t)values.size() != shape_numel(shape))
            throw ShapeError("Tensor: value count does not match shape " + shape_str(shape));
        impl_ = std::make_shared<TensorImpl<T>>();
        impl_->shape = std::move(shape);
        impl_->values = std::make_shared<std::vector<T>>(std::move(values));
        if (with_grad) ensure_grad();
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    static Tensor full(Shape shape, T value, bool with_grad = false) {
        Tensor t(std::move(shape), with_grad);
        for (auto& v : *t.impl_->values) v = value;
        return t;
    }

    static Tensor randn(Shape shape, Rng& rng, T stddev, bool with_grad = false) {
        Tensor t(std::move(shape), with_grad);
        for (auto& v : *t.impl_->values) v = (T)(rng.normal() * (double)stddev);
        return t;
    }

    bool defined() const { return (bool)impl_; }
    const Shape& shape() const { return impl_->shape; }
    int ndim() const { return (int)impl_->shape.size(); }
    int64_t dim(int i) const { return impl_->shape.at(i); }
    int64_t size() const { return (int64_t)impl_->values->size(); }

    bool has_grad() const { return impl_ && impl_->grad != nullptr; }

    void ensure_grad() {
        if (!impl_->grad) impl_->grad = std::make_shared<std::vector<T>>(size(), T(0));
    }

    void zero_grad() {
        if (has_grad())
            for (auto& v : *impl_->grad) v = T(0);
    }

    std::span<T> values() { return {impl_->values->data(), impl_->values->size()}; }
    std::span<const T> values() const { return {impl_->values->data(), impl_->values->size()}; }

    std::span<T> grad() {
        if (!has_grad()) throw ContractError("grad() on tensor without grad buffer");
        return {impl_->grad->data(), impl_->grad->size()};
    }
    std::span<const T> grad() const {
        if (!has_grad()) throw ContractError("grad() on tensor without grad buffer");
        return {impl_->grad->data(), impl_->grad->size()};
    }

    T item() const {
        if (size() != 1) throw ContractError("item() on tensor of size " + std::to_string(size()));
        return (*impl_->values)[0];
    }

    // Same storage, new shape. Gradients flow through with no tape entry.
    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != size())
            throw ShapeError("reshape " + shape_str(impl_->shape) + " -> " + shape_str(shape));
        Tensor t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(shape);
        t.impl_->values = impl_->values;
        t.impl_->grad = impl_->grad;
        return t;
    }

private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

template <class T>
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Output tensor for an op; allocates a grad buffer when the op's inputs
    // participate so the backward closure has somewhere to read from.
    Tensor<T> make_node(Shape shape, bool participating) {
        Tensor<T> t(std::move(shape), participating);
        ++nodes_;
        return t;
    }

    void record(std::function<void()> backward_fn) { tape_.push_back(std::move(backward_fn)); }

    // Seeds root grad with 1 and runs the tape newest-first, once.
    void backward(const Tensor<T>& root) {
        if (consumed_) throw ContractError("backward() called twice on one graph");
        if (root.size() != 1) throw ContractError("backward root must be a scalar");
        if (!root.has_grad()) throw ContractError("backward root does not participate");
        consumed_ = true;
        const_cast<Tensor<T>&>(root).grad()[0] = T(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

    size_t node_count() const { return nodes_; }
    size_t tape_size() const { return tape_.size(); }

    void reset() {
        tape_.clear();
        nodes_ = 0;
        consumed_ = false;
    }

private:
    std::vector<std::function<void()>> tape_;
    size_t nodes_ = 0;
    bool consumed_ = false;
};

// Throws NumericError naming the op if any element is NaN or +-inf.
template <class T>
void check_finite(const char* op, std::span<const T> vals);  // defined in detail/tensor_ops.hpp

template <class T>
struct SoftmaxOut {
    Tensor<T> probs;  // same shape as input
    Tensor<T> lse;    // input shape minus the last axis
};

template <class T> Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T alpha);

// a:[m,k] b:[k,n] -> [m,n]
template <class T> Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);
// a:[B,m,k] b:[B,k,n] -> [B,m,n]
template <class T> Tensor<T> bmm(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

// Materialized axis permutation; perm is the source axis for each output axis.
template <class T>
Tensor<T> transpose(Graph<T>& g, const Tensor<T>& a, const std::vector<int>& perm);

// table:[V,d], ids flatten to N -> [N,d]. Out-of-range ids are rejected.
template <class T>
Tensor<T> gather_rows(Graph<T>& g, const Tensor<T>& table, const IntTensor& ids);

// mask shape must equal the trailing dims of x; nonzero entries are replaced
// by `value` and pass no gradient.
template <class T>
Tensor<T> masked_fill(Graph<T>& g, const Tensor<T>& x, const IntTensor& mask, T value);

// Softmax over the last axis, plus the logsumexp it was normalized with.
// Max-subtracted, so masked logits of -1e9 underflow to exactly zero mass.
template <class T> SoftmaxOut<T> softmax_logsumexp(Graph<T>& g, const Tensor<T>& z);

// x:[N,d] scaled by rsqrt(mean(x^2)+eps), then elementwise by w:[d].
template <class T>
Tensor<T> rmsnorm(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& w, T eps);

template <class T> Tensor<T> silu(Graph<T>& g, const Tensor<T>& x);

// Rotary position encoding on adjacent channel pairs. x:[R,l,hd] with hd
// even; positions has length l; angles are pos * base^(-2c/hd) in double.
template <class T>
Tensor<T> rope(Graph<T>& g, const Tensor<T>& x, std::span<const int32_t> positions,
               double base);

template <class T> Tensor<T> sum_all(Graph<T>& g, const Tensor<T>& x);
template <class T> Tensor<T> mean_all(Graph<T>& g, const Tensor<T>& x);

}  // namespace tstlab

#include "tstlab/detail/tensor_ops.hpp"
