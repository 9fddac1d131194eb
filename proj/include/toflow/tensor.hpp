#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace toflow {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream oss;
    oss << '[';
    for (size_t i = 0; i < s.size(); ++i) oss << (i ? "x" : "") << s[i];
    oss << ']';
    return oss.str();
}

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void check(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

// One value in the autodiff graph. Gradients accumulate into `grad`;
// `backprop` pushes this node's gradient into its parents.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Value-semantic handle to a graph node. Tensors are immutable after
// construction except for their gradient buffer.
template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(Shape shape) {
        return filled(std::move(shape), T(0));
    }

    static Tensor filled(Shape shape, T v) {
        auto n = std::make_shared<Node<T>>();
        n->value.assign(static_cast<size_t>(shape_numel(shape)), v);
        n->shape = std::move(shape);
        return Tensor(std::move(n));
    }

    static Tensor from_data(Shape shape, std::vector<T> data) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        return Tensor(std::move(n));
    }

    static Tensor scalar(T v) { return from_data({1}, {v}); }

    // Leaf parameter: participates in backward().
    static Tensor param(Shape shape, std::vector<T> data) {
        Tensor t = from_data(std::move(shape), std::move(data));
        t.node_->requires_grad = true;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const T> data() const { return node_->value; }
    std::span<T> mutable_data() { return node_->value; }
    std::span<const T> grad() const { return node_->grad; }
    T item() const {
        check(numel() == 1, "item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    // Copy of the value with no graph history.
    Tensor detach() const {
        auto n = std::make_shared<Node<T>>();
        n->shape = node_->shape;
        n->value = node_->value;
        return Tensor(std::move(n));
    }

    std::shared_ptr<Node<T>> node() const { return node_; }

    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<Node<T>> node_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

namespace detail {

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

// Build a child node; records parents/backprop only when a parent needs grad.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool rg = false;
    if (grad_mode())
        for (const auto& p : parents) rg = rg || p->requires_grad;
    if (rg) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        Node<T>* raw = n.get();
        n->backprop = [raw, fn = std::move(backprop)]() { fn(*raw); };
    }
    return Tensor<T>(std::move(n));
}

}  // namespace detail

// Scoped guard disabling graph recording (inference / evaluation paths).
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Reverse-mode sweep from a scalar loss. Every reachable tensor with
// requires_grad receives (accumulates) its gradient.
template <typename T>
void backward(const Tensor<T>& loss) {
    check(loss.numel() == 1, "backward() requires a scalar loss, got " + shape_str(loss.shape()));
    auto root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order topological sort over parents.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node<T>* p = n->parents[idx++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        (*it)->ensure_grad();
        if ((*it)->backprop) (*it)->backprop();
    }
}

}  // namespace toflow
