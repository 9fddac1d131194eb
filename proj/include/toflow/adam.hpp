#pragma once

#include "toflow/params.hpp"

namespace toflow {

// Bias-corrected ADAM with classic L2-coupled weight decay: the decay term
// is added to the gradient before the moment updates.
template <typename T>
struct AdamState {
    T lr = T(1e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);
    T weight_decay = T(0);
    int64_t step_count = 0;
    std::vector<std::vector<T>> m;  // first moments, parallel to the param set
    std::vector<std::vector<T>> v;  // second moments

    void reset(const ParamSet<T>& params) {
        m.assign(params.size(), {});
        v.assign(params.size(), {});
        for (size_t i = 0; i < params.size(); ++i) {
            m[i].assign(static_cast<size_t>(params.tensor(i).numel()), T(0));
            v[i].assign(static_cast<size_t>(params.tensor(i).numel()), T(0));
        }
        step_count = 0;
    }
};

template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state) {
    if (state.m.size() != params.size()) state.reset(params);
    state.step_count += 1;
    T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step_count));
    T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& t = params.tensor(i);
        auto g = t.grad();
        if (g.size() != static_cast<size_t>(t.numel()))
            throw std::runtime_error("adam_step: parameter '" + params.name(i) + "' has no gradient");
        if (state.m[i].size() != g.size())
            throw ShapeError("adam_step: moment buffer mismatch for '" + params.name(i) + "'");
        auto w = t.mutable_data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < g.size(); ++j) {
            T grad = g[j];
            if (!std::isfinite(grad))
                throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                         params.name(i) + "' at index " + std::to_string(j));
            grad += state.weight_decay * w[j];
            m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * grad;
            v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * grad * grad;
            T mhat = m[j] / bc1;
            T vhat = v[j] / bc2;
            w[j] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace toflow
