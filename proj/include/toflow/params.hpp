#pragma once

#include <map>

#include "toflow/tensor.hpp"

namespace toflow {

// Ordered collection of named trainable tensors. Names are unique and the
// iteration order is insertion order (checkpoints and the optimizer both
// rely on a stable order).
template <typename T>
class ParamSet {
public:
    Tensor<T> add(const std::string& name, Tensor<T> t) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        t.set_requires_grad(true);
        index_[name] = names_.size();
        names_.push_back(name);
        tensors_.push_back(t);
        return t;
    }

    void merge(const ParamSet& other, const std::string& prefix) {
        for (size_t i = 0; i < other.size(); ++i) {
            if (index_.count(prefix + other.names_[i]))
                throw ConfigError("duplicate parameter name: " + prefix + other.names_[i]);
            index_[prefix + other.names_[i]] = names_.size();
            names_.push_back(prefix + other.names_[i]);
            tensors_.push_back(other.tensors_[i]);
        }
    }

    size_t size() const { return tensors_.size(); }
    const std::string& name(size_t i) const { return names_[i]; }
    Tensor<T>& tensor(size_t i) { return tensors_[i]; }
    const Tensor<T>& tensor(size_t i) const { return tensors_[i]; }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    Tensor<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return tensors_[it->second];
    }

    void zero_grad() {
        for (auto& t : tensors_) t.zero_grad();
    }

    int64_t total_elems() const {
        int64_t n = 0;
        for (const auto& t : tensors_) n += t.numel();
        return n;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor<T>> tensors_;
    std::map<std::string, size_t> index_;
};

// He-style normal initialization for conv weights, deterministic per rng.
template <typename T>
Tensor<T> init_conv_weight(int cout, int cin, int kh, int kw, std::mt19937& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (cin * kh * kw)));
    std::vector<T> data(static_cast<size_t>(cout) * cin * kh * kw);
    for (auto& v : data) v = static_cast<T>(dist(rng));
    return Tensor<T>::from_data({cout, cin, kh, kw}, std::move(data));
}

}  // namespace toflow
