#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "refvid/rng.hpp"
#include "refvid/tensor.hpp"

namespace refvid {

/// A learnable tensor with an accumulated gradient.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

    void zero_grad() { grad.fill(0.0); }
};

using ParamPtr = std::shared_ptr<Param>;

/// Weight init: uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)).
ParamPtr make_weight(const std::string& name, std::vector<int> shape, int fan_in, Rng& rng);

/// Bias init: zeros.
ParamPtr make_bias(const std::string& name, int n);

/// Flat list of every parameter of a model component, in creation order.
struct ParamStore {
    std::vector<ParamPtr> items;

    ParamPtr add(ParamPtr p) {
        items.push_back(p);
        return p;
    }
    void absorb(const ParamStore& other) {
        items.insert(items.end(), other.items.begin(), other.items.end());
    }
    void zero_grads() {
        for (auto& p : items) p->zero_grad();
    }
    ParamPtr find(const std::string& name) const;
};

/// SGD with momentum and weight decay:
///   v <- momentum*v + grad + weight_decay*value;  value <- value - lr*v
struct OptimState {
    double learning_rate = 1e-3;
    double momentum = 0.95;
    double weight_decay = 5e-4;
    std::unordered_map<Param*, Tensor> velocity;

    Tensor& velocity_for(Param& p);
};

void sgd_update(const std::vector<ParamPtr>& params, OptimState& state);

} // namespace refvid
