#include "refvid/param.hpp"

#include <cmath>

#include "refvid/error.hpp"

namespace refvid {

ParamPtr make_weight(const std::string& name, std::vector<int> shape, int fan_in, Rng& rng) {
    if (fan_in <= 0) throw ArgumentError("fan_in must be positive for " + name);
    Tensor t(std::move(shape));
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& x : t.v) x = rng.uniform(-bound, bound);
    quantize(t);
    return std::make_shared<Param>(name, std::move(t));
}

ParamPtr make_bias(const std::string& name, int n) {
    return std::make_shared<Param>(name, Tensor::zeros({n}));
}

ParamPtr ParamStore::find(const std::string& name) const {
    for (const auto& p : items)
        if (p->name == name) return p;
    return nullptr;
}

Tensor& OptimState::velocity_for(Param& p) {
    auto it = velocity.find(&p);
    if (it == velocity.end()) it = velocity.emplace(&p, Tensor::zeros(p.value.shape)).first;
    if (it->second.shape != p.value.shape)
        throw StateError("velocity shape " + shape_str(it->second.shape) +
                         " does not match param " + p.name + " " + shape_str(p.value.shape));
    return it->second;
}

void sgd_update(const std::vector<ParamPtr>& params, OptimState& state) {
    if (state.learning_rate <= 0.0) throw StateError("learning rate must be positive");
    if (state.momentum < 0.0 || state.momentum >= 1.0) throw StateError("momentum must be in [0,1)");
    if (state.weight_decay < 0.0) throw StateError("weight decay must be nonnegative");

    for (const auto& p : params) {
        if (!p->trainable) continue;
        if (p->grad.shape != p->value.shape)
            throw StateError("missing or misshapen grad for param " + p->name);
        Tensor& vel = state.velocity_for(*p);
        const int64_t n = p->value.numel();
        for (int64_t i = 0; i < n; ++i) {
            vel[i] = state.momentum * vel[i] + p->grad[i] + state.weight_decay * p->value[i];
            p->value[i] -= state.learning_rate * vel[i];
        }
        quantize(vel);
        quantize(p->value);
    }
}

} // namespace refvid
