#include "tuber/optim.hpp"

#include <cmath>
#include <string_view>

#include "tuber/errors.hpp"

namespace tuber {

template <typename S>
AdamWT<S>::AdamWT(ParamMapT<S>& params, AdamWConfig cfg) : params_(&params), cfg_(cfg) {
    if (cfg.backbone_lr < 0 || cfg.transformer_lr < 0 || cfg.weight_decay < 0)
        throw ConfigError("optimizer rates must be non-negative");
    if (cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1)
        throw ConfigError("optimizer betas must lie in [0, 1)");
    if (cfg.eps <= 0) throw ConfigError("optimizer eps must be positive");
    for (const auto& [name, t] : params.items()) {
        slots_.push_back({std::vector<S>(static_cast<size_t>(t.numel()), S(0)),
                          std::vector<S>(static_cast<size_t>(t.numel()), S(0))});
        const bool backbone = std::string_view(name).starts_with("backbone.");
        rates_.push_back(backbone ? cfg.backbone_lr : cfg.transformer_lr);
    }
}

template <typename S>
double AdamWT<S>::clip_grad_norm(double max_norm) {
    double sq = 0;
    for (const auto& [name, t] : params_->items()) {
        if (!t.has_grad()) continue;
        for (S g : t.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
        const S scale = static_cast<S>(max_norm / norm);
        for (const auto& [name, t] : params_->items()) {
            if (!t.has_grad()) continue;
            TensorT<S> shared = t;  // copies share the buffer
            for (S& g : shared.grad_mut()) g *= scale;
        }
    }
    return norm;
}

template <typename S>
void AdamWT<S>::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < params_->items().size(); ++i) {
        TensorT<S> t = params_->items()[i].second;  // copies share the buffer
        if (!t.has_grad()) continue;
        const double lr = rates_[i] * lr_scale_;
        const auto grads = t.grad();
        auto vals = t.values_mut();
        auto& slot = slots_[i];
        for (size_t k = 0; k < vals.size(); ++k) {
            const double g = static_cast<double>(grads[k]);
            const double m = cfg_.beta1 * static_cast<double>(slot.m[k]) + (1 - cfg_.beta1) * g;
            const double v =
                cfg_.beta2 * static_cast<double>(slot.v[k]) + (1 - cfg_.beta2) * g * g;
            slot.m[k] = static_cast<S>(m);
            slot.v[k] = static_cast<S>(v);
            const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
            const double p = static_cast<double>(vals[k]);
            vals[k] = static_cast<S>(p - lr * (update + cfg_.weight_decay * p));
        }
    }
}

template class AdamWT<float>;
template class AdamWT<double>;

}  // namespace tuber
