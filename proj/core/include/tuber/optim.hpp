#pragma once

#include <cstdint>
#include <vector>

#include "tuber/nn.hpp"

namespace tuber {

struct AdamWConfig {
    double backbone_lr = 1e-5;
    double transformer_lr = 1e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

// Adam with decoupled weight decay over a parameter map. Parameters whose
// name starts with "backbone." form the low-rate group; everything else
// updates at the transformer rate. The map must outlive the optimizer.
template <typename S>
class AdamWT {
public:
    AdamWT(ParamMapT<S>& params, AdamWConfig cfg);

    // One update from the accumulated gradients; parameters that never
    // received a gradient are left untouched.
    void step();
    void zero_grad() { params_->zero_grad(); }

    // Rescales all gradients to a global L2 norm of at most max_norm.
    // Returns the norm before clipping.
    double clip_grad_norm(double max_norm);

    void set_lr_scale(double s) { lr_scale_ = s; }
    double lr_scale() const { return lr_scale_; }
    double transformer_lr() const { return cfg_.transformer_lr * lr_scale_; }
    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }

    // First and second moments, ordered like the parameter map; exposed for
    // checkpointing.
    struct Slot {
        std::vector<S> m, v;
    };
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    ParamMapT<S>* params_;
    AdamWConfig cfg_;
    std::vector<Slot> slots_;
    std::vector<double> rates_;
    double lr_scale_ = 1.0;
    int64_t step_ = 0;
};

using AdamW = AdamWT<float>;

}  // namespace tuber
