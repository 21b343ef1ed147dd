#pragma once

#include <functional>
#include <vector>

#include "tuber/tape.hpp"
#include "tuber/tensor.hpp"

namespace tuber {

struct GradCheckReport {
    double max_rel_error = 0.0;
    size_t param_index = 0;   // which tensor held the worst element
    int64_t element = -1;     // flat index of the worst element
    double analytic = 0.0;
    double numeric = 0.0;
};

// Compares tape gradients of the scalar fn() against central finite
// differences, perturbing every element of every tensor in params.
// Error metric per element: |analytic - numeric| / max(1, |numeric|).
// fn must be deterministic under repeated calls (reseed any RNG it uses).
template <typename S>
GradCheckReport grad_check(const std::function<TensorT<S>()>& fn,
                           const std::vector<TensorT<S>>& params,
                           double eps = sizeof(S) == 8 ? 1e-5 : 1e-3);

}  // namespace tuber
