#include "tuber/grad_check.hpp"

#include <cmath>

#include "tuber/errors.hpp"

namespace tuber {

template <typename S>
GradCheckReport grad_check(const std::function<TensorT<S>()>& fn,
                           const std::vector<TensorT<S>>& params, double eps) {
    std::vector<std::vector<double>> analytic(params.size());
    {
        TapeScope<S> scope;
        for (auto p : params) {
            p.set_requires_grad(true);
            p.zero_grad();
        }
        TensorT<S> loss = fn();
        scope.tape().backward_from(loss);
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto g = params[pi].grad();
            analytic[pi].assign(g.size(), 0.0);
            for (size_t i = 0; i < g.size(); ++i) analytic[pi][i] = static_cast<double>(g[i]);
        }
    }

    GradCheckReport report;
    TapeScope<S> scope;
    NoGradGuardT<S> guard;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        TensorT<S> p = params[pi];
        auto v = p.values_mut();
        if (analytic[pi].empty()) analytic[pi].assign(v.size(), 0.0);
        for (size_t i = 0; i < v.size(); ++i) {
            const S saved = v[i];
            v[i] = saved + static_cast<S>(eps);
            const double f_plus = static_cast<double>(fn().item());
            v[i] = saved - static_cast<S>(eps);
            const double f_minus = static_cast<double>(fn().item());
            v[i] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double rel =
                std::fabs(analytic[pi][i] - numeric) / std::max(1.0, std::fabs(numeric));
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.param_index = pi;
                report.element = static_cast<int64_t>(i);
                report.analytic = analytic[pi][i];
                report.numeric = numeric;
            }
        }
    }
    return report;
}

template GradCheckReport grad_check<float>(const std::function<TensorT<float>()>&,
                                           const std::vector<TensorT<float>>&, double);
template GradCheckReport grad_check<double>(const std::function<TensorT<double>()>&,
                                            const std::vector<TensorT<double>>&, double);

}  // namespace tuber
