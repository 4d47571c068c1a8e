#pragma once

#include <cmath>
#include <functional>

#include "patchcast/tensor.hpp"

namespace patchcast {

// Central finite-difference check of reverse-mode gradients.
//
// f must be a deterministic scalar-valued function of its input (stochastic
// pieces such as dropout need to re-seed their stream on every call).
// Returns max over elements of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps = 1e-5) {
    Tensor probe = x.clone();
    probe.set_requires_grad(true);
    std::vector<double> analytic(probe.size(), 0.0);
    {
        Tape tape;
        Tensor loss = f(probe);
        if (loss.size() != 1) throw ShapeError("grad_check: f must be scalar-valued");
        tape.backward(loss);
        if (probe.has_grad()) {
            auto g = probe.grad();
            analytic.assign(g.begin(), g.end());
        }
    }

    double worst = 0.0;
    Tensor shifted = x.clone();
    auto sv = shifted.data();
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        const double orig = sv[i];
        sv[i] = orig + eps;
        const double fp = f(shifted).item();
        sv[i] = orig - eps;
        const double fm = f(shifted).item();
        sv[i] = orig;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace patchcast
