#pragma once

#include <span>
#include <vector>

#include "patchcast/train.hpp"

namespace patchcast {

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::vector<double> per_horizon_mse;  // filled on request
    std::vector<double> per_horizon_mae;
};

// Element-wise means over all n*M*T entries of [n, M, T] arrays.
Metrics metric_mse_mae(const Tensor& pred, const Tensor& target, bool per_horizon = false);

// Repeat-last: every horizon step predicts the final look-back value.
Metrics repeat_last_baseline(const Dataset& data, std::span<const std::size_t> starts,
                             bool per_horizon = false);

// Channel-wise ordinary least squares from the L look-back values (plus
// intercept) to the T horizon values, fitted on train windows.
struct OlsBaseline {
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::vector<std::vector<double>> coef;  // per channel, [(L+1) x T] row-major

    static OlsBaseline fit(const Dataset& data);
    Metrics evaluate(const Dataset& data, std::span<const std::size_t> starts,
                     bool per_horizon = false) const;
};

}  // namespace patchcast
