#include "patchcast/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace patchcast {

Metrics metric_mse_mae(const Tensor& pred, const Tensor& target, bool per_horizon) {
    if (pred.shape() != target.shape() || pred.ndim() != 3)
        throw ShapeError("metrics: predictions " + shape_str(pred.shape()) + " and targets " +
                         shape_str(target.shape()) + " must be equal [n, M, T]");
    const std::size_t rows = pred.dim(0) * pred.dim(1);
    const std::size_t T = pred.dim(2);
    const double* p = pred.data().data();
    const double* t = target.data().data();

    Metrics m;
    std::vector<double> h_sq(per_horizon ? T : 0, 0.0), h_abs(per_horizon ? T : 0, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < T; ++i) {
            const double d = p[r * T + i] - t[r * T + i];
            m.mse += d * d;
            m.mae += std::abs(d);
            if (per_horizon) {
                h_sq[i] += d * d;
                h_abs[i] += std::abs(d);
            }
        }
    const double n = static_cast<double>(rows * T);
    m.mse /= n;
    m.mae /= n;
    if (per_horizon) {
        m.per_horizon_mse.resize(T);
        m.per_horizon_mae.resize(T);
        for (std::size_t i = 0; i < T; ++i) {
            m.per_horizon_mse[i] = h_sq[i] / static_cast<double>(rows);
            m.per_horizon_mae[i] = h_abs[i] / static_cast<double>(rows);
        }
    }
    return m;
}

Metrics repeat_last_baseline(const Dataset& data, std::span<const std::size_t> starts,
                             bool per_horizon) {
    const std::size_t n = starts.size(), M = data.channels(), T = data.horizon;
    Tensor pred = Tensor::zeros({n, M, T});
    Tensor target = gather_y(data, starts);
    double* pp = pred.data().data();
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t m = 0; m < M; ++m) {
            const double last = data.table.value(starts[b] + data.lookback - 1, m);
            for (std::size_t t = 0; t < T; ++t) pp[(b * M + m) * T + t] = last;
        }
    return metric_mse_mae(pred, target, per_horizon);
}

OlsBaseline OlsBaseline::fit(const Dataset& data) {
    using Mat = Eigen::MatrixXd;
    const std::size_t L = data.lookback, T = data.horizon, M = data.channels();
    const auto& starts = data.train_starts;
    const std::size_t n = starts.size();

    OlsBaseline ols;
    ols.lookback = L;
    ols.horizon = T;
    ols.coef.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        Mat A(n, L + 1);
        Mat Y(n, T);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < L; ++l) A(i, l) = data.table.value(starts[i] + l, m);
            A(i, L) = 1.0;
            for (std::size_t t = 0; t < T; ++t) Y(i, t) = data.table.value(starts[i] + L + t, m);
        }
        Mat W = A.colPivHouseholderQr().solve(Y);  // [(L+1) x T]
        ols.coef[m].assign(W.data(), W.data() + W.size());
        // Eigen stores column-major; keep row-major for evaluation
        std::vector<double>& c = ols.coef[m];
        std::vector<double> rm(c.size());
        for (std::size_t l = 0; l <= L; ++l)
            for (std::size_t t = 0; t < T; ++t) rm[l * T + t] = W(l, t);
        c = std::move(rm);
    }
    return ols;
}

Metrics OlsBaseline::evaluate(const Dataset& data, std::span<const std::size_t> starts,
                              bool per_horizon) const {
    const std::size_t n = starts.size(), M = data.channels(), L = lookback, T = horizon;
    Tensor pred = Tensor::zeros({n, M, T});
    Tensor target = gather_y(data, starts);
    double* pp = pred.data().data();
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t m = 0; m < M; ++m) {
            const std::vector<double>& c = coef[m];
            for (std::size_t t = 0; t < T; ++t) {
                double acc = c[L * T + t];  // intercept
                for (std::size_t l = 0; l < L; ++l)
                    acc += c[l * T + t] * data.table.value(starts[b] + l, m);
                pp[(b * M + m) * T + t] = acc;
            }
        }
    return metric_mse_mae(pred, target, per_horizon);
}

}  // namespace patchcast
