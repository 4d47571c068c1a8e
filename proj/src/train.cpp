#include "patchcast/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace patchcast {

namespace {

constexpr std::uint64_t kShuffleTag = 0x73687566ULL;
constexpr std::uint64_t kDropoutTag = 0x64726f70ULL;
constexpr std::uint64_t kValMaskTag = 0x766d736bULL;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct Snapshot {
    std::vector<std::vector<double>> params;
    std::vector<std::vector<double>> state;

    static Snapshot capture(Model& model) {
        Snapshot s;
        for (auto& [name, t] : model.named_parameters())
            s.params.emplace_back(t.data().begin(), t.data().end());
        for (auto& [name, vec] : model.named_state()) s.state.push_back(*vec);
        return s;
    }

    void restore(Model& model) const {
        std::size_t i = 0;
        for (auto& [name, t] : model.named_parameters())
            std::copy(params[i].begin(), params[i].end(), t.data().begin()), ++i;
        i = 0;
        for (auto& [name, vec] : model.named_state()) *vec = state[i++];
    }
};

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (learning_rate <= 0) throw ConfigError("train: learning rate must be positive");
    if (mask_ratio < 0 || mask_ratio >= 1) throw ConfigError("train: mask_ratio must be in [0, 1)");
    if (train_fraction < 0 || train_fraction > 1)
        throw ConfigError("train: train_fraction must be in [0, 1]");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
        throw ConfigError("train: Adam betas must be in [0, 1)");
}

Dataset Dataset::make(SeriesTable raw, const SplitSpec& split, std::size_t lookback,
                      std::size_t horizon, bool standardize, double train_fraction) {
    Dataset d;
    d.lookback = lookback;
    d.horizon = horizon;
    d.splits = chrono_split(raw, split, lookback, horizon);
    d.table = std::move(raw);
    if (standardize) {
        d.scaler = Standardizer::fit(d.table, d.splits.train);
        d.scaler.apply(d.table);
        d.standardized = true;
    }
    d.train_starts = window_starts(d.splits.train, lookback, horizon);
    d.val_starts = window_starts(d.splits.val, lookback, horizon);
    d.test_starts = window_starts(d.splits.test, lookback, horizon);
    if (train_fraction < 1.0) {
        const std::size_t n = d.train_starts.size();
        const std::size_t keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))));
        d.train_starts.erase(d.train_starts.begin(), d.train_starts.end() - keep);
    }
    return d;
}

Tensor gather_x(const Dataset& data, std::span<const std::size_t> starts) {
    const std::size_t B = starts.size(), M = data.channels(), L = data.lookback;
    Tensor x = Tensor::zeros({B, M, L});
    double* xp = x.data().data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t t = 0; t < L; ++t)
                xp[(b * M + m) * L + t] = data.table.value(starts[b] + t, m);
    return x;
}

Tensor gather_y(const Dataset& data, std::span<const std::size_t> starts) {
    const std::size_t B = starts.size(), M = data.channels(), T = data.horizon;
    Tensor y = Tensor::zeros({B, M, T});
    double* yp = y.data().data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t t = 0; t < T; ++t)
                yp[(b * M + m) * T + t] = data.table.value(starts[b] + data.lookback + t, m);
    return y;
}

Tensor supervised_loss(const Tensor& pred, const Tensor& target) {
    if (pred.ndim() != 3)
        throw ShapeError("supervised_loss: expected [B, M, T], got " + shape_str(pred.shape()));
    return mse(pred, target);
}

Tensor pretrain_loss(const Tensor& recon, const Tensor& target, const PatchMask& mask,
                     bool all_patches) {
    if (recon.shape() != target.shape() || recon.ndim() != 4)
        throw ShapeError("pretrain_loss: reconstruction " + shape_str(recon.shape()) +
                         " and target " + shape_str(target.shape()) + " must be equal [B, M, P, N]");
    if (all_patches) return mse(recon, target);

    const std::size_t rows = recon.dim(0) * recon.dim(1);
    const std::size_t P = recon.dim(2);
    std::size_t masked_elems = 0;
    for (const auto& r : mask.rows) masked_elems += r.size() * P;
    if (masked_elems == 0) throw TrainError("pretrain_loss: empty mask makes the objective degenerate");

    Tensor indicator = reshape(mask_indicator(mask, P), recon.shape());
    Tensor diff = sub(recon, target);
    Tensor masked_sq = mul(mul(diff, diff), indicator);
    return scale(sum(masked_sq), 1.0 / static_cast<double>(masked_elems));
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params) {
        Slot s;
        s.param = p;
        s.m.assign(p.size(), 0.0);
        s.v.assign(p.size(), 0.0);
        slots_.push_back(std::move(s));
    }
}

void Adam::zero_grad() {
    for (auto& s : slots_) s.param.zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& s : slots_) {
        if (!s.param.has_grad()) continue;
        auto g = s.param.grad();
        auto w = s.param.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

// Normalize a target batch with the stats captured during the forward pass.
Tensor normalize_targets(const Tensor& y, const InstanceStats& stats) {
    Tensor out = y.clone();
    const std::size_t rows = stats.mean.size();
    const std::size_t T = y.dim(2);
    double* p = out.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double scale = stats.std_dev[r] + kInstanceNormEps;
        for (std::size_t t = 0; t < T; ++t) p[r * T + t] = (p[r * T + t] - stats.mean[r]) / scale;
    }
    return out;
}

double eval_supervised(Model& model, const Dataset& data, std::span<const std::size_t> starts,
                       const TrainConfig& cfg) {
    Rng rng(0);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < starts.size(); i += cfg.batch_size) {
        const std::size_t n = std::min(cfg.batch_size, starts.size() - i);
        auto batch = starts.subspan(i, n);
        Tensor x = gather_x(data, batch);
        Tensor y = gather_y(data, batch);
        InstanceStats stats;
        Tensor pred = model.forward_supervised(x, false, rng, !cfg.loss_on_normalized, &stats);
        Tensor target = cfg.loss_on_normalized && model.config().instance_norm
                            ? normalize_targets(y, stats)
                            : y;
        total += supervised_loss(pred, target).item() * static_cast<double>(n);
        count += n;
    }
    return total / static_cast<double>(count);
}

PatchMask build_mask(const Dataset& data, std::span<const std::size_t> starts, std::size_t n_patches,
                     double ratio, std::uint64_t seed, std::uint64_t epoch_tag) {
    const std::size_t M = data.channels();
    PatchMask mask;
    mask.n_patches = n_patches;
    mask.ratio = ratio;
    mask.rows.reserve(starts.size() * M);
    for (std::size_t start : starts)
        for (std::size_t m = 0; m < M; ++m) {
            Rng rng(mix_seed(seed, epoch_tag, start * M + m));
            mask.rows.push_back(sample_mask_row(n_patches, ratio, rng));
        }
    return mask;
}

double eval_pretrain(Model& model, const Dataset& data, std::span<const std::size_t> starts,
                     const TrainConfig& cfg) {
    Rng rng(0);
    const std::size_t n_patches = model.config().n_patches();
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < starts.size(); i += cfg.batch_size) {
        const std::size_t n = std::min(cfg.batch_size, starts.size() - i);
        auto batch = starts.subspan(i, n);
        Tensor x = gather_x(data, batch);
        PatchMask mask = build_mask(data, batch, n_patches, cfg.mask_ratio, cfg.seed, kValMaskTag);
        PretrainOutput out = model.forward_pretrain(x, mask, false, rng);
        total += pretrain_loss(out.reconstruction, out.target, mask, cfg.pretrain_loss_all_patches)
                     .item() *
                 static_cast<double>(n);
        count += n;
    }
    return total / static_cast<double>(count);
}

enum class Objective { Supervised, Pretrain };

TrainReport run_loop(Model& model, const Dataset& data, const TrainConfig& cfg, Objective objective,
                     std::size_t epochs, std::vector<Tensor> trainable, bool model_train_mode) {
    TrainReport report;
    report.seed = cfg.seed;
    const double t0 = now_seconds();

    Adam optimizer(trainable, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    Rng dropout_rng(mix_seed(cfg.seed, kDropoutTag));
    const std::size_t n_patches = model.config().n_patches();

    Snapshot best = Snapshot::capture(model);
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, since_best = 0;

    std::vector<std::size_t> order = data.train_starts;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, kShuffleTag, epoch));
        shuffle_rng.shuffle(order);

        double train_total = 0.0;
        std::size_t seen = 0;
        for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - i);
            auto batch = std::span<const std::size_t>(order).subspan(i, n);
            Tape tape;
            Tensor loss;
            if (objective == Objective::Supervised) {
                Tensor x = gather_x(data, batch);
                Tensor y = gather_y(data, batch);
                InstanceStats stats;
                Tensor pred =
                    model.forward_supervised(x, model_train_mode, dropout_rng,
                                             !cfg.loss_on_normalized, &stats);
                Tensor target = cfg.loss_on_normalized && model.config().instance_norm
                                    ? normalize_targets(y, stats)
                                    : y;
                loss = supervised_loss(pred, target);
            } else {
                Tensor x = gather_x(data, batch);
                PatchMask mask = build_mask(data, batch, n_patches, cfg.mask_ratio, cfg.seed, epoch);
                PretrainOutput out = model.forward_pretrain(x, mask, model_train_mode, dropout_rng);
                loss = pretrain_loss(out.reconstruction, out.target, mask,
                                     cfg.pretrain_loss_all_patches);
            }
            const double lv = loss.item();
            if (!std::isfinite(lv))
                throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(i / cfg.batch_size));
            optimizer.zero_grad();
            tape.backward(loss);
            optimizer.step();
            train_total += lv * static_cast<double>(n);
            seen += n;
        }

        const double train_loss = train_total / static_cast<double>(seen);
        const double val_loss = objective == Objective::Supervised
                                    ? eval_supervised(model, data, data.val_starts, cfg)
                                    : eval_pretrain(model, data, data.val_starts, cfg);
        report.epochs.push_back({epoch, train_loss, val_loss});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best = Snapshot::capture(model);
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            break;
        }
    }

    best.restore(model);
    report.best_epoch = best_epoch;
    report.best_val_loss = best_val;
    report.wall_seconds = now_seconds() - t0;
    return report;
}

}  // namespace

TrainReport train_supervised(Model& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (model.config().head != HeadKind::Forecast)
        throw ConfigError("train: supervised training needs a forecast head");
    if (data.lookback != model.config().lookback || data.horizon != model.config().horizon)
        throw ConfigError("train: dataset windows do not match the model's (L, T)");
    return run_loop(model, data, cfg, Objective::Supervised, cfg.epochs,
                    model.trainable_parameters(), true);
}

TrainReport pretrain(Model& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.mask_ratio <= 0.0)
        throw ConfigError("pretrain: mask ratio 0 makes the reconstruction objective degenerate");
    if (model.config().head != HeadKind::Reconstruct)
        throw ConfigError("pretrain: model needs a reconstruction head");
    if (data.lookback != model.config().lookback)
        throw ConfigError("pretrain: dataset look-back does not match the model");
    return run_loop(model, data, cfg, Objective::Pretrain, cfg.epochs, model.trainable_parameters(),
                    true);
}

TrainReport linear_probe(Model& model, const Dataset& data, const TrainConfig& cfg,
                         std::optional<std::size_t> epochs_override) {
    cfg.validate();
    if (data.lookback != model.config().lookback)
        throw ConfigError("probe: dataset look-back " + std::to_string(data.lookback) +
                          " does not match the pretrained patching (" +
                          std::to_string(model.config().lookback) + "); patch counts would differ");
    model.reset_head(HeadKind::Forecast, data.horizon, cfg.seed);
    const std::size_t epochs = epochs_override.value_or(cfg.probe_epochs);
    if (epochs == 0) {
        TrainReport report;
        report.seed = cfg.seed;
        return report;
    }
    // trunk stays in eval mode: dropout off, BN running stats frozen
    return run_loop(model, data, cfg, Objective::Supervised, epochs,
                    model.trainable_parameters(true), false);
}

TrainReport finetune_lp_then_ft(Model& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    TrainReport lp = linear_probe(model, data, cfg, cfg.lp_epochs);

    TrainReport report;
    report.seed = cfg.seed;
    report.epochs = lp.epochs;
    report.stage_bounds.push_back(cfg.lp_epochs);
    report.stage_bounds.push_back(cfg.lp_epochs + cfg.ft_epochs);

    if (cfg.ft_epochs > 0) {
        TrainReport ft = run_loop(model, data, cfg, Objective::Supervised, cfg.ft_epochs,
                                  model.trainable_parameters(), true);
        for (auto e : ft.epochs) {
            e.epoch += cfg.lp_epochs;
            report.epochs.push_back(e);
        }
        report.best_epoch = cfg.lp_epochs + ft.best_epoch;
        report.best_val_loss = ft.best_val_loss;
        report.wall_seconds = lp.wall_seconds + ft.wall_seconds;
    } else {
        report.best_epoch = lp.best_epoch;
        report.best_val_loss = lp.best_val_loss;
        report.wall_seconds = lp.wall_seconds;
    }
    return report;
}

std::pair<Model, TrainReport> transfer(const Model& source, const Dataset& target, TransferMode mode,
                                       const TrainConfig& cfg) {
    ModelConfig tc = source.config();
    if (target.lookback != tc.lookback)
        throw ConfigError("transfer: target look-back " + std::to_string(target.lookback) +
                          " does not match the source trunk (" + std::to_string(tc.lookback) + ")");
    tc.horizon = target.horizon;
    tc.head = HeadKind::Forecast;
    Model model(tc, cfg.seed);
    model.adopt_trunk(source);

    TrainReport report = mode == TransferMode::Probe ? linear_probe(model, target, cfg)
                                                     : finetune_lp_then_ft(model, target, cfg);
    return {std::move(model), std::move(report)};
}

std::pair<Tensor, Tensor> predict_windows(Model& model, const Dataset& data,
                                          std::span<const std::size_t> starts,
                                          std::size_t batch_size) {
    const std::size_t n = starts.size(), M = data.channels(), T = data.horizon;
    Tensor pred = Tensor::zeros({n, M, T});
    Tensor target = Tensor::zeros({n, M, T});
    Rng rng(0);
    for (std::size_t i = 0; i < n; i += batch_size) {
        const std::size_t b = std::min(batch_size, n - i);
        auto batch = starts.subspan(i, b);
        Tensor p = model.forward_supervised(gather_x(data, batch), false, rng);
        Tensor y = gather_y(data, batch);
        std::copy(p.data().begin(), p.data().end(), pred.data().begin() + i * M * T);
        std::copy(y.data().begin(), y.data().end(), target.data().begin() + i * M * T);
    }
    return {pred, target};
}

void TrainReport::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("report: cannot write '" + path + "'");
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : epochs)
        out << e.epoch << ',' << fmt_double(e.train_loss) << ',' << fmt_double(e.val_loss) << '\n';
    out << "# best_epoch=" << best_epoch << " best_val_loss=" << fmt_double(best_val_loss)
        << " test_mse=" << fmt_double(test_mse) << " test_mae=" << fmt_double(test_mae)
        << " seed=" << seed;
    if (!stage_bounds.empty()) {
        out << " stage_bounds=";
        for (std::size_t i = 0; i < stage_bounds.size(); ++i) {
            if (i) out << '+';
            out << stage_bounds[i];
        }
    }
    out << '\n';
}

}  // namespace patchcast
