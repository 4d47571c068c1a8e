// Acceptance suite: one line per criterion, nonzero exit when a required
// criterion fails. Criterion 14 needs the real ETTh1 CSV; when the file is
// absent (or it misses its target) the line downgrades to a warning.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "patchcast/experiments.hpp"
#include "patchcast/gradcheck.hpp"

using namespace patchcast;

namespace {

struct Outcome {
    bool pass = false;
    bool warn_only = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1
Outcome patch_count_formula() {
    PatchConfig cfg{16, 8, PatchMode::PaddedOverlap};
    const std::size_t n42 = cfg.patch_count(336);
    const std::size_t n64 = cfg.patch_count(512);
    return {n42 == 42 && n64 == 64, false,
            "N(336,16,8)=" + std::to_string(n42) + ", N(512,16,8)=" + std::to_string(n64)};
}

// ---------------------------------------------------------------- criterion 2
Outcome ssl_patch_count() {
    PatchConfig cfg{12, 12, PatchMode::NonOverlapTruncate};
    const std::size_t n = cfg.patch_count(512);
    return {n == 42, false, "N(512,12 nonoverlap)=" + std::to_string(n)};
}

// ---------------------------------------------------------------- criterion 3
Outcome gradient_suite() {
    Rng rng(2001);
    double worst_op = 0.0;
    auto check = [&](std::function<Tensor(const Tensor&)> f, const Tensor& x) {
        worst_op = std::max(worst_op, grad_check(f, x, 1e-5));
    };

    Tensor a = Tensor::uniform({3, 4}, -2, 2, rng);
    Tensor b = Tensor::uniform({3, 4}, -2, 2, rng);
    Tensor w = Tensor::uniform({4, 3}, -2, 2, rng);
    Tensor bias = Tensor::uniform({4}, -1, 1, rng);
    Tensor batch = Tensor::uniform({2, 4, 3}, -2, 2, rng);

    check([&](const Tensor& x) { return sum(mul(add(x, b), b)); }, a);
    check([&](const Tensor& x) { return sum(mul(sub(x, b), b)); }, a);
    check([&](const Tensor& x) { return sum(mul(x, add(b, bias))); }, a);
    check([&](const Tensor& x) { return sum(scale(mul(x, x), 0.7)); }, a);
    Tensor w2 = Tensor::uniform({3, 4}, -2, 2, rng);
    check([&](const Tensor& x) { return sum(mul(matmul(x, w), matmul(b, w))); }, a);
    check([&](const Tensor& x) { return sum(mul(matmul(batch, x), matmul(batch, x))); }, w2);
    check([&](const Tensor& x) { return sum(mul(transpose_last2(x), transpose_last2(b))); }, a);
    check([&](const Tensor& x) { return sum(mul(reshape(x, {12}), reshape(b, {12}))); }, a);
    check([&](const Tensor& x) { return sum(mul(concat_lastdim({x, x}), concat_lastdim({b, x}))); }, a);
    check([&](const Tensor& x) { return sum(mul(softmax_lastdim(x), b)); }, a);
    check([&](const Tensor& x) { return sum(gelu(x)); }, a);
    check([&](const Tensor& x) { return mse(x, b); }, a);
    check([&](const Tensor& x) { return mean(mul(x, x)); }, a);
    check([&](const Tensor& x) {
        Rng fixed(7);
        return sum(dropout(x, 0.3, fixed, true));
    }, a);
    {
        Tensor gamma = Tensor::uniform({3}, 0.5, 1.5, rng);
        Tensor beta = Tensor::uniform({3}, -1, 1, rng);
        Tensor target = Tensor::uniform({2, 3, 4}, -1, 1, rng);
        Tensor x0 = Tensor::uniform({2, 3, 4}, -2, 2, rng);
        check([&](const Tensor& x) {
            std::vector<double> m(3, 0.0), v(3, 1.0);
            return mse(batchnorm(x, gamma, beta, m, v, 0.1, 1e-5, true), target);
        }, x0);
    }
    if (worst_op >= 1e-6)
        return {false, false, "op gradient error " + fmt(worst_op) + " >= 1e-6"};

    // full toy model: every parameter against central differences
    ModelConfig mc;
    mc.lookback = 16;
    mc.horizon = 8;
    mc.patch_len = 4;
    mc.stride = 4;
    mc.d_model = 8;
    mc.heads = 2;
    mc.ffn_dim = 16;
    mc.layers = 1;
    mc.dropout = 0.0;
    Model model(mc, 41);
    // larger weight scale keeps attention off the softmax plateau, where the
    // true q/k gradients sink below finite-difference resolution
    for (auto& [name, t] : model.named_parameters())
        for (double& v : t.data()) v = rng.uniform(-0.4, 0.4);

    Tensor x = Tensor::uniform({2, 2, mc.lookback}, -1.5, 1.5, rng);
    Tensor target = Tensor::uniform({2, 2, mc.horizon}, -1, 1, rng);
    auto loss_fn = [&]() {
        Rng fwd(0);
        return mse(model.forward_supervised(x, true, fwd), target);
    };

    std::map<std::string, std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = loss_fn();
        tape.backward(loss);
        for (auto& [name, t] : model.named_parameters()) {
            if (t.has_grad())
                analytic[name].assign(t.grad().begin(), t.grad().end());
            else
                analytic[name].assign(t.size(), 0.0);
        }
    }
    double worst_model = 0.0;
    const double eps = 1e-5;
    for (auto& [name, t] : model.named_parameters()) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t.data()[i];
            t.data()[i] = orig + eps;
            const double fp = loss_fn().item();
            t.data()[i] = orig - eps;
            const double fm = loss_fn().item();
            t.data()[i] = orig;
            const double numeric = (fp - fm) / (2 * eps);
            const double av = analytic[name][i];
            if (std::abs(av - numeric) <= 1e-9) continue;  // below FD resolution
            worst_model = std::max(worst_model, std::abs(av - numeric) /
                                                    std::max(1e-8, std::abs(av) + std::abs(numeric)));
        }
        t.zero_grad();
    }
    return {worst_model < 1e-4, false,
            "op err " + fmt(worst_op) + " (<1e-6), model err " + fmt(worst_model) + " (<1e-4)"};
}

// ---------------------------------------------------------------- criterion 4
Outcome channel_independence() {
    ModelConfig mc;
    mc.lookback = 32;
    mc.horizon = 8;
    mc.patch_len = 8;
    mc.stride = 4;
    mc.d_model = 16;
    mc.heads = 4;
    mc.ffn_dim = 32;
    mc.layers = 2;
    mc.dropout = 0.2;  // eval mode, so inert
    Model model(mc, 909);
    Rng rng(11);
    const std::size_t M = 5;
    Tensor x = Tensor::uniform({1, M, mc.lookback}, -2, 2, rng);
    Rng f0(0);
    Tensor base = model.forward_supervised(x, false, f0);

    const std::size_t perm[5] = {3, 0, 4, 2, 1};
    Tensor xp = Tensor::zeros({1, M, mc.lookback});
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < mc.lookback; ++t) xp.at({0, m, t}) = x.at({0, perm[m], t});
    Rng f1(0);
    Tensor permuted = model.forward_supervised(xp, false, f1);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < mc.horizon; ++t)
            if (permuted.at({0, m, t}) != base.at({0, perm[m], t}))
                return {false, false, "permutation equivariance violated at channel " + std::to_string(m)};

    Tensor xq = x.clone();
    for (std::size_t t = 0; t < mc.lookback; ++t) xq.at({0, 1, t}) = -xq.at({0, 1, t}) + 0.75;
    Rng f2(0);
    Tensor perturbed = model.forward_supervised(xq, false, f2);
    for (std::size_t m = 0; m < M; ++m) {
        if (m == 1) continue;
        for (std::size_t t = 0; t < mc.horizon; ++t)
            if (perturbed.at({0, m, t}) != base.at({0, m, t}))
                return {false, false, "channel isolation violated at channel " + std::to_string(m)};
    }
    return {true, false, "permutation equivariance and isolation hold bitwise"};
}

// ---------------------------------------------------------------- criterion 5
Outcome instance_norm_contract() {
    Rng rng(17);
    const std::size_t M = 6, L = 200;
    std::vector<double> x(M * L), orig;
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < L; ++t)
            x[m * L + t] = rng.uniform(-3.0, 3.0) + 2.0 * std::sin(t / 7.0 + m);
    orig = x;
    std::vector<double> mean(M), sd(M);
    instance_normalize(x, M, L, mean, sd);

    double worst_mean = 0.0, worst_std = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        double mu = 0.0;
        for (std::size_t t = 0; t < L; ++t) mu += x[m * L + t];
        mu /= L;
        double var = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
            const double d = x[m * L + t] - mu;
            var += d * d;
        }
        worst_mean = std::max(worst_mean, std::abs(mu));
        worst_std = std::max(worst_std, std::abs(std::sqrt(var / L) - 1.0));
    }
    instance_denormalize(x, M, L, mean, sd);
    double worst_rt = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst_rt = std::max(worst_rt, std::abs(x[i] - orig[i]));

    const bool ok = worst_mean < 1e-9 && worst_std < 1e-4 && worst_rt < 1e-9;
    return {ok, false,
            "|mean|<=" + fmt(worst_mean) + ", |std-1|<=" + fmt(worst_std) +
                ", round-trip<=" + fmt(worst_rt)};
}

// ---------------------------------------------------------------- criterion 6
Outcome mask_contract() {
    PatchMask m42 = sample_mask(16, 42, 0.4, 2021, 0);
    if (m42.masked_per_row() != 17)
        return {false, false, "round(0.4*42) gave " + std::to_string(m42.masked_per_row())};
    for (const auto& row : m42.rows)
        if (row.size() != 17) return {false, false, "row masked a wrong count"};

    // masked-only loss: exactly-zero gradients at visible reconstructions
    Rng rng(5);
    const std::size_t B = 2, M = 2, P = 3, N = 6;
    Tensor target = Tensor::uniform({B, M, P, N}, -1, 1, rng);
    Tensor recon = Tensor::uniform({B, M, P, N}, -1, 1, rng);
    recon.set_requires_grad(true);
    PatchMask mask = sample_mask(B * M, N, 0.34, 7, 1);
    {
        Tape tape;
        tape.backward(pretrain_loss(recon, target, mask));
    }
    auto g = recon.grad();
    for (std::size_t r = 0; r < B * M; ++r)
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t idx = 0; idx < N; ++idx) {
                bool masked = false;
                for (std::size_t mi : mask.rows[r]) masked = masked || mi == idx;
                const double gv = g[(r * P + p) * N + idx];
                if (!masked && gv != 0.0)
                    return {false, false, "nonzero gradient at a visible reconstruction"};
                if (masked && gv == 0.0)
                    return {false, false, "zero gradient at a masked reconstruction"};
            }

    // uniformity over 1e5 draws at N=10, ratio 0.4
    const std::size_t draws = 100000;
    std::vector<std::size_t> hits(10, 0);
    for (std::size_t d = 0; d < draws; ++d) {
        Rng r(mix_seed(31, d));
        for (std::size_t idx : sample_mask_row(10, 0.4, r)) ++hits[idx];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
        worst = std::max(worst, std::abs(static_cast<double>(hits[i]) / draws - 0.4));
    return {worst < 0.01, false, "17/42 masked, visible grads zero, |freq-0.4|<=" + fmt(worst)};
}

// ---------------------------------------------------------------- criterion 7
Outcome overfit_sanity() {
    SynthSpec spec;
    spec.channels = 1;
    spec.timesteps = 67;  // 8 train windows with the explicit split below
    spec.seed = 12;
    spec.noise_sigma = 0.0;
    Dataset data = Dataset::make(synth_generate(spec), SplitSpec::boundaries(27, 47, 67), 16, 4);
    if (data.train_starts.size() != 8)
        return {false, false, "expected 8 train windows, got " + std::to_string(data.train_starts.size())};

    ModelConfig mc;
    mc.lookback = 16;
    mc.horizon = 4;
    mc.patch_len = 4;
    mc.stride = 4;
    mc.d_model = 8;
    mc.heads = 2;
    mc.ffn_dim = 16;
    mc.layers = 1;
    mc.dropout = 0.0;
    Model model(mc, 7);

    TrainConfig tc;
    tc.epochs = 2000;  // one batch per epoch -> at most 2000 steps
    tc.batch_size = 8;
    tc.learning_rate = 5e-3;
    tc.patience = 0;
    tc.seed = 2021;
    TrainReport report = train_supervised(model, data, tc);

    double best = 1e300;
    std::size_t steps = 0;
    for (const auto& e : report.epochs) {
        best = std::min(best, e.train_loss);
        ++steps;
        if (best < 1e-3) break;
    }
    return {best < 1e-3, false, "train MSE " + fmt(best) + " after " + std::to_string(steps) + " steps"};
}

RunConfig small_model_base() {
    RunConfig cfg;
    cfg.d_model = 16;
    cfg.heads = 4;
    cfg.ffn_dim = 128;
    cfg.layers = 3;
    cfg.dropout = 0.2;
    cfg.batch_size = 64;
    cfg.learning_rate = 1e-3;
    cfg.patience = 5;
    cfg.seed = 2021;
    return cfg;
}

// ---------------------------------------------------------------- criterion 8
Outcome baseline_beat() {
    RunConfig cfg = small_model_base();
    cfg.synth_channels = 4;
    cfg.synth_timesteps = 5000;
    cfg.synth_seed = 71;
    cfg.synth_periods = "24,60";
    cfg.synth_noise = 0.25;
    cfg.synth_trend = 0.003;
    cfg.synth_coupling = 0.3;
    cfg.lookback = 104;
    cfg.horizon = 24;
    cfg.patch_len = 16;
    cfg.stride = 8;
    cfg.epochs = 25;

    Dataset data = build_dataset(cfg, load_or_synth(cfg));
    Model model(cfg.model_config(HeadKind::Forecast, data.channels()), cfg.seed);
    train_supervised(model, data, cfg.train_config());
    const double model_mse = evaluate_test(model, data, false).mse;

    const double rl = repeat_last_baseline(data, data.test_starts).mse;
    const double ols = OlsBaseline::fit(data).evaluate(data, data.test_starts).mse;
    const bool ok = model_mse < rl && model_mse < ols;
    return {ok, false,
            "model " + fmt(model_mse) + " vs repeat-last " + fmt(rl) + ", OLS " + fmt(ols)};
}

// ---------------------------------------------------------------- criterion 9
Outcome lookback_benefit() {
    RunConfig cfg = small_model_base();
    cfg.synth_channels = 2;
    cfg.synth_timesteps = 4200;
    cfg.synth_seed = 55;
    cfg.synth_periods = "200,37";
    cfg.synth_noise = 0.2;
    cfg.horizon = 96;
    cfg.patch_len = 16;
    cfg.stride = 8;
    cfg.epochs = 20;

    auto run_at = [&](std::size_t L) {
        RunConfig c = cfg;
        c.lookback = L;
        return run_supervised_once(c).test.mse;
    };
    const double mse_96 = run_at(96);
    const double mse_336 = run_at(336);
    return {mse_336 < mse_96, false, "MSE(L=336)=" + fmt(mse_336) + " < MSE(L=96)=" + fmt(mse_96)};
}

// --------------------------------------------------------------- criterion 10
Outcome attention_scaling() {
    // wide block, single row: token work dominates and the quadratic terms
    // stay resident in cache at both sizes
    const std::size_t D = 128, H = 16, rows = 1;
    Rng rng(3);
    AttentionWeights w;
    for (std::size_t h = 0; h < H; ++h) {
        w.wq.push_back(Tensor::uniform({D, D / H}, -0.2, 0.2, rng));
        w.wk.push_back(Tensor::uniform({D, D / H}, -0.2, 0.2, rng));
        w.wv.push_back(Tensor::uniform({D, D / H}, -0.2, 0.2, rng));
    }
    w.wo = Tensor::uniform({D, D}, -0.2, 0.2, rng);

    auto time_forward = [&](std::size_t N) {
        Tensor x = Tensor::uniform({rows, D, N}, -1, 1, rng);
        Rng drop(0);
        multihead_attention(x, w, 0.0, drop, false);  // warm up
        std::vector<double> times;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            multihead_attention(x, w, 0.0, drop, false);
            times.push_back(seconds_since(t0));
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };

    const double t256 = time_forward(256);
    const double t512 = time_forward(512);
    const double ratio = t512 / t256;
    return {ratio >= 3.2 && ratio <= 4.8, false,
            "t(512)/t(256) = " + fmt(ratio) + " (t256=" + fmt(t256 * 1e3) + " ms)"};
}

// --------------------------------------------------------------- criterion 11
Outcome ssl_value() {
    RunConfig cfg = small_model_base();
    cfg.synth_channels = 3;
    cfg.synth_timesteps = 2600;
    cfg.synth_seed = 91;
    cfg.synth_periods = "24,96";
    cfg.synth_noise = 0.2;
    cfg.lookback = 512;
    cfg.horizon = 96;
    cfg.patch_len = 12;
    cfg.mask_ratio = 0.4;
    cfg.epochs = 30;
    cfg.probe_epochs = 15;

    Dataset data = build_dataset(cfg, load_or_synth(cfg));
    Model model(cfg.model_config(HeadKind::Reconstruct, data.channels()), cfg.seed);
    pretrain(model, data, cfg.train_config());

    // (a) masked reconstruction against mean imputation on held-out windows
    const std::size_t N = model.config().n_patches();
    Rng rng(0);
    double model_recon = 0.0, baseline_recon = 0.0;
    {
        auto starts = std::span<const std::size_t>(data.test_starts);
        Tensor x = gather_x(data, starts);
        PatchMask mask = sample_mask(starts.size() * data.channels(), N, cfg.mask_ratio, 5, 0);
        PretrainOutput out = model.forward_pretrain(x, mask, false, rng);
        model_recon = pretrain_loss(out.reconstruction, out.target, mask).item();
        // per-channel train mean of the (standardized) series, instance-normalized
        // the same way the targets are: predicting a constant for every patch
        Tensor baseline = Tensor::zeros(out.target.shape());
        {
            Tensor xin = x.clone();
            const std::size_t M = data.channels(), L = data.lookback;
            std::vector<double> mean(starts.size() * M), sd(starts.size() * M);
            instance_normalize(xin.data(), starts.size() * M, L, mean, sd);
            std::vector<double> train_mean(M, 0.0);
            for (std::size_t t = data.splits.train.begin; t < data.splits.train.end; ++t)
                for (std::size_t m = 0; m < M; ++m) train_mean[m] += data.table.value(t, m);
            for (std::size_t m = 0; m < M; ++m) train_mean[m] /= data.splits.train.size();
            double* bp = baseline.data().data();
            for (std::size_t r = 0; r < starts.size() * M; ++r) {
                const double v = (train_mean[r % M] - mean[r]) / (sd[r] + kInstanceNormEps);
                for (std::size_t i = 0; i < model.config().patch_len * N; ++i)
                    bp[r * model.config().patch_len * N + i] = v;
            }
        }
        baseline_recon = pretrain_loss(baseline, out.target, mask).item();
    }
    if (!(model_recon < baseline_recon))
        return {false, false,
                "recon " + fmt(model_recon) + " !< mean-imputation " + fmt(baseline_recon)};

    // (b) probe of the pretrained trunk vs probe of a random-init trunk
    Model pretrained_probe = model.clone();
    linear_probe(pretrained_probe, data, cfg.train_config());
    const double probed_mse = evaluate_test(pretrained_probe, data, false).mse;

    Model random_trunk(cfg.model_config(HeadKind::Reconstruct, data.channels()), cfg.seed + 999);
    linear_probe(random_trunk, data, cfg.train_config());
    const double random_mse = evaluate_test(random_trunk, data, false).mse;

    const bool ok = probed_mse < random_mse;
    return {ok, false,
            "recon " + fmt(model_recon) + " < baseline " + fmt(baseline_recon) + "; probe " +
                fmt(probed_mse) + (ok ? " < " : " !< ") + "random-init probe " + fmt(random_mse)};
}

// --------------------------------------------------------------- criterion 12
Outcome transfer_contract() {
    RunConfig src = small_model_base();
    src.synth_channels = 8;
    src.synth_timesteps = 2200;
    src.synth_seed = 101;
    src.synth_periods = "24,96";
    src.synth_noise = 0.2;
    src.lookback = 512;
    src.horizon = 96;
    src.patch_len = 12;
    src.mask_ratio = 0.4;
    src.epochs = 25;
    src.probe_epochs = 15;

    RunConfig tgt = src;
    tgt.synth_channels = 3;
    tgt.synth_seed = 202;  // different series, same seasonality family

    Dataset source_data = build_dataset(src, load_or_synth(src));
    Dataset target_data = build_dataset(tgt, load_or_synth(tgt));

    Model source(src.model_config(HeadKind::Reconstruct, source_data.channels()), src.seed);
    pretrain(source, source_data, src.train_config());

    auto [transferred, report] = transfer(source, target_data, TransferMode::Probe, tgt.train_config());
    const double transferred_mse = evaluate_test(transferred, target_data, false).mse;

    Model random_trunk(tgt.model_config(HeadKind::Reconstruct, target_data.channels()), tgt.seed + 999);
    linear_probe(random_trunk, target_data, tgt.train_config());
    const double random_mse = evaluate_test(random_trunk, target_data, false).mse;

    const bool ok = transferred_mse < random_mse;
    return {ok, false,
            "M=8 trunk on M=3 data: transferred probe " + fmt(transferred_mse) +
                (ok ? " < " : " !< ") + "random-init probe " + fmt(random_mse)};
}

// --------------------------------------------------------------- criterion 13
Outcome determinism() {
    RunConfig cfg;
    cfg.synth_channels = 2;
    cfg.synth_timesteps = 400;
    cfg.lookback = 32;
    cfg.horizon = 8;
    cfg.patch_len = 8;
    cfg.stride = 4;
    cfg.d_model = 16;
    cfg.heads = 4;
    cfg.ffn_dim = 32;
    cfg.layers = 2;
    cfg.dropout = 0.2;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    cfg.patience = 0;

    auto run_once = [&](const std::string& tag) {
        RunResult r = run_supervised_once(cfg);
        const std::string ckpt = "/tmp/patchcast_accept_" + tag + ".ckpt";
        const std::string report = "/tmp/patchcast_accept_" + tag + ".csv";
        r.model.save(ckpt);
        r.report.write_csv(report);
        auto slurp = [](const std::string& p) {
            std::ifstream in(p, std::ios::binary);
            return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        };
        return std::pair<std::string, std::string>{slurp(ckpt), slurp(report)};
    };
    auto a = run_once("a");
    auto b = run_once("b");
    ResultTable sa = run_sweep(cfg, SweepAxis::Seed, {2019, 2020});
    ResultTable sb = run_sweep(cfg, SweepAxis::Seed, {2019, 2020});

    const bool ok = a.first == b.first && a.second == b.second && sa.to_csv() == sb.to_csv();
    return {ok, false, ok ? "checkpoints, reports and sweep CSVs are byte-identical"
                          : "rerun artifacts differ"};
}

// --------------------------------------------------------------- criterion 14
Outcome etth1_smoke() {
    std::string path;
    if (const char* env = std::getenv("PATCHCAST_ETTH1")) path = env;
    if (path.empty()) {
        for (const char* candidate : {"data/ETTh1.csv", "../data/ETTh1.csv", "/root/proj/data/ETTh1.csv"})
            if (std::filesystem::exists(candidate)) {
                path = candidate;
                break;
            }
    }
    if (path.empty() || !std::filesystem::exists(path))
        return {false, true,
                "ETTh1.csv not found (set PATCHCAST_ETTH1 or place it at data/ETTh1.csv); skipped"};

    RunConfig cfg = small_model_base();
    cfg.dataset = path;
    cfg.split_mode = "ett_hourly";
    cfg.lookback = 336;
    cfg.horizon = 96;
    cfg.patch_len = 16;
    cfg.stride = 8;
    cfg.epochs = 20;
    cfg.learning_rate = 5e-4;

    RunResult r = run_supervised_once(cfg);
    const bool ok = r.test.mse <= 0.45;
    return {ok, true, "ETTh1/96 test MSE " + fmt(r.test.mse) + " (target <= 0.45, paper 0.375)"};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* label;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "patch-count formula (42 / 64)", patch_count_formula},
        {2, "non-overlapping SSL patch count (42)", ssl_patch_count},
        {3, "gradient suite (ops + full toy model)", gradient_suite},
        {4, "channel-independence invariants", channel_independence},
        {5, "instance normalization contract", instance_norm_contract},
        {6, "mask contract", mask_contract},
        {7, "overfit sanity (8 windows)", overfit_sanity},
        {8, "supervised beats naive baselines", baseline_beat},
        {9, "look-back benefit direction", lookback_benefit},
        {10, "quadratic attention scaling", attention_scaling},
        {11, "self-supervised value trend", ssl_value},
        {12, "transfer structural contract", transfer_contract},
        {13, "bitwise determinism", determinism},
        {14, "real-data smoke (ETTh1, best effort)", etth1_smoke},
    };

    int selected = 0;
    if (argc > 1) selected = std::atoi(argv[1]);

    int failures = 0;
    for (const auto& c : criteria) {
        if (selected != 0 && c.id != selected) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        const char* status = out.pass ? "PASS" : (out.warn_only ? "WARN" : "FAIL");
        std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n", status, c.id, c.label,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        if (!out.pass && !out.warn_only) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
