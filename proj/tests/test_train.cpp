#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "patchcast/metrics.hpp"
#include "patchcast/train.hpp"

using namespace patchcast;

namespace {

ModelConfig tiny_model(std::size_t lookback = 16, std::size_t horizon = 4) {
    ModelConfig cfg;
    cfg.lookback = lookback;
    cfg.horizon = horizon;
    cfg.patch_len = 4;
    cfg.stride = 4;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.ffn_dim = 16;
    cfg.layers = 1;
    cfg.dropout = 0.0;
    return cfg;
}

Dataset tiny_dataset(std::uint64_t seed = 3, std::size_t timesteps = 200, std::size_t channels = 2,
                     std::size_t lookback = 16, std::size_t horizon = 4) {
    SynthSpec spec;
    spec.channels = channels;
    spec.timesteps = timesteps;
    spec.seed = seed;
    spec.noise_sigma = 0.05;
    return Dataset::make(synth_generate(spec), SplitSpec::fractions(0.7, 0.1, 0.2), lookback, horizon);
}

TrainConfig fast_train(std::size_t epochs, std::uint64_t seed = 2021) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.patience = 0;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("supervised loss convention") {
    Tensor pred = Tensor::zeros({1, 2, 1});
    Tensor target = Tensor::from_vector({1, 2, 1}, {1.0, 3.0});
    CHECK(supervised_loss(pred, pred).item() == 0.0);
    CHECK(supervised_loss(pred, target).item() == doctest::Approx(5.0).epsilon(1e-15));

    SUBCASE("duplicating channels leaves the loss unchanged") {
        Rng rng(2);
        Tensor p = Tensor::uniform({2, 3, 4}, -1, 1, rng);
        Tensor t = Tensor::uniform({2, 3, 4}, -1, 1, rng);
        Tensor p2 = Tensor::zeros({2, 6, 4});
        Tensor t2 = Tensor::zeros({2, 6, 4});
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t m = 0; m < 6; ++m)
                for (std::size_t i = 0; i < 4; ++i) {
                    p2.at({b, m, i}) = p.at({b, m % 3, i});
                    t2.at({b, m, i}) = t.at({b, m % 3, i});
                }
        CHECK(supervised_loss(p2, t2).item() ==
              doctest::Approx(supervised_loss(p, t).item()).epsilon(1e-12));
    }

    CHECK_THROWS_AS(supervised_loss(pred, Tensor::zeros({1, 2, 2})), ShapeError);
}

TEST_CASE("masked pretraining loss") {
    const std::size_t B = 1, M = 2, P = 3, N = 4;
    Rng rng(5);
    Tensor target = Tensor::uniform({B, M, P, N}, -1, 1, rng);

    PatchMask mask;
    mask.n_patches = N;
    mask.ratio = 0.25;
    mask.rows = {{1}, {3}};

    SUBCASE("perfect on masked, garbage elsewhere, still zero") {
        Tensor recon = Tensor::uniform({B, M, P, N}, 5, 9, rng);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t p = 0; p < P; ++p) {
                const std::size_t idx = mask.rows[m][0];
                recon.at({0, m, p, idx}) = target.at({0, m, p, idx});
            }
        CHECK(pretrain_loss(recon, target, mask).item() == 0.0);
    }

    SUBCASE("single masked patch with unit errors gives loss 1") {
        PatchMask one;
        one.n_patches = N;
        one.ratio = 0.25;
        one.rows = {{2}, {}};
        Tensor recon = target.clone();
        for (std::size_t p = 0; p < P; ++p) recon.at({0, 0, p, 2}) += 1.0;
        CHECK(pretrain_loss(recon, target, one).item() == doctest::Approx(1.0).epsilon(1e-15));
    }

    SUBCASE("matches a brute-force masked mean square") {
        Tensor recon = Tensor::uniform({B, M, P, N}, -1, 1, rng);
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t idx : mask.rows[m])
                for (std::size_t p = 0; p < P; ++p) {
                    const double d = recon.at({0, m, p, idx}) - target.at({0, m, p, idx});
                    acc += d * d;
                    ++count;
                }
        CHECK(pretrain_loss(recon, target, mask).item() ==
              doctest::Approx(acc / count).epsilon(1e-12));
    }

    SUBCASE("empty mask is rejected") {
        PatchMask empty;
        empty.n_patches = N;
        empty.rows = {{}, {}};
        CHECK_THROWS_AS(pretrain_loss(target, target, empty), TrainError);
    }

    SUBCASE("visible reconstructions receive exactly zero gradient") {
        Tensor recon = Tensor::uniform({B, M, P, N}, -1, 1, rng);
        recon.set_requires_grad(true);
        {
            Tape tape;
            tape.backward(pretrain_loss(recon, target, mask));
        }
        auto g = recon.grad();
        std::size_t nonzero = 0;
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t p = 0; p < P; ++p)
                for (std::size_t idx = 0; idx < N; ++idx) {
                    const double gv = g[((m)*P + p) * N + idx];
                    const bool masked = idx == mask.rows[m][0];
                    if (masked) {
                        ++nonzero;
                        CHECK(gv != 0.0);
                    } else {
                        CHECK(gv == 0.0);
                    }
                }
        CHECK(nonzero == M * P);
    }
}

TEST_CASE("adam minimizes a quadratic") {
    Tensor w = Tensor::from_vector({1}, {-4.0}, true);
    Tensor target = Tensor::scalar(3.0);
    Adam opt({w}, 0.1, 0.9, 0.999, 1e-8);
    for (int i = 0; i < 400; ++i) {
        Tape tape;
        Tensor loss = mse(w, target);
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
    }
    CHECK(w.item() == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("train fraction truncates only the oldest windows") {
    Dataset full = tiny_dataset();
    SynthSpec spec;
    spec.channels = 2;
    spec.timesteps = 200;
    spec.seed = 3;
    spec.noise_sigma = 0.05;
    Dataset half =
        Dataset::make(synth_generate(spec), SplitSpec::fractions(0.7, 0.1, 0.2), 16, 4, true, 0.5);
    CHECK(half.val_starts == full.val_starts);
    CHECK(half.test_starts == full.test_starts);
    CHECK(half.train_starts.size() ==
          static_cast<std::size_t>(std::llround(0.5 * full.train_starts.size())));
    // the kept windows are the newest suffix
    CHECK(half.train_starts.back() == full.train_starts.back());
    CHECK(half.train_starts.front() > full.train_starts.front());
}

TEST_CASE("supervised training loop") {
    Dataset data = tiny_dataset();

    SUBCASE("patience=0 runs exactly the requested epochs") {
        Model model(tiny_model(), 1);
        TrainReport report = train_supervised(model, data, fast_train(4));
        CHECK(report.epochs.size() == 4);
    }

    SUBCASE("same seed gives bitwise-identical reports and weights") {
        Model a(tiny_model(), 1);
        Model b(tiny_model(), 1);
        TrainReport ra = train_supervised(a, data, fast_train(3));
        TrainReport rb = train_supervised(b, data, fast_train(3));
        REQUIRE(ra.epochs.size() == rb.epochs.size());
        for (std::size_t i = 0; i < ra.epochs.size(); ++i) {
            CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
            CHECK(ra.epochs[i].val_loss == rb.epochs[i].val_loss);
        }
        CHECK(a.param_hash() == b.param_hash());
    }

    SUBCASE("early stopping restores the best-validation weights") {
        Model model(tiny_model(), 1);
        TrainConfig cfg = fast_train(12);
        cfg.patience = 2;
        cfg.learning_rate = 5e-3;  // noisy enough to regress after improving
        TrainReport report = train_supervised(model, data, cfg);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : report.epochs) best = std::min(best, e.val_loss);
        CHECK(report.best_val_loss == best);
        // the restored model reproduces the recorded best val loss
        auto [pred, target] = predict_windows(model, data, data.val_starts);
        CHECK(metric_mse_mae(pred, target).mse == doctest::Approx(best).epsilon(1e-12));
    }

    SUBCASE("non-finite loss aborts with a diagnostic") {
        Dataset poisoned = tiny_dataset();
        poisoned.table.values[poisoned.table.values.size() / 2] =
            std::numeric_limits<double>::infinity();
        Model model(tiny_model(), 1);
        CHECK_THROWS_AS(train_supervised(model, poisoned, fast_train(1)), TrainError);
    }

    SUBCASE("mismatched dataset geometry is rejected") {
        Model model(tiny_model(16, 8), 1);
        CHECK_THROWS_AS(train_supervised(model, data, fast_train(1)), ConfigError);
    }
}

TEST_CASE("overfit sanity on an 8-window set") {
    SynthSpec spec;
    spec.channels = 1;
    spec.timesteps = 16 + 4 + 8 - 1 + 40;  // 8 train windows after the split
    spec.seed = 12;
    spec.noise_sigma = 0.0;
    SeriesTable table = synth_generate(spec);
    Dataset data = Dataset::make(table, SplitSpec::boundaries(27, 47, 67), 16, 4);
    REQUIRE(data.train_starts.size() == 8);

    Model model(tiny_model(), 7);
    TrainConfig cfg = fast_train(250);  // 250 epochs x 1 batch = 250 steps
    cfg.batch_size = 8;
    cfg.learning_rate = 5e-3;
    TrainReport report = train_supervised(model, data, cfg);
    CHECK(report.epochs.back().train_loss < 1e-3);
}

TEST_CASE("masked pretraining loop") {
    SynthSpec spec;
    spec.channels = 2;
    spec.timesteps = 400;
    spec.seed = 21;
    spec.noise_sigma = 0.02;
    ModelConfig mc = tiny_model(48, 12);
    mc.patch_len = 12;
    mc.stride = 12;
    mc.patch_mode = PatchMode::NonOverlapTruncate;
    mc.head = HeadKind::Reconstruct;
    Dataset data = Dataset::make(synth_generate(spec), SplitSpec::fractions(0.7, 0.1, 0.2), 48, 12);

    SUBCASE("mask ratio zero is rejected") {
        Model model(mc, 2);
        TrainConfig cfg = fast_train(1);
        cfg.mask_ratio = 0.0;
        CHECK_THROWS_AS(pretrain(model, data, cfg), ConfigError);
    }

    SUBCASE("pretraining runs deterministically") {
        Model a(mc, 2);
        Model b(mc, 2);
        TrainConfig cfg = fast_train(2);
        cfg.mask_ratio = 0.4;
        TrainReport ra = pretrain(a, data, cfg);
        TrainReport rb = pretrain(b, data, cfg);
        for (std::size_t i = 0; i < ra.epochs.size(); ++i)
            CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
        CHECK(a.param_hash() == b.param_hash());
    }

    SUBCASE("trunk pretrained on M=5 forwards on M=3") {
        SynthSpec wide = spec;
        wide.channels = 5;
        Dataset d5 = Dataset::make(synth_generate(wide), SplitSpec::fractions(0.7, 0.1, 0.2), 48, 12);
        Model model(mc, 2);
        TrainConfig cfg = fast_train(1);
        pretrain(model, d5, cfg);
        Rng rng(0);
        Tensor x3 = Tensor::zeros({1, 3, 48});
        PatchMask mask = sample_mask(3, 4, 0.25, 9, 0);
        CHECK_NOTHROW(model.forward_pretrain(x3, mask, false, rng));
    }
}

TEST_CASE("linear probing freezes the trunk") {
    ModelConfig mc = tiny_model(48, 12);
    mc.patch_len = 12;
    mc.stride = 12;
    mc.patch_mode = PatchMode::NonOverlapTruncate;
    mc.head = HeadKind::Reconstruct;
    Model model(mc, 8);

    SynthSpec spec;
    spec.channels = 2;
    spec.timesteps = 400;
    spec.seed = 22;
    Dataset data = Dataset::make(synth_generate(spec), SplitSpec::fractions(0.7, 0.1, 0.2), 48, 12);

    TrainConfig cfg = fast_train(2);
    pretrain(model, data, cfg);

    const std::uint64_t trunk_before = model.param_hash(true);
    TrainReport report = linear_probe(model, data, cfg, 3);
    CHECK(model.param_hash(true) == trunk_before);
    CHECK(model.config().head == HeadKind::Forecast);
    CHECK(report.epochs.size() == 3);

    SUBCASE("zero probe epochs keeps the fresh head untouched") {
        Model again(mc, 8);
        pretrain(again, data, cfg);
        TrainReport r0 = linear_probe(again, data, cfg, 0);
        CHECK(r0.epochs.empty());
        // fresh head must equal a reference re-initialization with the same seed
        Model reference(mc, 8);
        reference.reset_head(HeadKind::Forecast, data.horizon, cfg.seed);
        bool matched = false;
        for (auto& [name, t] : again.named_parameters())
            if (name == "head.weight")
                for (auto& [rname, rt] : reference.named_parameters())
                    if (rname == "head.weight") {
                        matched = true;
                        for (std::size_t i = 0; i < t.size(); ++i)
                            CHECK(t.data()[i] == rt.data()[i]);
                    }
        CHECK(matched);
    }

    SUBCASE("look-back mismatch is rejected") {
        SynthSpec other = spec;
        Dataset wrong = Dataset::make(synth_generate(other), SplitSpec::fractions(0.7, 0.1, 0.2), 36, 12);
        Model m2(mc, 8);
        CHECK_THROWS_AS(linear_probe(m2, wrong, cfg), ConfigError);
    }
}

TEST_CASE("lp then ft schedule") {
    ModelConfig mc = tiny_model(48, 12);
    mc.patch_len = 12;
    mc.stride = 12;
    mc.patch_mode = PatchMode::NonOverlapTruncate;
    mc.head = HeadKind::Reconstruct;

    SynthSpec spec;
    spec.channels = 2;
    spec.timesteps = 500;
    spec.seed = 23;
    spec.noise_sigma = 0.02;
    Dataset data = Dataset::make(synth_generate(spec), SplitSpec::fractions(0.7, 0.1, 0.2), 48, 12);

    TrainConfig cfg = fast_train(2);
    cfg.lp_epochs = 3;
    cfg.ft_epochs = 5;

    Model model(mc, 9);
    pretrain(model, data, cfg);

    SUBCASE("records stage boundaries") {
        Model m = model.clone();
        TrainReport report = finetune_lp_then_ft(m, data, cfg);
        REQUIRE(report.stage_bounds.size() == 2);
        CHECK(report.stage_bounds[0] == 3);
        CHECK(report.stage_bounds[1] == 8);
        CHECK(report.epochs.size() == 8);
        CHECK(report.epochs[3].epoch == 3);
    }

    SUBCASE("zero-length stages return the probe-initialized model") {
        Model m = model.clone();
        TrainConfig zero = cfg;
        zero.lp_epochs = 0;
        zero.ft_epochs = 0;
        TrainReport report = finetune_lp_then_ft(m, data, zero);
        CHECK(report.epochs.empty());
        CHECK(m.config().head == HeadKind::Forecast);
    }

    SUBCASE("fine-tuning does not hurt train fit") {
        Model probed = model.clone();
        linear_probe(probed, data, cfg, cfg.lp_epochs);
        auto [pp, pt] = predict_windows(probed, data, data.train_starts);
        const double probe_mse = metric_mse_mae(pp, pt).mse;

        Model tuned = model.clone();
        finetune_lp_then_ft(tuned, data, cfg);
        auto [fp, ft] = predict_windows(tuned, data, data.train_starts);
        const double ft_mse = metric_mse_mae(fp, ft).mse;
        CHECK(ft_mse <= probe_mse + 1e-9);
    }
}

TEST_CASE("transfer rebuilds the head and copies the trunk") {
    ModelConfig mc = tiny_model(48, 12);
    mc.patch_len = 12;
    mc.stride = 12;
    mc.patch_mode = PatchMode::NonOverlapTruncate;
    mc.head = HeadKind::Reconstruct;

    SynthSpec src_spec;
    src_spec.channels = 8;
    src_spec.timesteps = 400;
    src_spec.seed = 31;
    Dataset source_data =
        Dataset::make(synth_generate(src_spec), SplitSpec::fractions(0.7, 0.1, 0.2), 48, 12);

    SynthSpec tgt_spec;
    tgt_spec.channels = 2;
    tgt_spec.timesteps = 400;
    tgt_spec.seed = 32;
    Dataset target_data =
        Dataset::make(synth_generate(tgt_spec), SplitSpec::fractions(0.7, 0.1, 0.2), 48, 12);

    TrainConfig cfg = fast_train(2);
    Model source(mc, 10);
    pretrain(source, source_data, cfg);

    SUBCASE("source M=8 transfers onto an M=2 dataset") {
        auto [model, report] = transfer(source, target_data, TransferMode::Probe, cfg);
        CHECK(model.config().head == HeadKind::Forecast);
        CHECK(model.param_hash(true) == source.param_hash(true));
        CHECK(report.epochs.size() == cfg.probe_epochs);
    }

    SUBCASE("transfer to the same dataset equals the plain fine-tune pipeline") {
        cfg.lp_epochs = 2;
        cfg.ft_epochs = 2;
        auto [via_transfer, report_a] = transfer(source, source_data, TransferMode::LpThenFt, cfg);

        ModelConfig manual_cfg = source.config();
        manual_cfg.horizon = source_data.horizon;
        manual_cfg.head = HeadKind::Forecast;
        Model manual(manual_cfg, cfg.seed);
        manual.adopt_trunk(source);
        TrainReport report_b = finetune_lp_then_ft(manual, source_data, cfg);

        REQUIRE(report_a.epochs.size() == report_b.epochs.size());
        for (std::size_t i = 0; i < report_a.epochs.size(); ++i)
            CHECK(report_a.epochs[i].train_loss == report_b.epochs[i].train_loss);
        CHECK(via_transfer.param_hash() == manual.param_hash());
    }

    SUBCASE("look-back mismatch is a hard error") {
        Dataset short_data =
            Dataset::make(synth_generate(tgt_spec), SplitSpec::fractions(0.7, 0.1, 0.2), 36, 12);
        CHECK_THROWS_AS(transfer(source, short_data, TransferMode::Probe, cfg), ConfigError);
    }
}

TEST_CASE("train report serialization") {
    TrainReport report;
    report.seed = 42;
    report.epochs = {{0, 0.5, 0.6}, {1, 0.25, 0.3}};
    report.best_epoch = 1;
    report.best_val_loss = 0.3;
    report.test_mse = 0.111;
    report.test_mae = 0.222;
    const std::string path = "/tmp/patchcast_report.csv";
    report.write_csv(path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,train_loss,val_loss");
    std::getline(in, line);
    CHECK(line == "0,0.5,0.59999999999999998");
    std::getline(in, line);
    std::getline(in, line);
    CHECK(line.rfind("# best_epoch=1 ", 0) == 0);
}
