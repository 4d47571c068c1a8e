#include "patchcast/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>

namespace patchcast {

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string ResultTable::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

void ResultTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("table: cannot write '" + path + "'");
    out << to_csv();
}

SeriesTable load_or_synth(const RunConfig& cfg) {
    if (!cfg.dataset.empty()) {
        SeriesTable t = load_csv(cfg.dataset);
        if (!cfg.dataset_name.empty()) t.name = cfg.dataset_name;
        return t;
    }
    return synth_generate(cfg.synth_spec());
}

Dataset build_dataset(const RunConfig& cfg, SeriesTable table) {
    return Dataset::make(std::move(table), cfg.split_spec(), cfg.lookback, cfg.horizon,
                         cfg.standardize, cfg.train_fraction);
}

Metrics evaluate_test(Model& model, const Dataset& data, bool raw_scale) {
    auto [pred, target] = predict_windows(model, data, data.test_starts);
    if (raw_scale && data.standardized) {
        const std::size_t n = pred.dim(0), M = pred.dim(1), T = pred.dim(2);
        for (Tensor* t : {&pred, &target}) {
            double* p = t->data().data();
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t m = 0; m < M; ++m)
                    for (std::size_t i = 0; i < T; ++i) {
                        double& v = p[(b * M + m) * T + i];
                        v = v * data.scaler.std_dev[m] + data.scaler.mean[m];
                    }
        }
    }
    return metric_mse_mae(pred, target);
}

RunResult run_supervised_once(const RunConfig& cfg) {
    cfg.validate();
    Dataset data = build_dataset(cfg, load_or_synth(cfg));
    Model model(cfg.model_config(HeadKind::Forecast, data.channels()), cfg.seed);
    TrainReport report = train_supervised(model, data, cfg.train_config());
    Metrics test = evaluate_test(model, data, cfg.raw_scale_metrics);
    report.test_mse = test.mse;
    report.test_mae = test.mae;
    return {std::move(model), std::move(report), std::move(test)};
}

ResultTable run_benchmark(const RunConfig& base, const std::vector<std::string>& datasets,
                          const std::vector<std::size_t>& horizons) {
    ResultTable table;
    table.header = {"dataset", "horizon", "mse", "mae"};
    for (const std::string& path : datasets) {
        RunConfig cfg = base;
        cfg.dataset = path;
        SeriesTable raw;
        try {
            raw = load_or_synth(cfg);
        } catch (const IoError& e) {
            std::cerr << "benchmark: skipping '" << path << "': " << e.what() << '\n';
            continue;
        }
        for (std::size_t T : horizons) {
            RunConfig cell = cfg;
            cell.horizon = T;
            RunResult result = run_supervised_once(cell);
            table.rows.push_back({raw.name, std::to_string(T), format_metric(result.test.mse),
                                  format_metric(result.test.mae)});
        }
    }
    return table;
}

std::vector<std::pair<std::string, RunConfig>> ablation_variants(const RunConfig& base) {
    auto strip = [](const RunConfig& c) {
        RunConfig s = c;
        s.patch_len = 0;
        s.stride = 0;
        s.channel_mode.clear();
        return serialize_config(s);
    };

    RunConfig ci = base;
    ci.patch_len = 1;
    ci.stride = 1;

    RunConfig p = base;
    p.channel_mode = "mixing";

    RunConfig original = base;
    original.patch_len = 1;
    original.stride = 1;
    original.channel_mode = "mixing";

    std::vector<std::pair<std::string, RunConfig>> variants{
        {"P+CI", base}, {"CI", ci}, {"P", p}, {"original", original}};
    const std::string reference = strip(base);
    for (const auto& [name, cfg] : variants)
        if (strip(cfg) != reference)
            throw TrainError("ablation: variant '" + name +
                             "' differs from the base beyond (patch_len, stride, channel_mode)");
    return variants;
}

ResultTable run_ablation(const RunConfig& base) {
    ResultTable table;
    table.header = {"variant", "mse", "mae"};
    for (auto& [name, cfg] : ablation_variants(base)) {
        const std::size_t channels = cfg.dataset.empty()
                                         ? cfg.synth_channels
                                         : load_or_synth(cfg).channels();
        const std::size_t bytes =
            estimate_train_step_bytes(cfg.model_config(HeadKind::Forecast, channels),
                                      cfg.batch_size, channels);
        if (bytes > cfg.mem_budget_mb * std::size_t(1024 * 1024)) {
            std::cerr << "ablation: '" << name << "' estimated at " << bytes / (1024 * 1024)
                      << " MiB exceeds the " << cfg.mem_budget_mb << " MiB budget\n";
            table.rows.push_back({name, "-", "-"});
            continue;
        }
        RunResult result = run_supervised_once(cfg);
        table.rows.push_back({name, format_metric(result.test.mse), format_metric(result.test.mae)});
    }
    return table;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "look_back") return SweepAxis::LookBack;
    if (name == "patch_len") return SweepAxis::PatchLen;
    if (name == "train_fraction") return SweepAxis::TrainFraction;
    if (name == "seed") return SweepAxis::Seed;
    if (name == "horizon") return SweepAxis::Horizon;
    throw ConfigError("sweep: unknown axis '" + name +
                      "' (expected look_back, patch_len, train_fraction, seed or horizon)");
}

ResultTable run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep: no axis values given");

    auto cell_config = [&](double v) {
        RunConfig cfg = base;
        switch (axis) {
            case SweepAxis::LookBack:
                cfg.lookback = static_cast<std::size_t>(v);
                break;
            case SweepAxis::PatchLen:
                // stride follows the patch length: non-overlapping sweep
                cfg.patch_len = static_cast<std::size_t>(v);
                cfg.stride = static_cast<std::size_t>(v);
                break;
            case SweepAxis::TrainFraction:
                cfg.train_fraction = v;
                break;
            case SweepAxis::Seed:
                cfg.seed = static_cast<std::uint64_t>(v);
                break;
            case SweepAxis::Horizon:
                cfg.horizon = static_cast<std::size_t>(v);
                break;
        }
        return cfg;
    };

    struct Cell {
        double value;
        Metrics test;
        double wall = 0.0;
    };
    std::vector<Cell> cells(values.size());

    auto run_cell = [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        RunResult r = run_supervised_once(cell_config(values[i]));
        cells[i].value = values[i];
        cells[i].test = r.test;
        cells[i].wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    const std::size_t jobs = std::max<std::size_t>(1, base.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < values.size(); ++i) run_cell(i);
    } else {
        std::vector<std::future<void>> futures;
        std::size_t next = 0;
        while (next < values.size()) {
            futures.clear();
            for (std::size_t j = 0; j < jobs && next < values.size(); ++j, ++next)
                futures.push_back(std::async(std::launch::async, run_cell, next));
            for (auto& f : futures) f.get();
        }
    }

    ResultTable table;
    table.header = {"value", "mse", "mae"};
    for (const auto& c : cells) {
        std::string label = axis == SweepAxis::TrainFraction ? format_metric(c.value)
                                                             : std::to_string(static_cast<long long>(c.value));
        table.rows.push_back({label, format_metric(c.test.mse), format_metric(c.test.mae)});
        std::cerr << "sweep: value " << label << " wall " << c.wall << " s\n";
    }
    if (axis == SweepAxis::Seed) {
        double mean_mse = 0, mean_mae = 0;
        for (const auto& c : cells) {
            mean_mse += c.test.mse;
            mean_mae += c.test.mae;
        }
        mean_mse /= cells.size();
        mean_mae /= cells.size();
        double var_mse = 0, var_mae = 0;
        for (const auto& c : cells) {
            var_mse += (c.test.mse - mean_mse) * (c.test.mse - mean_mse);
            var_mae += (c.test.mae - mean_mae) * (c.test.mae - mean_mae);
        }
        table.rows.push_back({"mean", format_metric(mean_mse), format_metric(mean_mae)});
        table.rows.push_back({"std", format_metric(std::sqrt(var_mse / cells.size())),
                              format_metric(std::sqrt(var_mae / cells.size()))});
    }
    return table;
}

std::size_t estimate_train_step_bytes(const ModelConfig& cfg, std::size_t batch_windows,
                                      std::size_t n_channels) {
    const std::size_t rows =
        cfg.channel_mode == ChannelMode::Independent ? batch_windows * n_channels : batch_windows;
    const std::size_t N = cfg.n_patches();
    const std::size_t D = cfg.d_model, F = cfg.ffn_dim, H = cfg.heads, dk = D / H;
    const std::size_t P = cfg.token_width();

    // tape tensors per row, in doubles
    const std::size_t embed = 2 * P * N + 3 * D * N;
    const std::size_t per_layer =
        H * (4 * N * dk + 3 * N * N)  // q/k/v/av + scores/softmax/attn-drop
        + 3 * D * N                   // concat, projection, transpose
        + 6 * D * N                   // residual adds, batchnorm in/out, saved x-hat
        + 2 * F * N;                  // ffn hidden + gelu
    const std::size_t head = cfg.head == HeadKind::Forecast ? D * N + cfg.head_width() : P * N;
    const std::size_t tape_doubles = rows * (embed + cfg.layers * per_layer + head);

    std::size_t param_doubles = D * P + D * N + cfg.head_width() * (N * D + 1);
    param_doubles += cfg.layers * (3 * H * D * dk + D * D + 2 * F * D + F + D + 8 * D);

    // values + grads on the tape; params carry grads plus two Adam moments
    return 8 * (2 * tape_doubles + 4 * param_doubles);
}

}  // namespace patchcast
