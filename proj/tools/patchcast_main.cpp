#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "patchcast/experiments.hpp"

namespace fs = std::filesystem;
using namespace patchcast;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    bool seed_set = false;
    std::uint64_t seed = 0;
};

RunConfig load_run_config(const GlobalArgs& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : parse_config(g.config_path);
    for (const std::string& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed_set) cfg.seed = g.seed;
    cfg.validate();
    return cfg;
}

fs::path ensure_out_dir(const GlobalArgs& g) {
    fs::path dir(g.out_dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<double> parse_value_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

void write_metrics_csv(const fs::path& path, const std::string& dataset, std::size_t horizon,
                       const Metrics& m) {
    ResultTable t;
    t.header = {"dataset", "horizon", "mse", "mae"};
    t.rows.push_back({dataset, std::to_string(horizon), format_metric(m.mse), format_metric(m.mae)});
    t.write_csv(path.string());
}

// scaler arrays ride along in the checkpoint so eval/predict can reproduce
// the training-time standardization
std::map<std::string, std::vector<double>> scaler_extra(const Dataset& data) {
    std::map<std::string, std::vector<double>> extra;
    if (data.standardized) {
        extra["scaler.mean"] = data.scaler.mean;
        extra["scaler.std"] = data.scaler.std_dev;
    }
    return extra;
}

int cmd_synth(const GlobalArgs& g, const std::string& output) {
    RunConfig cfg = load_run_config(g);
    SeriesTable table = synth_generate(cfg.synth_spec());
    fs::path path = output.empty() ? ensure_out_dir(g) / (table.name + ".csv") : fs::path(output);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_csv(table, path.string());
    std::cout << "wrote " << path.string() << " (" << table.timesteps() << " steps, "
              << table.channels() << " channels)\n";
    return 0;
}

int cmd_train(const GlobalArgs& g) {
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    Dataset data = build_dataset(cfg, load_or_synth(cfg));
    Model model(cfg.model_config(HeadKind::Forecast, data.channels()), cfg.seed);
    TrainReport report = train_supervised(model, data, cfg.train_config());
    Metrics test = evaluate_test(model, data, cfg.raw_scale_metrics);
    report.test_mse = test.mse;
    report.test_mae = test.mae;

    model.save((dir / "model.ckpt").string(), scaler_extra(data));
    report.write_csv((dir / "report.csv").string());
    write_metrics_csv(dir / "metrics.csv", data.table.name, cfg.horizon, test);
    std::cout << "test mse " << test.mse << " mae " << test.mae << " (best epoch "
              << report.best_epoch << ")\n";
    return 0;
}

int cmd_pretrain(const GlobalArgs& g) {
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    Dataset data = build_dataset(cfg, load_or_synth(cfg));
    Model model(cfg.model_config(HeadKind::Reconstruct, data.channels()), cfg.seed);
    TrainReport report = pretrain(model, data, cfg.train_config());
    model.save((dir / "pretrained.ckpt").string(), scaler_extra(data));
    report.write_csv((dir / "report.csv").string());
    std::cout << "pretrained; best val recon loss " << report.best_val_loss << " at epoch "
              << report.best_epoch << "\n";
    return 0;
}

int cmd_probe_or_finetune(const GlobalArgs& g, const std::string& trunk_path, bool full_finetune) {
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    Dataset data = build_dataset(cfg, load_or_synth(cfg));
    Model model = Model::load(trunk_path);
    TrainReport report = full_finetune ? finetune_lp_then_ft(model, data, cfg.train_config())
                                       : linear_probe(model, data, cfg.train_config());
    Metrics test = evaluate_test(model, data, cfg.raw_scale_metrics);
    report.test_mse = test.mse;
    report.test_mae = test.mae;

    const char* name = full_finetune ? "finetuned.ckpt" : "probed.ckpt";
    model.save((dir / name).string(), scaler_extra(data));
    report.write_csv((dir / "report.csv").string());
    write_metrics_csv(dir / "metrics.csv", data.table.name, data.horizon, test);
    std::cout << "test mse " << test.mse << " mae " << test.mae << "\n";
    return 0;
}

int cmd_transfer(const GlobalArgs& g, const std::string& trunk_path, const std::string& mode) {
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    Dataset data = build_dataset(cfg, load_or_synth(cfg));
    Model source = Model::load(trunk_path);
    const TransferMode tm = mode == "lp_then_ft" ? TransferMode::LpThenFt : TransferMode::Probe;
    auto [model, report] = transfer(source, data, tm, cfg.train_config());
    Metrics test = evaluate_test(model, data, cfg.raw_scale_metrics);
    report.test_mse = test.mse;
    report.test_mae = test.mae;

    model.save((dir / "transferred.ckpt").string(), scaler_extra(data));
    report.write_csv((dir / "report.csv").string());
    write_metrics_csv(dir / "metrics.csv", data.table.name, data.horizon, test);
    std::cout << "transfer (" << mode << ") test mse " << test.mse << " mae " << test.mae << "\n";
    return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& ckpt_path, bool raw_scale) {
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    Model model = Model::load(ckpt_path);
    RunConfig eval_cfg = cfg;
    eval_cfg.lookback = model.config().lookback;
    eval_cfg.horizon = model.config().horizon;
    Dataset data = build_dataset(eval_cfg, load_or_synth(eval_cfg));
    Metrics test = evaluate_test(model, data, raw_scale || cfg.raw_scale_metrics);
    write_metrics_csv(dir / "metrics.csv", data.table.name, data.horizon, test);
    std::cout << "test mse " << test.mse << " mae " << test.mae << "\n";
    return 0;
}

int cmd_predict(const GlobalArgs& g, const std::string& ckpt_path, const std::string& input_csv) {
    fs::path dir = ensure_out_dir(g);
    std::map<std::string, std::vector<double>> extra;
    Model model = Model::load(ckpt_path, &extra);
    SeriesTable table = load_csv(input_csv);

    const std::size_t L = model.config().lookback;
    const std::size_t M = table.channels();
    if (table.timesteps() < L)
        throw ConfigError("predict: input has " + std::to_string(table.timesteps()) +
                          " rows, need at least the look-back " + std::to_string(L));

    const bool scaled = extra.count("scaler.mean") && extra.at("scaler.mean").size() == M;
    Tensor x = Tensor::zeros({1, M, L});
    const std::size_t start = table.timesteps() - L;
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < L; ++t) {
            double v = table.value(start + t, m);
            if (scaled) v = (v - extra["scaler.mean"][m]) / extra["scaler.std"][m];
            x.at({0, m, t}) = v;
        }

    Rng rng(0);
    Tensor pred = model.forward_supervised(x, false, rng);

    ResultTable out;
    out.header = {"channel", "step", "value"};
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < model.config().horizon; ++t) {
            double v = pred.at({0, m, t});
            if (scaled) v = v * extra["scaler.std"][m] + extra["scaler.mean"][m];
            out.rows.push_back({table.channel_names[m], std::to_string(t + 1), format_metric(v)});
        }
    fs::path path = dir / "predictions.csv";
    out.write_csv(path.string());
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_sweep(const GlobalArgs& g, const std::string& axis, const std::string& values) {
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    SweepAxis ax = sweep_axis_from_string(axis);
    ResultTable table = run_sweep(cfg, ax, parse_value_list(values));
    fs::path path = dir / ("sweep_" + axis + ".csv");
    table.write_csv(path.string());
    std::cout << table.to_csv();
    return 0;
}

int cmd_ablate(const GlobalArgs& g, const std::string& axis) {
    if (axis != "variant") throw ConfigError("ablate: only '--axis variant' is supported");
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    ResultTable table = run_ablation(cfg);
    table.write_csv((dir / "ablation.csv").string());
    std::cout << table.to_csv();
    return 0;
}

int cmd_bench(const GlobalArgs& g, const std::string& datasets, const std::string& horizons) {
    RunConfig cfg = load_run_config(g);
    fs::path dir = ensure_out_dir(g);
    std::vector<std::string> paths;
    {
        std::stringstream ss(datasets);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) paths.push_back(item);
    }
    if (paths.empty()) paths.push_back(cfg.dataset);  // empty string -> synthetic
    std::vector<std::size_t> hs;
    for (double v : parse_value_list(horizons)) hs.push_back(static_cast<std::size_t>(v));
    ResultTable table = run_benchmark(cfg, paths, hs);
    table.write_csv((dir / "benchmark.csv").string());
    std::cout << table.to_csv();
    return 0;
}

int cmd_export_attn(const GlobalArgs& g, const std::string& ckpt_path, const std::string& input_csv) {
    fs::path dir = ensure_out_dir(g);
    std::map<std::string, std::vector<double>> extra;
    Model model = Model::load(ckpt_path, &extra);
    SeriesTable table = load_csv(input_csv);

    const std::size_t L = model.config().lookback;
    const std::size_t M = table.channels();
    if (table.timesteps() < L)
        throw ConfigError("export-attn: input shorter than the look-back window");

    const bool scaled = extra.count("scaler.mean") && extra.at("scaler.mean").size() == M;
    Tensor x = Tensor::zeros({1, M, L});
    const std::size_t start = table.timesteps() - L;
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < L; ++t) {
            double v = table.value(start + t, m);
            if (scaled) v = (v - extra["scaler.mean"][m]) / extra["scaler.std"][m];
            x.at({0, m, t}) = v;
        }

    auto maps = model.export_attention(x);
    const std::size_t N = model.config().n_patches();
    for (std::size_t m = 0; m < M; ++m) {
        fs::path path = dir / ("attn_ch" + std::to_string(m) + ".csv");
        std::ofstream out(path);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
                if (j) out << ',';
                out << format_metric(maps[m][i * N + j]);
            }
            out << '\n';
        }
    }
    std::cout << "wrote " << M << " attention maps (" << N << "x" << N << ") to " << dir.string()
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"patch-based time-series transformer: training, pretraining and evaluation"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "run configuration file (key = value lines)");
    app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--set", g.overrides, "override a config key (key=value, repeatable)");
    auto* seed_opt = app.add_option("--seed", g.seed, "override the run seed");

    std::string output, trunk, ckpt, input, mode = "probe", axis, values, datasets, horizons;
    bool raw_scale = false;

    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic CSV");
    synth->add_option("--output", output, "output CSV path (default <out>/<name>.csv)");

    app.add_subcommand("train", "supervised training");

    app.add_subcommand("pretrain", "masked self-supervised pretraining");

    auto* probe = app.add_subcommand("probe", "linear probe on a frozen pretrained trunk");
    probe->add_option("--trunk", trunk, "pretrained checkpoint")->required();

    auto* finetune = app.add_subcommand("finetune", "linear probe then end-to-end fine-tuning");
    finetune->add_option("--trunk", trunk, "pretrained checkpoint")->required();

    auto* transfer_cmd = app.add_subcommand("transfer", "reuse a pretrained trunk on another dataset");
    transfer_cmd->add_option("--trunk", trunk, "source checkpoint")->required();
    transfer_cmd->add_option("--mode", mode, "probe | lp_then_ft")->capture_default_str();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval_cmd->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    eval_cmd->add_flag("--raw-scale", raw_scale, "metrics on the unstandardized scale");

    auto* predict = app.add_subcommand("predict", "forecast the last look-back window of a CSV");
    predict->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    predict->add_option("--input", input, "input CSV")->required();

    auto* sweep = app.add_subcommand("sweep", "one training run per axis value");
    sweep->add_option("--axis", axis, "look_back | patch_len | train_fraction | seed | horizon")
        ->required();
    sweep->add_option("--values", values, "comma-separated axis values")->required();

    auto* ablate = app.add_subcommand("ablate", "patching / channel-independence ablation");
    ablate->add_option("--axis", axis, "must be 'variant'")->required();

    auto* bench = app.add_subcommand("bench", "metrics per (dataset, horizon)");
    bench->add_option("--datasets", datasets, "comma-separated CSV paths (empty = synthetic)");
    bench->add_option("--horizons", horizons, "comma-separated horizons")->required();

    auto* export_attn = app.add_subcommand("export-attn", "averaged attention maps as CSV");
    export_attn->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    export_attn->add_option("--input", input, "input CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // usage problems exit 1; --help stays 0
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        if (synth->parsed()) return cmd_synth(g, output);
        if (app.get_subcommand("train")->parsed()) return cmd_train(g);
        if (app.get_subcommand("pretrain")->parsed()) return cmd_pretrain(g);
        if (probe->parsed()) return cmd_probe_or_finetune(g, trunk, false);
        if (finetune->parsed()) return cmd_probe_or_finetune(g, trunk, true);
        if (transfer_cmd->parsed()) return cmd_transfer(g, trunk, mode);
        if (eval_cmd->parsed()) return cmd_eval(g, ckpt, raw_scale);
        if (predict->parsed()) return cmd_predict(g, ckpt, input);
        if (sweep->parsed()) return cmd_sweep(g, axis, values);
        if (ablate->parsed()) return cmd_ablate(g, axis);
        if (bench->parsed()) return cmd_bench(g, datasets, horizons);
        if (export_attn->parsed()) return cmd_export_attn(g, ckpt, input);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
