#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patchcast/model.hpp"
#include "patchcast/series.hpp"
#include "patchcast/train.hpp"

namespace patchcast {

// Every experiment switch in one place. Defaults are the supervised
// PatchTST/42-style preset: L=336, P=16, S=8, D=128, H=16, F=256, 3 layers,
// dropout 0.2. Parsed from line-oriented "key = value" text; unknown keys
// are hard errors.
struct RunConfig {
    // data
    std::string dataset;       // CSV path; empty -> seeded synthetic data
    std::string dataset_name;  // output label; defaults to the table name
    double train_frac = 0.7;
    double val_frac = 0.1;
    double test_frac = 0.2;
    std::string split_mode = "fractions";  // fractions | ett_hourly | ett_minutely | explicit
    std::size_t split_train_end = 0;
    std::size_t split_val_end = 0;
    std::size_t split_test_end = 0;
    bool standardize = true;
    bool raw_scale_metrics = false;

    // model
    std::size_t lookback = 336;
    std::size_t horizon = 96;
    std::size_t patch_len = 16;
    std::size_t stride = 8;
    std::size_t d_model = 128;
    std::size_t heads = 16;
    std::size_t ffn_dim = 256;
    std::size_t layers = 3;
    double dropout = 0.2;
    std::string channel_mode = "independent";  // independent | mixing
    bool instance_norm = true;
    bool loss_on_normalized = false;

    // training
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t patience = 5;
    std::uint64_t seed = 2021;
    double mask_ratio = 0.4;
    bool pretrain_loss_all_patches = false;
    std::size_t probe_epochs = 20;
    std::size_t lp_epochs = 10;
    std::size_t ft_epochs = 20;
    double train_fraction = 1.0;

    // synthetic data (independent seed so training-seed sweeps reuse the data)
    std::size_t synth_channels = 4;
    std::size_t synth_timesteps = 5000;
    std::uint64_t synth_seed = 7;
    std::string synth_periods = "24,97,200";
    double synth_noise = 0.1;
    double synth_trend = 0.0;
    double synth_coupling = 0.0;

    // resources
    std::size_t mem_budget_mb = 4096;
    std::size_t jobs = 1;

    void validate() const;

    SplitSpec split_spec() const;
    SynthSpec synth_spec() const;
    TrainConfig train_config() const;
    // Model for this run; n_channels only matters in mixing mode.
    ModelConfig model_config(HeadKind head, std::size_t n_channels) const;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

// Apply one "key=value" override (CLI flags override file values).
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Full key/value dump; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);

}  // namespace patchcast
