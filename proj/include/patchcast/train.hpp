#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "patchcast/model.hpp"
#include "patchcast/series.hpp"

namespace patchcast {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t patience = 5;  // epochs without val improvement; 0 disables
    std::uint64_t seed = 2021;
    double mask_ratio = 0.4;
    bool pretrain_loss_all_patches = false;  // ablation switch; default masked-only
    std::size_t probe_epochs = 20;
    std::size_t lp_epochs = 10;
    std::size_t ft_epochs = 20;
    double train_fraction = 1.0;
    bool loss_on_normalized = false;  // supervised loss space when instance norm is on

    void validate() const;
};

struct EpochStats {
    std::size_t epoch;
    double train_loss;
    double val_loss;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    double test_mse = 0.0;
    double test_mae = 0.0;
    double wall_seconds = 0.0;  // informational; never serialized
    std::uint64_t seed = 0;
    std::vector<std::size_t> stage_bounds;  // cumulative epoch indices of stage ends

    // epoch,train_loss,val_loss rows plus a '#' summary line
    void write_csv(const std::string& path) const;
};

// A standardized table plus window enumeration for each role.
struct Dataset {
    SeriesTable table;
    Standardizer scaler;
    bool standardized = false;
    Splits splits;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::vector<std::size_t> train_starts, val_starts, test_starts;

    std::size_t channels() const { return table.channels(); }

    // Standardizes in place (train-rows stats), splits chronologically and
    // enumerates stride-1 windows. train_fraction < 1 drops the oldest train
    // windows, keeping at least one; val/test are untouched.
    static Dataset make(SeriesTable raw, const SplitSpec& split, std::size_t lookback,
                        std::size_t horizon, bool standardize = true, double train_fraction = 1.0);
};

// Materialize windows as [B, M, L] / [B, M, T] tensors.
Tensor gather_x(const Dataset& data, std::span<const std::size_t> starts);
Tensor gather_y(const Dataset& data, std::span<const std::size_t> starts);

// Mean squared error over [B, M, T]; identical shapes required.
Tensor supervised_loss(const Tensor& pred, const Tensor& target);

// MSE over the masked patch elements only; visible patches contribute zero
// loss and exactly zero gradient. recon/target are [B, M, P, N], the mask has
// one row per (batch, channel). Throws on an empty mask (degenerate
// objective). all_patches widens the average to every element (ablation).
Tensor pretrain_loss(const Tensor& recon, const Tensor& target, const PatchMask& mask,
                     bool all_patches = false);

// Adam with bias correction; one slot per parameter, updates in parameter
// order for determinism.
class Adam {
public:
    Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps);

    void zero_grad();
    void step();

private:
    struct Slot {
        Tensor param;
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

// Supervised training with per-epoch validation, early stopping and
// best-validation restore. The model is updated in place.
TrainReport train_supervised(Model& model, const Dataset& data, const TrainConfig& cfg);

// Masked pretraining of trunk + reconstruction head. Mask seeds derive from
// (seed, epoch, row) so the schedule is reproducible; validation masks are
// fixed across epochs.
TrainReport pretrain(Model& model, const Dataset& data, const TrainConfig& cfg);

// Freshly initializes a forecast head for (N, horizon) and trains only the
// head; the trunk runs in eval mode so not a single trunk value (BN state
// included) changes.
TrainReport linear_probe(Model& model, const Dataset& data, const TrainConfig& cfg,
                         std::optional<std::size_t> epochs_override = std::nullopt);

// Two-stage schedule: linear probing (lp_epochs) then end-to-end fine-tuning
// (ft_epochs) with best-validation restore over the second stage.
TrainReport finetune_lp_then_ft(Model& model, const Dataset& data, const TrainConfig& cfg);

enum class TransferMode { Probe, LpThenFt };

// Copy the trunk of `source` into a model rebuilt for the target dataset's
// horizon, then probe or LP->FT on the target.
std::pair<Model, TrainReport> transfer(const Model& source, const Dataset& target, TransferMode mode,
                                       const TrainConfig& cfg);

// Eval-mode predictions over a window list: (pred [n, M, T], target [n, M, T]).
std::pair<Tensor, Tensor> predict_windows(Model& model, const Dataset& data,
                                          std::span<const std::size_t> starts,
                                          std::size_t batch_size = 64);

}  // namespace patchcast
