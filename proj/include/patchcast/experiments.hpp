#pragma once

#include <string>
#include <utility>
#include <vector>

#include "patchcast/metrics.hpp"
#include "patchcast/runconfig.hpp"

namespace patchcast {

// Small tabular result with deterministic CSV output (doubles at %.17g).
struct ResultTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const;
    void write_csv(const std::string& path) const;
};

std::string format_metric(double v);

// Dataset path from the config, or the seeded synthetic table when empty.
SeriesTable load_or_synth(const RunConfig& cfg);
Dataset build_dataset(const RunConfig& cfg, SeriesTable table);

struct RunResult {
    Model model;
    TrainReport report;
    Metrics test;
};

// One supervised run end to end: data, training, test metrics.
RunResult run_supervised_once(const RunConfig& cfg);

// Test-split metrics; raw_scale inverts the train-fit standardizer first.
Metrics evaluate_test(Model& model, const Dataset& data, bool raw_scale);

// One row per (dataset, horizon). A missing dataset file skips its rows with
// a notice on stderr instead of failing the whole table.
ResultTable run_benchmark(const RunConfig& base, const std::vector<std::string>& datasets,
                          const std::vector<std::size_t>& horizons);

// The four patching/channel-independence variants. All returned configs are
// identical to the base except (patch_len, stride, channel_mode); that
// invariant is checked programmatically.
std::vector<std::pair<std::string, RunConfig>> ablation_variants(const RunConfig& base);

// Rows P+CI / CI / P / original; a variant whose estimated training-step
// memory exceeds mem_budget_mb is reported as "-" instead of running.
ResultTable run_ablation(const RunConfig& base);

enum class SweepAxis { LookBack, PatchLen, TrainFraction, Seed, Horizon };
SweepAxis sweep_axis_from_string(const std::string& name);

// One training run per value (cells may run in parallel with cfg.jobs). The
// seed axis appends population mean/std summary rows.
ResultTable run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<double>& values);

// Approximate peak bytes of one training step (tape tensors + gradients +
// optimizer state); used for the ablation memory budget.
std::size_t estimate_train_step_bytes(const ModelConfig& cfg, std::size_t batch_windows,
                                      std::size_t n_channels);

}  // namespace patchcast
