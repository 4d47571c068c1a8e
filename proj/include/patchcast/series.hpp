#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patchcast/errors.hpp"
#include "patchcast/rng.hpp"

namespace patchcast {

// A named multivariate series: `values` is row-major [timesteps][channels].
struct SeriesTable {
    std::string name;
    std::string time_column = "date";
    std::vector<std::string> timestamps;
    std::vector<double> values;
    std::vector<std::string> channel_names;

    std::size_t timesteps() const { return timestamps.size(); }
    std::size_t channels() const { return channel_names.size(); }
    double value(std::size_t t, std::size_t m) const { return values[t * channels() + m]; }
    double& value(std::size_t t, std::size_t m) { return values[t * channels() + m]; }
};

// CSV: UTF-8, comma separated, header row; first column is an opaque
// timestamp string, the remaining columns are float channels.
SeriesTable load_csv(const std::string& path);
void save_csv(const SeriesTable& table, const std::string& path);

struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

// Chronological split, either by fractions of the timestep count or by
// explicit boundary indices (ETT-style fixed month boundaries).
struct SplitSpec {
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    double test_fraction = 0.2;
    bool explicit_bounds = false;
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t test_end = 0;

    static SplitSpec fractions(double train, double val, double test);
    static SplitSpec boundaries(std::size_t train_end, std::size_t val_end, std::size_t test_end);
};

struct Splits {
    Range train, val, test;
};

// Boundaries at floor(fraction * timesteps); val and test start L steps
// early so their first window has a full look-back.
Splits chrono_split(const SeriesTable& table, const SplitSpec& spec, std::size_t lookback,
                    std::size_t horizon);

// Per-channel z-scoring fitted on the train rows only (population std,
// floored at 1e-8).
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std_dev;

    static Standardizer fit(const SeriesTable& table, Range train);
    void apply(SeriesTable& table) const;
    void invert(SeriesTable& table) const;
};

// One (look-back, horizon) instance. x is [M][L], y is [M][T], both
// channel-major. inst_mean/inst_std are filled by instance normalization.
struct WindowSample {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> inst_mean;
    std::vector<double> inst_std;
};

std::size_t window_count(std::size_t range_len, std::size_t lookback, std::size_t horizon,
                         std::size_t stride = 1);

// Start offsets of every window whose x and y both fit inside `range`.
// Throws unless the range holds at least one window (or allow_empty).
std::vector<std::size_t> window_starts(Range range, std::size_t lookback, std::size_t horizon,
                                       std::size_t stride = 1, bool allow_empty = false);

WindowSample make_window(const SeriesTable& table, std::size_t start, std::size_t lookback,
                         std::size_t horizon);

// Per-channel zero-mean/unit-std scaling of an [M][L] buffer in place;
// population std, epsilon 1e-5 added to the std. Stats are written out so
// predictions can be mapped back.
inline constexpr double kInstanceNormEps = 1e-5;
void instance_normalize(std::span<double> x, std::size_t channels, std::size_t length,
                        std::span<double> mean_out, std::span<double> std_out);
void instance_denormalize(std::span<double> y, std::size_t channels, std::size_t length,
                          std::span<const double> mean, std::span<const double> std_dev);

// Seeded synthetic series: per channel a sum of sinusoids plus linear trend
// and Gaussian noise, optionally coupled to one shared component.
struct Sinusoid {
    double period = 24.0;
    double amplitude = 1.0;
    double phase = 0.0;
};

struct SynthChannel {
    std::vector<Sinusoid> waves;
    double trend = 0.0;
    double noise_sigma = 0.0;
};

struct SynthSpec {
    std::size_t channels = 2;
    std::size_t timesteps = 2000;
    std::uint64_t seed = 2021;
    std::vector<SynthChannel> channel_specs;  // empty -> randomized from base_periods
    std::vector<double> base_periods{24.0, 97.0};
    double trend = 0.0;
    double noise_sigma = 0.1;
    double coupling = 0.0;  // in [0, 1]
    Sinusoid shared{163.0, 1.0, 0.0};
    std::string name = "synth";
};

SeriesTable synth_generate(const SynthSpec& spec);

}  // namespace patchcast
