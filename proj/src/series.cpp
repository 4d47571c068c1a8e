#include "patchcast/series.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

namespace patchcast {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string cell = trim(raw);
    if (cell.empty())
        throw IoError("csv: blank cell at row " + std::to_string(row) + ", column " +
                      std::to_string(col));
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size())
        throw IoError("csv: unparseable numeric cell '" + cell + "' at row " + std::to_string(row) +
                      ", column " + std::to_string(col));
    return v;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

SeriesTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("csv: cannot open '" + path + "'");

    SeriesTable table;
    {
        const auto slash = path.find_last_of('/');
        std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
        const auto dot = base.find_last_of('.');
        table.name = dot == std::string::npos ? base : base.substr(0, dot);
    }

    std::string line;
    if (!std::getline(in, line)) throw IoError("csv: empty file '" + path + "'");
    auto header = split_line(line);
    if (header.size() < 2)
        throw IoError("csv: need a timestamp column plus at least one channel in '" + path + "'");
    table.time_column = trim(header[0]);
    for (std::size_t i = 1; i < header.size(); ++i) table.channel_names.push_back(trim(header[i]));

    const std::size_t M = table.channel_names.size();
    std::size_t row = 1;  // header was row 0
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != M + 1)
            throw IoError("csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                          " cells, expected " + std::to_string(M + 1));
        table.timestamps.push_back(trim(cells[0]));
        for (std::size_t c = 0; c < M; ++c) table.values.push_back(parse_cell(cells[c + 1], row, c + 1));
        ++row;
    }
    if (table.timesteps() < 2)
        throw IoError("csv: '" + path + "' has " + std::to_string(table.timesteps()) +
                      " data rows, need at least 2");
    return table;
}

void save_csv(const SeriesTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("csv: cannot write '" + path + "'");
    out << table.time_column;
    for (const auto& name : table.channel_names) out << ',' << name;
    out << '\n';
    for (std::size_t t = 0; t < table.timesteps(); ++t) {
        out << table.timestamps[t];
        for (std::size_t m = 0; m < table.channels(); ++m) out << ',' << format_double(table.value(t, m));
        out << '\n';
    }
}

SplitSpec SplitSpec::fractions(double train, double val, double test) {
    SplitSpec s;
    s.train_fraction = train;
    s.val_fraction = val;
    s.test_fraction = test;
    return s;
}

SplitSpec SplitSpec::boundaries(std::size_t train_end, std::size_t val_end, std::size_t test_end) {
    SplitSpec s;
    s.explicit_bounds = true;
    s.train_end = train_end;
    s.val_end = val_end;
    s.test_end = test_end;
    return s;
}

Splits chrono_split(const SeriesTable& table, const SplitSpec& spec, std::size_t lookback,
                    std::size_t horizon) {
    const std::size_t n = table.timesteps();
    std::size_t train_end, val_end, test_end;
    if (spec.explicit_bounds) {
        if (!(spec.train_end < spec.val_end && spec.val_end < spec.test_end))
            throw ConfigError("split: explicit boundaries must be increasing");
        if (spec.test_end > n)
            throw ConfigError("split: boundary " + std::to_string(spec.test_end) + " exceeds " +
                              std::to_string(n) + " timesteps");
        train_end = spec.train_end;
        val_end = spec.val_end;
        test_end = spec.test_end;
    } else {
        const double total = spec.train_fraction + spec.val_fraction + spec.test_fraction;
        if (spec.train_fraction <= 0 || spec.val_fraction < 0 || spec.test_fraction < 0 ||
            std::abs(total - 1.0) > 1e-9)
            throw ConfigError("split: fractions must be nonnegative and sum to 1, got " +
                              std::to_string(total));
        train_end = static_cast<std::size_t>(std::floor(spec.train_fraction * n));
        val_end = train_end + static_cast<std::size_t>(std::floor(spec.val_fraction * n));
        test_end = n;
    }

    Splits out;
    out.train = {0, train_end};
    out.val = {train_end > lookback ? train_end - lookback : 0, val_end};
    out.test = {val_end > lookback ? val_end - lookback : 0, test_end};

    const std::size_t need = lookback + horizon;
    if (out.train.size() < need || out.val.size() < need || out.test.size() < need)
        throw ConfigError("split: every role needs at least L+T=" + std::to_string(need) +
                          " steps (train=" + std::to_string(out.train.size()) +
                          ", val=" + std::to_string(out.val.size()) +
                          ", test=" + std::to_string(out.test.size()) + ")");
    return out;
}

Standardizer Standardizer::fit(const SeriesTable& table, Range train) {
    const std::size_t M = table.channels();
    Standardizer s;
    s.mean.assign(M, 0.0);
    s.std_dev.assign(M, 0.0);
    const double n = static_cast<double>(train.size());
    for (std::size_t t = train.begin; t < train.end; ++t)
        for (std::size_t m = 0; m < M; ++m) s.mean[m] += table.value(t, m);
    for (std::size_t m = 0; m < M; ++m) s.mean[m] /= n;
    for (std::size_t t = train.begin; t < train.end; ++t)
        for (std::size_t m = 0; m < M; ++m) {
            const double d = table.value(t, m) - s.mean[m];
            s.std_dev[m] += d * d;
        }
    for (std::size_t m = 0; m < M; ++m) s.std_dev[m] = std::max(std::sqrt(s.std_dev[m] / n), 1e-8);
    return s;
}

void Standardizer::apply(SeriesTable& table) const {
    const std::size_t M = table.channels();
    if (mean.size() != M) throw ShapeError("standardizer: channel count mismatch");
    for (std::size_t t = 0; t < table.timesteps(); ++t)
        for (std::size_t m = 0; m < M; ++m)
            table.value(t, m) = (table.value(t, m) - mean[m]) / std_dev[m];
}

void Standardizer::invert(SeriesTable& table) const {
    const std::size_t M = table.channels();
    if (mean.size() != M) throw ShapeError("standardizer: channel count mismatch");
    for (std::size_t t = 0; t < table.timesteps(); ++t)
        for (std::size_t m = 0; m < M; ++m) table.value(t, m) = table.value(t, m) * std_dev[m] + mean[m];
}

std::size_t window_count(std::size_t range_len, std::size_t lookback, std::size_t horizon,
                         std::size_t stride) {
    if (range_len < lookback + horizon) return 0;
    return (range_len - lookback - horizon) / stride + 1;
}

std::vector<std::size_t> window_starts(Range range, std::size_t lookback, std::size_t horizon,
                                       std::size_t stride, bool allow_empty) {
    const std::size_t count = window_count(range.size(), lookback, horizon, stride);
    if (count == 0 && !allow_empty)
        throw ConfigError("windows: range of " + std::to_string(range.size()) +
                          " steps is too short for L+T=" + std::to_string(lookback + horizon));
    std::vector<std::size_t> starts(count);
    for (std::size_t i = 0; i < count; ++i) starts[i] = range.begin + i * stride;
    return starts;
}

WindowSample make_window(const SeriesTable& table, std::size_t start, std::size_t lookback,
                         std::size_t horizon) {
    const std::size_t M = table.channels();
    WindowSample w;
    w.x.resize(M * lookback);
    w.y.resize(M * horizon);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t t = 0; t < lookback; ++t) w.x[m * lookback + t] = table.value(start + t, m);
        for (std::size_t t = 0; t < horizon; ++t)
            w.y[m * horizon + t] = table.value(start + lookback + t, m);
    }
    return w;
}

void instance_normalize(std::span<double> x, std::size_t channels, std::size_t length,
                        std::span<double> mean_out, std::span<double> std_out) {
    for (std::size_t m = 0; m < channels; ++m) {
        double* row = x.data() + m * length;
        double mu = 0.0;
        for (std::size_t t = 0; t < length; ++t) mu += row[t];
        mu /= static_cast<double>(length);
        double var = 0.0;
        for (std::size_t t = 0; t < length; ++t) {
            const double d = row[t] - mu;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(length));
        const double denom = sd + kInstanceNormEps;
        for (std::size_t t = 0; t < length; ++t) row[t] = (row[t] - mu) / denom;
        mean_out[m] = mu;
        std_out[m] = sd;
    }
}

void instance_denormalize(std::span<double> y, std::size_t channels, std::size_t length,
                          std::span<const double> mean, std::span<const double> std_dev) {
    for (std::size_t m = 0; m < channels; ++m) {
        double* row = y.data() + m * length;
        const double scale = std_dev[m] + kInstanceNormEps;
        for (std::size_t t = 0; t < length; ++t) row[t] = row[t] * scale + mean[m];
    }
}

SeriesTable synth_generate(const SynthSpec& spec) {
    if (spec.channels == 0 || spec.timesteps < 2)
        throw ConfigError("synth: need at least 1 channel and 2 timesteps");
    if (spec.coupling < 0.0 || spec.coupling > 1.0)
        throw ConfigError("synth: coupling must be in [0, 1]");
    for (const auto& ch : spec.channel_specs) {
        if (ch.noise_sigma < 0) throw ConfigError("synth: noise sigma must be >= 0");
        for (const auto& w : ch.waves)
            if (w.period <= 0) throw ConfigError("synth: periods must be positive");
    }

    Rng rng(spec.seed);
    std::vector<SynthChannel> chans = spec.channel_specs;
    if (chans.empty()) {
        // randomized per-channel waves: jittered periods, random amp/phase
        for (std::size_t m = 0; m < spec.channels; ++m) {
            SynthChannel ch;
            for (double base : spec.base_periods) {
                Sinusoid w;
                w.period = base * rng.uniform(0.7, 1.4);
                w.amplitude = rng.uniform(0.5, 1.5);
                w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                ch.waves.push_back(w);
            }
            ch.trend = spec.trend;
            ch.noise_sigma = spec.noise_sigma;
            chans.push_back(ch);
        }
    } else if (chans.size() != spec.channels) {
        throw ConfigError("synth: channel_specs size does not match channel count");
    }

    SeriesTable table;
    table.name = spec.name;
    table.channel_names.reserve(spec.channels);
    for (std::size_t m = 0; m < spec.channels; ++m) table.channel_names.push_back("ch" + std::to_string(m));
    table.timestamps.reserve(spec.timesteps);
    table.values.resize(spec.timesteps * spec.channels);

    for (std::size_t t = 0; t < spec.timesteps; ++t) {
        table.timestamps.push_back(std::to_string(t));
        const double td = static_cast<double>(t);
        const double shared = spec.shared.amplitude *
                              std::sin(2.0 * std::numbers::pi * td / spec.shared.period + spec.shared.phase);
        for (std::size_t m = 0; m < spec.channels; ++m) {
            const SynthChannel& ch = chans[m];
            double v = ch.trend * td + spec.coupling * shared;
            for (const auto& w : ch.waves)
                v += w.amplitude * std::sin(2.0 * std::numbers::pi * td / w.period + w.phase);
            if (ch.noise_sigma > 0) v += rng.normal(0.0, ch.noise_sigma);
            table.values[t * spec.channels + m] = v;
        }
    }
    return table;
}

}  // namespace patchcast
