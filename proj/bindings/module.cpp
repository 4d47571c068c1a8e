#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <map>
#include <sstream>

#include "patchcast/experiments.hpp"

namespace py = pybind11;
using namespace patchcast;

namespace {

using NpArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_numpy(const NpArray& arr) {
    Shape shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<std::size_t>(arr.shape(i));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor::from_vector(std::move(shape), std::move(data));
}

py::array_t<double> numpy_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

RunConfig config_from_dict(const py::dict& overrides) {
    RunConfig cfg;
    for (auto item : overrides)
        apply_override(cfg, py::str(item.first).cast<std::string>(),
                       py::str(item.second).cast<std::string>());
    cfg.validate();
    return cfg;
}

// Loaded checkpoint plus the standardizer it was trained with.
struct Forecaster {
    Model model;
    std::map<std::string, std::vector<double>> extra;

    static Forecaster load(const std::string& path) {
        std::map<std::string, std::vector<double>> extra;
        Model m = Model::load(path, &extra);
        return {std::move(m), std::move(extra)};
    }

    bool has_scaler(std::size_t channels) const {
        auto it = extra.find("scaler.mean");
        return it != extra.end() && it->second.size() == channels;
    }

    // x [M, L] in the original data scale -> forecasts [M, T] in the same scale
    py::array_t<double> predict(const NpArray& x) {
        if (x.ndim() != 2) throw ShapeError("predict: expected a [channels, lookback] array");
        const std::size_t M = x.shape(0), L = x.shape(1);
        if (L != model.config().lookback)
            throw ShapeError("predict: look-back " + std::to_string(L) + " does not match the model (" +
                             std::to_string(model.config().lookback) + ")");
        const bool scaled = has_scaler(M);
        Tensor in = Tensor::zeros({1, M, L});
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t t = 0; t < L; ++t) {
                double v = x.data()[m * L + t];
                if (scaled) v = (v - extra.at("scaler.mean")[m]) / extra.at("scaler.std")[m];
                in.at({0, m, t}) = v;
            }
        Rng rng(0);
        Tensor pred = model.forward_supervised(in, false, rng);
        const std::size_t T = model.config().horizon;
        py::array_t<double> out({static_cast<py::ssize_t>(M), static_cast<py::ssize_t>(T)});
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t t = 0; t < T; ++t) {
                double v = pred.at({0, m, t});
                if (scaled) v = v * extra.at("scaler.std")[m] + extra.at("scaler.mean")[m];
                out.mutable_data()[m * T + t] = v;
            }
        return out;
    }

    // averaged attention maps, one [N, N] array per channel
    std::vector<py::array_t<double>> attention(const NpArray& x) {
        if (x.ndim() != 2) throw ShapeError("attention: expected a [channels, lookback] array");
        const std::size_t M = x.shape(0), L = x.shape(1);
        const bool scaled = has_scaler(M);
        Tensor in = Tensor::zeros({1, M, L});
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t t = 0; t < L; ++t) {
                double v = x.data()[m * L + t];
                if (scaled) v = (v - extra.at("scaler.mean")[m]) / extra.at("scaler.std")[m];
                in.at({0, m, t}) = v;
            }
        auto maps = model.export_attention(in);
        const py::ssize_t N = static_cast<py::ssize_t>(model.config().n_patches());
        std::vector<py::array_t<double>> out;
        for (auto& map : maps) {
            py::array_t<double> arr({N, N});
            std::copy(map.begin(), map.end(), arr.mutable_data());
            out.push_back(std::move(arr));
        }
        return out;
    }

    py::dict config() const {
        const ModelConfig& c = model.config();
        py::dict d;
        d["lookback"] = c.lookback;
        d["horizon"] = c.horizon;
        d["patch_len"] = c.patch_len;
        d["stride"] = c.stride;
        d["n_patches"] = c.n_patches();
        d["d_model"] = c.d_model;
        d["heads"] = c.heads;
        d["ffn_dim"] = c.ffn_dim;
        d["layers"] = c.layers;
        d["dropout"] = c.dropout;
        d["channel_mode"] =
            c.channel_mode == ChannelMode::Mixing ? std::string("mixing") : std::string("independent");
        d["instance_norm"] = c.instance_norm;
        d["head"] = c.head == HeadKind::Forecast ? std::string("forecast") : std::string("reconstruct");
        return d;
    }
};

}  // namespace

PYBIND11_MODULE(_patchcast, m) {
    m.doc() = "patch-based channel-independent time-series transformer (C++ core)";

    m.def(
        "patch_count",
        [](std::size_t lookback, std::size_t patch_len, std::size_t stride) {
            return PatchConfig{patch_len, stride, PatchMode::PaddedOverlap}.patch_count(lookback);
        },
        py::arg("lookback"), py::arg("patch_len"), py::arg("stride"),
        "Number of padded overlapping patches: floor((L-P)/S) + 2.");

    m.def(
        "patch_count_nonoverlap",
        [](std::size_t lookback, std::size_t patch_len) {
            return PatchConfig{patch_len, patch_len, PatchMode::NonOverlapTruncate}.patch_count(lookback);
        },
        py::arg("lookback"), py::arg("patch_len"),
        "Number of non-overlapping patches: floor(L/P); the remainder is dropped.");

    m.def(
        "patchify",
        [](const NpArray& x, std::size_t patch_len, std::size_t stride) {
            if (x.ndim() != 1) throw ShapeError("patchify: expected a 1-D series");
            PatchConfig cfg{patch_len, stride, PatchMode::PaddedOverlap};
            auto out = patchify(std::span<const double>(x.data(), x.size()), cfg);
            const std::size_t N = cfg.patch_count(x.size());
            py::array_t<double> arr({static_cast<py::ssize_t>(patch_len), static_cast<py::ssize_t>(N)});
            std::copy(out.begin(), out.end(), arr.mutable_data());
            return arr;
        },
        py::arg("x"), py::arg("patch_len"), py::arg("stride"),
        "Split a series into [P, N] patches, padding S copies of the last value.");

    m.def(
        "patchify_nonoverlap",
        [](const NpArray& x, std::size_t patch_len) {
            if (x.ndim() != 1) throw ShapeError("patchify: expected a 1-D series");
            PatchConfig cfg{patch_len, patch_len, PatchMode::NonOverlapTruncate};
            auto out = patchify(std::span<const double>(x.data(), x.size()), cfg);
            const std::size_t N = cfg.patch_count(x.size());
            py::array_t<double> arr({static_cast<py::ssize_t>(patch_len), static_cast<py::ssize_t>(N)});
            std::copy(out.begin(), out.end(), arr.mutable_data());
            return arr;
        },
        py::arg("x"), py::arg("patch_len"));

    m.def(
        "instance_normalize",
        [](const NpArray& x) {
            if (x.ndim() != 2) throw ShapeError("instance_normalize: expected [channels, length]");
            const std::size_t M = x.shape(0), L = x.shape(1);
            std::vector<double> buf(x.data(), x.data() + x.size());
            std::vector<double> mean(M), sd(M);
            instance_normalize(buf, M, L, mean, sd);
            py::array_t<double> xn({static_cast<py::ssize_t>(M), static_cast<py::ssize_t>(L)});
            std::copy(buf.begin(), buf.end(), xn.mutable_data());
            return py::make_tuple(xn, py::array_t<double>(M, mean.data()),
                                  py::array_t<double>(M, sd.data()));
        },
        py::arg("x"), "Per-channel zero-mean/unit-std scaling; returns (x_norm, mean, std).");

    m.def(
        "instance_denormalize",
        [](const NpArray& y, const NpArray& mean, const NpArray& sd) {
            if (y.ndim() != 2) throw ShapeError("instance_denormalize: expected [channels, length]");
            const std::size_t M = y.shape(0), T = y.shape(1);
            std::vector<double> buf(y.data(), y.data() + y.size());
            instance_denormalize(buf, M, T, std::span<const double>(mean.data(), M),
                                 std::span<const double>(sd.data(), M));
            py::array_t<double> out({static_cast<py::ssize_t>(M), static_cast<py::ssize_t>(T)});
            std::copy(buf.begin(), buf.end(), out.mutable_data());
            return out;
        },
        py::arg("y"), py::arg("mean"), py::arg("std"));

    m.def(
        "softmax",
        [](const NpArray& x) { return numpy_from_tensor(softmax_lastdim(tensor_from_numpy(x))); },
        py::arg("x"), "Numerically stable softmax over the last axis.");

    m.def(
        "gelu", [](const NpArray& x) { return numpy_from_tensor(gelu(tensor_from_numpy(x))); },
        py::arg("x"), "Exact GELU (erf form).");

    m.def(
        "mse_mae",
        [](const NpArray& pred, const NpArray& target) {
            Metrics m = metric_mse_mae(tensor_from_numpy(pred), tensor_from_numpy(target));
            return py::make_tuple(m.mse, m.mae);
        },
        py::arg("pred"), py::arg("target"), "Element-wise MSE and MAE over [n, M, T] arrays.");

    m.def(
        "synth",
        [](std::size_t channels, std::size_t timesteps, std::uint64_t seed,
           const std::vector<double>& periods, double noise, double trend, double coupling) {
            SynthSpec spec;
            spec.channels = channels;
            spec.timesteps = timesteps;
            spec.seed = seed;
            if (!periods.empty()) spec.base_periods = periods;
            spec.noise_sigma = noise;
            spec.trend = trend;
            spec.coupling = coupling;
            SeriesTable t = synth_generate(spec);
            py::array_t<double> out(
                {static_cast<py::ssize_t>(t.timesteps()), static_cast<py::ssize_t>(t.channels())});
            std::copy(t.values.begin(), t.values.end(), out.mutable_data());
            return out;
        },
        py::arg("channels") = 2, py::arg("timesteps") = 1000, py::arg("seed") = 7,
        py::arg("periods") = std::vector<double>{}, py::arg("noise") = 0.1, py::arg("trend") = 0.0,
        py::arg("coupling") = 0.0,
        "Seeded synthetic multivariate series as a [timesteps, channels] array.");

    m.def("default_config", [] {
        py::dict d;
        std::istringstream in(serialize_config(RunConfig{}));
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find(" = ");
            if (eq != std::string::npos) d[py::str(line.substr(0, eq))] = line.substr(eq + 3);
        }
        return d;
    });

    m.def(
        "train_supervised_run",
        [](const py::dict& overrides, const std::string& out_dir) {
            RunConfig cfg = config_from_dict(overrides);
            RunResult r = run_supervised_once(cfg);
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                r.model.save(out_dir + "/model.ckpt");
                r.report.write_csv(out_dir + "/report.csv");
            }
            py::dict d;
            d["test_mse"] = r.test.mse;
            d["test_mae"] = r.test.mae;
            d["best_epoch"] = r.report.best_epoch;
            d["best_val_loss"] = r.report.best_val_loss;
            py::list train_losses, val_losses;
            for (const auto& e : r.report.epochs) {
                train_losses.append(e.train_loss);
                val_losses.append(e.val_loss);
            }
            d["train_loss"] = train_losses;
            d["val_loss"] = val_losses;
            return d;
        },
        py::arg("overrides") = py::dict(), py::arg("out_dir") = std::string(),
        "One supervised training run from config overrides; returns the report as a dict.");

    py::class_<Forecaster>(m, "Forecaster")
        .def_static("load", &Forecaster::load, py::arg("path"))
        .def("predict", &Forecaster::predict, py::arg("x"))
        .def("attention", &Forecaster::attention, py::arg("x"))
        .def("config", &Forecaster::config);

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<TrainError>(m, "TrainError", PyExc_RuntimeError);
}
