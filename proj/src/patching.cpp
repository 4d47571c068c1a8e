#include "patchcast/patching.hpp"

#include <cmath>

#include "patchcast/errors.hpp"
#include "patchcast/ops.hpp"

namespace patchcast {

void PatchConfig::validate() const {
    if (patch_len < 1 || stride < 1) throw ConfigError("patching: P and S must be >= 1");
    if (mode == PatchMode::NonOverlapTruncate && stride != patch_len)
        throw ConfigError("patching: non-overlapping mode requires S == P");
}

std::size_t PatchConfig::patch_count(std::size_t length) const {
    validate();
    if (length < patch_len)
        throw ShapeError("patching: series length " + std::to_string(length) +
                         " is shorter than patch length " + std::to_string(patch_len));
    if (mode == PatchMode::NonOverlapTruncate) return length / patch_len;
    return (length - patch_len) / stride + 2;
}

std::vector<double> patchify(std::span<const double> x, const PatchConfig& cfg) {
    const std::size_t L = x.size();
    const std::size_t P = cfg.patch_len;
    const std::size_t N = cfg.patch_count(L);
    std::vector<double> out(P * N);
    if (cfg.mode == PatchMode::NonOverlapTruncate) {
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t p = 0; p < P; ++p) out[p * N + j] = x[j * P + p];
    } else {
        // padded index i >= L reads the repeated last value
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t p = 0; p < P; ++p) {
                const std::size_t i = j * cfg.stride + p;
                out[p * N + j] = i < L ? x[i] : x[L - 1];
            }
    }
    return out;
}

Tensor patchify_batch(const Tensor& x, const PatchConfig& cfg) {
    if (x.ndim() != 3) throw ShapeError("patchify_batch: expected [B, M, L], got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), M = x.dim(1), L = x.dim(2);
    const std::size_t P = cfg.patch_len;
    const std::size_t N = cfg.patch_count(L);
    Tensor out = Tensor::zeros({B, M, P, N});
    const double* xp = x.data().data();
    double* op = out.data().data();
    for (std::size_t r = 0; r < B * M; ++r) {
        auto patches = patchify(std::span<const double>(xp + r * L, L), cfg);
        std::copy(patches.begin(), patches.end(), op + r * P * N);
    }
    return out;
}

Tensor channel_independent_reshape(const Tensor& x) {
    if (x.ndim() != 4)
        throw ShapeError("channel_independent_reshape: expected [B, M, P, N], got " + shape_str(x.shape()));
    return reshape(x, {x.dim(0) * x.dim(1), x.dim(2), x.dim(3)});
}

Tensor channel_independent_inverse(const Tensor& x, std::size_t batch, std::size_t channels) {
    if (x.ndim() != 3 || x.dim(0) != batch * channels)
        throw ShapeError("channel_independent_inverse: row count " + shape_str(x.shape()) +
                         " does not factor as " + std::to_string(batch) + "x" + std::to_string(channels));
    return reshape(x, {batch, channels, x.dim(1), x.dim(2)});
}

Tensor channel_mixing_reshape(const Tensor& x) {
    if (x.ndim() != 4)
        throw ShapeError("channel_mixing_reshape: expected [B, M, P, N], got " + shape_str(x.shape()));
    return reshape(x, {x.dim(0), x.dim(1) * x.dim(2), x.dim(3)});
}

Tensor channel_mixing_inverse(const Tensor& x, std::size_t channels, std::size_t patch_len) {
    if (x.ndim() != 3 || x.dim(1) != channels * patch_len)
        throw ShapeError("channel_mixing_inverse: token width " + shape_str(x.shape()) +
                         " does not factor as " + std::to_string(channels) + "x" + std::to_string(patch_len));
    return reshape(x, {x.dim(0), channels, patch_len, x.dim(2)});
}

std::size_t PatchMask::masked_per_row() const {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_patches) + 0.5));
}

std::vector<std::size_t> sample_mask_row(std::size_t n_patches, double ratio, Rng& rng) {
    if (ratio < 0.0 || ratio >= 1.0)
        throw ConfigError("mask: ratio must be in [0, 1), got " + std::to_string(ratio));
    const std::size_t k =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_patches) + 0.5));
    return rng.sample_without_replacement(n_patches, k);
}

PatchMask sample_mask(std::size_t n_rows, std::size_t n_patches, double ratio,
                      std::uint64_t run_seed, std::uint64_t epoch) {
    PatchMask mask;
    mask.n_patches = n_patches;
    mask.ratio = ratio;
    mask.rows.reserve(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        Rng rng(mix_seed(run_seed, epoch, r));
        mask.rows.push_back(sample_mask_row(n_patches, ratio, rng));
    }
    return mask;
}

Tensor apply_mask(const Tensor& patches, const PatchMask& mask) {
    if (patches.ndim() != 3)
        throw ShapeError("apply_mask: expected [rows, P, N], got " + shape_str(patches.shape()));
    const std::size_t rows = patches.dim(0), P = patches.dim(1), N = patches.dim(2);
    if (mask.rows.size() != rows || mask.n_patches != N)
        throw ShapeError("apply_mask: mask rows/patch count do not match tensor");
    Tensor out = patches.clone();
    double* op = out.data().data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t idx : mask.rows[r])
            for (std::size_t p = 0; p < P; ++p) op[(r * P + p) * N + idx] = 0.0;
    return out;
}

Tensor mask_indicator(const PatchMask& mask, std::size_t patch_len) {
    const std::size_t rows = mask.rows.size(), N = mask.n_patches, P = patch_len;
    Tensor out = Tensor::zeros({rows, P, N});
    double* op = out.data().data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t idx : mask.rows[r])
            for (std::size_t p = 0; p < P; ++p) op[(r * P + p) * N + idx] = 1.0;
    return out;
}

}  // namespace patchcast
