#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patchcast/tensor.hpp"

namespace patchcast {

enum class PatchMode {
    PaddedOverlap,      // pad S copies of the last value; N = floor((L-P)/S) + 2
    NonOverlapTruncate  // disjoint patches over a prefix; N = floor(L/P)
};

struct PatchConfig {
    std::size_t patch_len = 16;
    std::size_t stride = 8;
    PatchMode mode = PatchMode::PaddedOverlap;

    void validate() const;
    // Number of patches for a length-L series; throws when L < P.
    std::size_t patch_count(std::size_t length) const;
};

// One channel x[L] -> row-major [P][N] buffer; patch j is column j.
std::vector<double> patchify(std::span<const double> x, const PatchConfig& cfg);

// Batch form: x [B, M, L] -> [B, M, P, N].
Tensor patchify_batch(const Tensor& x, const PatchConfig& cfg);

// [B, M, P, N] -> [B*M, P, N]: row b*M + m holds channel m of batch item b.
// Pure relabeling of row-major storage; exact inverse provided.
Tensor channel_independent_reshape(const Tensor& x);
Tensor channel_independent_inverse(const Tensor& x, std::size_t batch, std::size_t channels);

// [B, M, P, N] -> [B, M*P, N]: token vectors stack all channels' patch
// values (feature index m*P + p). Used by the channel-mixing variant.
Tensor channel_mixing_reshape(const Tensor& x);
Tensor channel_mixing_inverse(const Tensor& x, std::size_t channels, std::size_t patch_len);

// Random patch mask: every row independently masks exactly
// round(ratio * N) patch indices, uniform without replacement.
struct PatchMask {
    std::size_t n_patches = 0;
    double ratio = 0.0;
    std::vector<std::vector<std::size_t>> rows;  // sorted masked indices per row

    std::size_t masked_per_row() const;
};

std::vector<std::size_t> sample_mask_row(std::size_t n_patches, double ratio, Rng& rng);

// Per-row seeds derive from (run_seed, epoch, row) so masking is reproducible
// regardless of processing order.
PatchMask sample_mask(std::size_t n_rows, std::size_t n_patches, double ratio,
                      std::uint64_t run_seed, std::uint64_t epoch);

// Zero the masked patch columns of patches [rows, P, N]; returns a copy.
Tensor apply_mask(const Tensor& patches, const PatchMask& mask);

// 0/1 indicator of the masked elements, shaped like [rows, P, N].
Tensor mask_indicator(const PatchMask& mask, std::size_t patch_len);

}  // namespace patchcast
