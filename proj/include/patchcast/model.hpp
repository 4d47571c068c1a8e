#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "patchcast/ops.hpp"
#include "patchcast/patching.hpp"

namespace patchcast {

enum class ChannelMode { Independent, Mixing };
enum class HeadKind { Forecast, Reconstruct };

struct ModelConfig {
    std::size_t lookback = 336;
    std::size_t horizon = 96;
    std::size_t patch_len = 16;
    std::size_t stride = 8;
    PatchMode patch_mode = PatchMode::PaddedOverlap;
    std::size_t d_model = 128;
    std::size_t heads = 16;
    std::size_t ffn_dim = 256;
    std::size_t layers = 3;
    double dropout = 0.2;
    ChannelMode channel_mode = ChannelMode::Independent;
    bool instance_norm = true;
    HeadKind head = HeadKind::Forecast;
    std::size_t n_channels = 0;  // required in Mixing mode

    void validate() const;
    PatchConfig patch_config() const;
    std::size_t n_patches() const;    // patch count for `lookback`
    std::size_t token_width() const;  // P, or M*P when mixing
    std::size_t head_width() const;   // T, or M*T when mixing
};

// Per-channel normalization stats captured during a forward pass, one entry
// per (batch, channel) row.
struct InstanceStats {
    std::vector<double> mean;
    std::vector<double> std_dev;
};

// Post-softmax attention matrices for one forward pass.
struct AttentionRecord {
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t rows = 0;
    std::size_t tokens = 0;
    std::vector<std::vector<double>> maps;  // [layer*n_heads + head] -> rows*N*N

    const double* map(std::size_t layer, std::size_t head) const {
        return maps[layer * n_heads + head].data();
    }
};

struct PretrainOutput {
    Tensor reconstruction;  // [B, M, P, N]
    Tensor target;          // [B, M, P, N] normalized patches before masking
    PatchMask mask;
};

// Patch embedding: per token, W_patch * patch + the token's position column.
// patches [rows, W, N], w_patch [D, W], w_pos [D, N] -> [rows, D, N].
Tensor embed_tokens(const Tensor& patches, const Tensor& w_patch, const Tensor& w_pos);

struct AttentionWeights {
    std::vector<Tensor> wq, wk, wv;  // per head [D, d_k]
    Tensor wo;                       // [D, D]
};

// Scaled dot-product multi-head self-attention over x [rows, D, N]: per head
// Q = x^T Wq, K = x^T Wk, V = x^T Wv, A = softmax(Q K^T / sqrt(d_k)); head
// outputs are concatenated to width D and projected by wo. When `maps` is
// given, the post-softmax matrices are copied out per head (rows*N*N each).
Tensor multihead_attention(const Tensor& x, const AttentionWeights& w, double dropout_p, Rng& rng,
                           bool training, std::vector<std::vector<double>>* maps = nullptr);

class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // Full supervised pipeline: (instance-normalize) -> patchify -> reshape ->
    // embed -> encoder layers -> flatten+linear head -> [B, M, T]
    // (-> denormalize). Set denormalize=false to keep predictions in the
    // per-window normalized space (stats land in stats_out).
    Tensor forward_supervised(const Tensor& x, bool training, Rng& rng, bool denormalize = true,
                              InstanceStats* stats_out = nullptr, AttentionRecord* record = nullptr);

    // Masked-reconstruction pipeline over non-overlapping patches. The mask
    // must have one row per (batch, channel).
    PretrainOutput forward_pretrain(const Tensor& x, const PatchMask& mask, bool training, Rng& rng);

    // Eval-mode attention maps averaged over all layers and heads; one
    // [tokens*tokens] buffer per (batch, channel) row.
    std::vector<std::vector<double>> export_attention(const Tensor& x);

    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<std::pair<std::string, std::vector<double>*>> named_state();
    std::vector<Tensor> trainable_parameters(bool head_only = false) const;
    static bool is_head_param(const std::string& name);

    // Fresh task head for (kind, horizon); trunk untouched.
    void reset_head(HeadKind kind, std::size_t horizon, std::uint64_t seed);
    // Copy embedding + encoder weights and BN state from `source`; the trunk
    // geometries must agree (patch size, token width, width, depth, patches).
    void adopt_trunk(const Model& source);

    // FNV-1a over parameter bytes in canonical order.
    std::uint64_t param_hash(bool trunk_only = false) const;

    // Deep copy: copying a Model otherwise shares parameter storage.
    Model clone() const;

    void save(const std::string& path,
              const std::map<std::string, std::vector<double>>& extra = {}) const;
    static Model load(const std::string& path,
                      std::map<std::string, std::vector<double>>* extra = nullptr);

private:
    struct EncoderLayer {
        AttentionWeights attn;
        Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        Tensor bn1_gamma, bn1_beta, bn2_gamma, bn2_beta;
        std::vector<double> bn1_mean, bn1_var, bn2_mean, bn2_var;
    };

    void init_params(std::uint64_t seed);
    Tensor encode_tokens(const Tensor& tokens, bool training, Rng& rng, AttentionRecord* record);
    Tensor run_layer(const Tensor& x, EncoderLayer& layer, bool training, Rng& rng,
                     AttentionRecord* record, std::size_t layer_idx);
    Tensor apply_head(const Tensor& z);

    ModelConfig cfg_;
    Tensor w_patch_;  // [D, token_width]
    Tensor w_pos_;    // [D, N]
    std::vector<EncoderLayer> layers_;
    Tensor head_w_;
    Tensor head_b_;
};

}  // namespace patchcast
