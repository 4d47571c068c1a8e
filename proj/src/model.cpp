#include "patchcast/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "patchcast/series.hpp"

namespace patchcast {

namespace {
constexpr double kInitRange = 0.02;
constexpr double kBnMomentum = 0.1;
constexpr double kBnEps = 1e-5;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void ModelConfig::validate() const {
    if (d_model == 0 || heads == 0 || d_model % heads != 0)
        throw ConfigError("model: d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
                          std::to_string(heads) + ")");
    if (layers < 1) throw ConfigError("model: need at least one encoder layer");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
    if (lookback < patch_len)
        throw ConfigError("model: look-back " + std::to_string(lookback) + " is shorter than patch length " +
                          std::to_string(patch_len));
    patch_config().validate();
    if (channel_mode == ChannelMode::Mixing && n_channels == 0)
        throw ConfigError("model: channel-mixing mode needs n_channels");
    if (channel_mode == ChannelMode::Mixing && head == HeadKind::Reconstruct)
        throw ConfigError("model: reconstruction head is only supported with channel independence");
    if (horizon < 1) throw ConfigError("model: horizon must be >= 1");
}

PatchConfig ModelConfig::patch_config() const {
    return {patch_len, patch_mode == PatchMode::NonOverlapTruncate ? patch_len : stride, patch_mode};
}

std::size_t ModelConfig::n_patches() const {
    return patch_config().patch_count(lookback);
}

std::size_t ModelConfig::token_width() const {
    return channel_mode == ChannelMode::Mixing ? n_channels * patch_len : patch_len;
}

std::size_t ModelConfig::head_width() const {
    return channel_mode == ChannelMode::Mixing ? n_channels * horizon : horizon;
}

Tensor embed_tokens(const Tensor& patches, const Tensor& w_patch, const Tensor& w_pos) {
    if (patches.ndim() != 3)
        throw ShapeError("embed: expected patches [rows, W, N], got " + shape_str(patches.shape()));
    if (w_pos.dim(1) != patches.dim(2))
        throw ShapeError("embed: " + std::to_string(patches.dim(2)) +
                         " tokens do not match positional encoding " + shape_str(w_pos.shape()));
    return add(matmul(w_patch, patches), w_pos);
}

Tensor multihead_attention(const Tensor& x, const AttentionWeights& w, double dropout_p, Rng& rng,
                           bool training, std::vector<std::vector<double>>* maps) {
    const std::size_t n_heads = w.wq.size();
    const std::size_t dk = w.wq[0].dim(1);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Tensor xt = transpose_last2(x);  // [rows, N, D]
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(n_heads);
    if (maps) maps->assign(n_heads, {});
    for (std::size_t h = 0; h < n_heads; ++h) {
        Tensor q = matmul(xt, w.wq[h]);
        Tensor k = matmul(xt, w.wk[h]);
        Tensor v = matmul(xt, w.wv[h]);
        Tensor scores = scale(matmul(q, transpose_last2(k)), inv_sqrt_dk);
        Tensor attn = softmax_lastdim(scores);  // [rows, N, N]
        if (maps) (*maps)[h].assign(attn.data().begin(), attn.data().end());
        attn = dropout(attn, dropout_p, rng, training);
        head_outputs.push_back(matmul(attn, v));  // [rows, N, d_v]
    }
    Tensor merged = n_heads == 1 ? head_outputs[0] : concat_lastdim(head_outputs);
    return transpose_last2(matmul(merged, w.wo));  // back to [rows, D, N]
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    init_params(seed);
}

void Model::init_params(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t D = cfg_.d_model;
    const std::size_t dk = D / cfg_.heads;
    const std::size_t N = cfg_.n_patches();

    auto u = [&](Shape shape) { return Tensor::uniform(std::move(shape), -kInitRange, kInitRange, rng, true); };

    w_patch_ = u({D, cfg_.token_width()});
    w_pos_ = u({D, N});

    layers_.clear();
    layers_.resize(cfg_.layers);
    for (auto& layer : layers_) {
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            layer.attn.wq.push_back(u({D, dk}));
            layer.attn.wk.push_back(u({D, dk}));
            layer.attn.wv.push_back(u({D, dk}));
        }
        layer.attn.wo = u({D, D});
        layer.ffn_w1 = u({cfg_.ffn_dim, D});
        layer.ffn_b1 = Tensor::zeros({cfg_.ffn_dim, 1}, true);
        layer.ffn_w2 = u({D, cfg_.ffn_dim});
        layer.ffn_b2 = Tensor::zeros({D, 1}, true);
        layer.bn1_gamma = Tensor::full({D}, 1.0, true);
        layer.bn1_beta = Tensor::zeros({D}, true);
        layer.bn2_gamma = Tensor::full({D}, 1.0, true);
        layer.bn2_beta = Tensor::zeros({D}, true);
        layer.bn1_mean.assign(D, 0.0);
        layer.bn1_var.assign(D, 1.0);
        layer.bn2_mean.assign(D, 0.0);
        layer.bn2_var.assign(D, 1.0);
    }

    if (cfg_.head == HeadKind::Forecast) {
        head_w_ = u({cfg_.head_width(), N * D});
        head_b_ = Tensor::zeros({cfg_.head_width()}, true);
    } else {
        head_w_ = u({cfg_.patch_len, D});
        head_b_ = Tensor::zeros({cfg_.patch_len, 1}, true);
    }
}

Tensor Model::run_layer(const Tensor& x, EncoderLayer& layer, bool training, Rng& rng,
                        AttentionRecord* record, std::size_t layer_idx) {
    std::vector<std::vector<double>> maps;
    Tensor attn = multihead_attention(x, layer.attn, cfg_.dropout, rng, training,
                                      record ? &maps : nullptr);
    if (record)
        for (std::size_t h = 0; h < cfg_.heads; ++h)
            record->maps[layer_idx * cfg_.heads + h] = std::move(maps[h]);
    Tensor y = batchnorm(add(x, dropout(attn, cfg_.dropout, rng, training)), layer.bn1_gamma,
                         layer.bn1_beta, layer.bn1_mean, layer.bn1_var, kBnMomentum, kBnEps, training);
    Tensor h = gelu(add(matmul(layer.ffn_w1, y), layer.ffn_b1));
    Tensor ff = add(matmul(layer.ffn_w2, h), layer.ffn_b2);
    return batchnorm(add(y, dropout(ff, cfg_.dropout, rng, training)), layer.bn2_gamma, layer.bn2_beta,
                     layer.bn2_mean, layer.bn2_var, kBnMomentum, kBnEps, training);
}

Tensor Model::encode_tokens(const Tensor& tokens, bool training, Rng& rng, AttentionRecord* record) {
    if (tokens.dim(tokens.ndim() - 1) != cfg_.n_patches())
        throw ShapeError("model: token count " + std::to_string(tokens.dim(tokens.ndim() - 1)) +
                         " does not match the positional encoding (" + std::to_string(cfg_.n_patches()) +
                         ")");
    if (record) {
        record->n_layers = cfg_.layers;
        record->n_heads = cfg_.heads;
        record->rows = tokens.dim(0);
        record->tokens = cfg_.n_patches();
        record->maps.assign(cfg_.layers * cfg_.heads, {});
    }
    Tensor h = add(matmul(w_patch_, tokens), w_pos_);
    h = dropout(h, cfg_.dropout, rng, training);
    for (std::size_t li = 0; li < layers_.size(); ++li)
        h = run_layer(h, layers_[li], training, rng, record, li);
    return h;
}

Tensor Model::apply_head(const Tensor& z) {
    const std::size_t rows = z.dim(0);
    if (cfg_.head == HeadKind::Forecast) {
        Tensor flat = reshape(z, {rows, cfg_.d_model * cfg_.n_patches()});
        return add(matmul(flat, transpose_last2(head_w_)), head_b_);  // [rows, head_width]
    }
    return add(matmul(head_w_, z), head_b_);  // [rows, P, N], token-wise
}

Tensor Model::forward_supervised(const Tensor& x, bool training, Rng& rng, bool denormalize,
                                 InstanceStats* stats_out, AttentionRecord* record) {
    if (cfg_.head != HeadKind::Forecast)
        throw ConfigError("model: supervised forward needs a forecast head");
    if (x.ndim() != 3) throw ShapeError("model: expected input [B, M, L], got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), M = x.dim(1), L = x.dim(2);
    if (L != cfg_.lookback)
        throw ShapeError("model: input length " + std::to_string(L) + " does not match look-back " +
                         std::to_string(cfg_.lookback));
    if (cfg_.channel_mode == ChannelMode::Mixing && M != cfg_.n_channels)
        throw ShapeError("model: channel-mixing model was built for " + std::to_string(cfg_.n_channels) +
                         " channels, got " + std::to_string(M));

    Tensor xin = x;
    InstanceStats stats;
    if (cfg_.instance_norm) {
        xin = x.clone();
        stats.mean.resize(B * M);
        stats.std_dev.resize(B * M);
        instance_normalize(xin.data(), B * M, L, stats.mean, stats.std_dev);
    }

    Tensor patches = patchify_batch(xin, cfg_.patch_config());
    Tensor tokens = cfg_.channel_mode == ChannelMode::Independent ? channel_independent_reshape(patches)
                                                                  : channel_mixing_reshape(patches);
    Tensor z = encode_tokens(tokens, training, rng, record);
    Tensor pred = reshape(apply_head(z), {B, M, cfg_.horizon});

    if (cfg_.instance_norm && denormalize) {
        Tensor scales = Tensor::zeros({B, M, 1});
        Tensor means = Tensor::zeros({B, M, 1});
        for (std::size_t r = 0; r < B * M; ++r) {
            scales.data()[r] = stats.std_dev[r] + kInstanceNormEps;
            means.data()[r] = stats.mean[r];
        }
        pred = add(mul(pred, scales), means);
    }
    if (stats_out) *stats_out = std::move(stats);
    return pred;
}

PretrainOutput Model::forward_pretrain(const Tensor& x, const PatchMask& mask, bool training, Rng& rng) {
    if (cfg_.head != HeadKind::Reconstruct)
        throw ConfigError("model: pretraining forward needs a reconstruction head");
    if (cfg_.patch_mode != PatchMode::NonOverlapTruncate)
        throw ConfigError("model: masked pretraining requires non-overlapping patches so visible patches "
                          "carry no masked content");
    if (x.ndim() != 3) throw ShapeError("model: expected input [B, M, L], got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), M = x.dim(1), L = x.dim(2);
    if (L != cfg_.lookback)
        throw ShapeError("model: input length " + std::to_string(L) + " does not match look-back " +
                         std::to_string(cfg_.lookback));

    Tensor xin = x;
    if (cfg_.instance_norm) {
        xin = x.clone();
        std::vector<double> mean(B * M), sd(B * M);
        instance_normalize(xin.data(), B * M, L, mean, sd);
    }

    Tensor patches = patchify_batch(xin, cfg_.patch_config());        // [B, M, P, N]
    Tensor tokens = channel_independent_reshape(patches);             // [B*M, P, N]
    Tensor masked = apply_mask(tokens, mask);
    Tensor z = encode_tokens(masked, training, rng, nullptr);
    Tensor recon = reshape(apply_head(z), {B, M, cfg_.patch_len, cfg_.n_patches()});

    PretrainOutput out;
    out.reconstruction = recon;
    out.target = patches;
    out.mask = mask;
    return out;
}

std::vector<std::vector<double>> Model::export_attention(const Tensor& x) {
    AttentionRecord record;
    Rng rng(0);  // eval mode draws nothing
    forward_supervised(x, false, rng, true, nullptr, &record);

    const std::size_t nn = record.tokens * record.tokens;
    std::vector<std::vector<double>> averaged(record.rows, std::vector<double>(nn, 0.0));
    const double denom = static_cast<double>(record.n_layers * record.n_heads);
    for (const auto& m : record.maps)
        for (std::size_t r = 0; r < record.rows; ++r)
            for (std::size_t i = 0; i < nn; ++i) averaged[r][i] += m[r * nn + i] / denom;
    return averaged;
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embed.w_patch", w_patch_);
    out.emplace_back("embed.w_pos", w_pos_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& layer = layers_[i];
        const std::string p = "layers." + std::to_string(i) + ".";
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            out.emplace_back(p + "attn.q." + std::to_string(h), layer.attn.wq[h]);
            out.emplace_back(p + "attn.k." + std::to_string(h), layer.attn.wk[h]);
            out.emplace_back(p + "attn.v." + std::to_string(h), layer.attn.wv[h]);
        }
        out.emplace_back(p + "attn.out", layer.attn.wo);
        out.emplace_back(p + "ffn.w1", layer.ffn_w1);
        out.emplace_back(p + "ffn.b1", layer.ffn_b1);
        out.emplace_back(p + "ffn.w2", layer.ffn_w2);
        out.emplace_back(p + "ffn.b2", layer.ffn_b2);
        out.emplace_back(p + "bn1.gamma", layer.bn1_gamma);
        out.emplace_back(p + "bn1.beta", layer.bn1_beta);
        out.emplace_back(p + "bn2.gamma", layer.bn2_gamma);
        out.emplace_back(p + "bn2.beta", layer.bn2_beta);
    }
    out.emplace_back("head.weight", head_w_);
    out.emplace_back("head.bias", head_b_);
    return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> Model::named_state() {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string p = "layers." + std::to_string(i) + ".";
        out.emplace_back(p + "bn1.running_mean", &layers_[i].bn1_mean);
        out.emplace_back(p + "bn1.running_var", &layers_[i].bn1_var);
        out.emplace_back(p + "bn2.running_mean", &layers_[i].bn2_mean);
        out.emplace_back(p + "bn2.running_var", &layers_[i].bn2_var);
    }
    return out;
}

bool Model::is_head_param(const std::string& name) {
    return name.rfind("head.", 0) == 0;
}

std::vector<Tensor> Model::trainable_parameters(bool head_only) const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters())
        if (!head_only || is_head_param(name)) out.push_back(t);
    return out;
}

void Model::reset_head(HeadKind kind, std::size_t horizon, std::uint64_t seed) {
    cfg_.head = kind;
    cfg_.horizon = horizon;
    cfg_.validate();
    Rng rng(mix_seed(seed, 0x68656164ULL));  // dedicated stream for the head
    if (kind == HeadKind::Forecast) {
        head_w_ = Tensor::uniform({cfg_.head_width(), cfg_.n_patches() * cfg_.d_model}, -kInitRange,
                                  kInitRange, rng, true);
        head_b_ = Tensor::zeros({cfg_.head_width()}, true);
    } else {
        head_w_ = Tensor::uniform({cfg_.patch_len, cfg_.d_model}, -kInitRange, kInitRange, rng, true);
        head_b_ = Tensor::zeros({cfg_.patch_len, 1}, true);
    }
}

void Model::adopt_trunk(const Model& source) {
    const ModelConfig& s = source.cfg_;
    if (s.patch_len != cfg_.patch_len)
        throw ConfigError("transfer: patch length mismatch (" + std::to_string(s.patch_len) + " vs " +
                          std::to_string(cfg_.patch_len) + "); the patch embedding is P-specific");
    if (s.token_width() != cfg_.token_width() || s.d_model != cfg_.d_model || s.heads != cfg_.heads ||
        s.ffn_dim != cfg_.ffn_dim || s.layers != cfg_.layers)
        throw ConfigError("transfer: trunk geometry mismatch");
    if (s.n_patches() != cfg_.n_patches())
        throw ConfigError("transfer: patch count mismatch (" + std::to_string(s.n_patches()) + " vs " +
                          std::to_string(cfg_.n_patches()) + "); the positional encoding is N-specific");

    auto copy_into = [](Tensor& dst, const Tensor& src) {
        std::copy(src.data().begin(), src.data().end(), dst.data().begin());
    };
    copy_into(w_patch_, source.w_patch_);
    copy_into(w_pos_, source.w_pos_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        EncoderLayer& d = layers_[i];
        const EncoderLayer& so = source.layers_[i];
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            copy_into(d.attn.wq[h], so.attn.wq[h]);
            copy_into(d.attn.wk[h], so.attn.wk[h]);
            copy_into(d.attn.wv[h], so.attn.wv[h]);
        }
        copy_into(d.attn.wo, so.attn.wo);
        copy_into(d.ffn_w1, so.ffn_w1);
        copy_into(d.ffn_b1, so.ffn_b1);
        copy_into(d.ffn_w2, so.ffn_w2);
        copy_into(d.ffn_b2, so.ffn_b2);
        copy_into(d.bn1_gamma, so.bn1_gamma);
        copy_into(d.bn1_beta, so.bn1_beta);
        copy_into(d.bn2_gamma, so.bn2_gamma);
        copy_into(d.bn2_beta, so.bn2_beta);
        d.bn1_mean = so.bn1_mean;
        d.bn1_var = so.bn1_var;
        d.bn2_mean = so.bn2_mean;
        d.bn2_var = so.bn2_var;
    }
}

Model Model::clone() const {
    Model out(cfg_, 0);
    out.adopt_trunk(*this);
    std::copy(head_w_.data().begin(), head_w_.data().end(), out.head_w_.data().begin());
    std::copy(head_b_.data().begin(), head_b_.data().end(), out.head_b_.data().begin());
    return out;
}

std::uint64_t Model::param_hash(bool trunk_only) const {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&](const double* p, std::size_t n) {
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [name, t] : named_parameters()) {
        if (trunk_only && is_head_param(name)) continue;
        feed(t.data().data(), t.size());
    }
    for (auto& [name, vec] : const_cast<Model*>(this)->named_state()) feed(vec->data(), vec->size());
    return h;
}

void Model::save(const std::string& path, const std::map<std::string, std::vector<double>>& extra) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write '" + path + "'");

    out << "PATCHCAST-CKPT 1\n";
    out << "lookback = " << cfg_.lookback << '\n';
    out << "horizon = " << cfg_.horizon << '\n';
    out << "patch_len = " << cfg_.patch_len << '\n';
    out << "stride = " << cfg_.stride << '\n';
    out << "patch_mode = " << (cfg_.patch_mode == PatchMode::NonOverlapTruncate ? "nonoverlap" : "padded_overlap")
        << '\n';
    out << "d_model = " << cfg_.d_model << '\n';
    out << "heads = " << cfg_.heads << '\n';
    out << "ffn_dim = " << cfg_.ffn_dim << '\n';
    out << "layers = " << cfg_.layers << '\n';
    out << "dropout = " << fmt_double(cfg_.dropout) << '\n';
    out << "channel_mode = " << (cfg_.channel_mode == ChannelMode::Mixing ? "mixing" : "independent") << '\n';
    out << "instance_norm = " << (cfg_.instance_norm ? 1 : 0) << '\n';
    out << "head = " << (cfg_.head == HeadKind::Forecast ? "forecast" : "reconstruct") << '\n';
    out << "n_channels = " << cfg_.n_channels << '\n';

    struct Entry {
        std::string name;
        const double* data;
        Shape shape;
    };
    std::vector<Entry> entries;
    for (const auto& [name, t] : named_parameters()) entries.push_back({name, t.data().data(), t.shape()});
    for (auto& [name, vec] : const_cast<Model*>(this)->named_state())
        entries.push_back({name, vec->data(), {vec->size()}});
    for (const auto& [name, vec] : extra) entries.push_back({name, vec.data(), {vec.size()}});

    out << "params " << entries.size() << '\n';
    std::size_t offset = 0;
    for (const auto& e : entries) {
        out << e.name << ' ' << e.shape.size();
        for (std::size_t d : e.shape) out << ' ' << d;
        out << ' ' << offset << '\n';
        offset += shape_numel(e.shape);
    }
    out << "binary\n";
    for (const auto& e : entries)
        out.write(reinterpret_cast<const char*>(e.data),
                  static_cast<std::streamsize>(shape_numel(e.shape) * sizeof(double)));
    if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

Model Model::load(const std::string& path, std::map<std::string, std::vector<double>>* extra) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line) || line != "PATCHCAST-CKPT 1")
        throw IoError("checkpoint: '" + path + "' is not a recognized checkpoint");

    ModelConfig cfg;
    std::size_t n_entries = 0;
    while (std::getline(in, line)) {
        if (line.rfind("params ", 0) == 0) {
            n_entries = std::stoul(line.substr(7));
            break;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw IoError("checkpoint: malformed manifest line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 3);
        if (key == "lookback") cfg.lookback = std::stoul(val);
        else if (key == "horizon") cfg.horizon = std::stoul(val);
        else if (key == "patch_len") cfg.patch_len = std::stoul(val);
        else if (key == "stride") cfg.stride = std::stoul(val);
        else if (key == "patch_mode")
            cfg.patch_mode = val == "nonoverlap" ? PatchMode::NonOverlapTruncate : PatchMode::PaddedOverlap;
        else if (key == "d_model") cfg.d_model = std::stoul(val);
        else if (key == "heads") cfg.heads = std::stoul(val);
        else if (key == "ffn_dim") cfg.ffn_dim = std::stoul(val);
        else if (key == "layers") cfg.layers = std::stoul(val);
        else if (key == "dropout") cfg.dropout = std::stod(val);
        else if (key == "channel_mode")
            cfg.channel_mode = val == "mixing" ? ChannelMode::Mixing : ChannelMode::Independent;
        else if (key == "instance_norm") cfg.instance_norm = val != "0";
        else if (key == "head") cfg.head = val == "reconstruct" ? HeadKind::Reconstruct : HeadKind::Forecast;
        else if (key == "n_channels") cfg.n_channels = std::stoul(val);
        else throw IoError("checkpoint: unknown config key '" + key + "'");
    }

    struct Entry {
        std::string name;
        Shape shape;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < n_entries; ++i) {
        if (!std::getline(in, line)) throw IoError("checkpoint: truncated manifest");
        std::istringstream ss(line);
        Entry e;
        std::size_t ndim;
        ss >> e.name >> ndim;
        e.shape.resize(ndim);
        for (std::size_t d = 0; d < ndim; ++d) ss >> e.shape[d];
        ss >> e.offset;
        if (!ss) throw IoError("checkpoint: malformed entry '" + line + "'");
        entries.push_back(std::move(e));
    }
    if (!std::getline(in, line) || line != "binary") throw IoError("checkpoint: missing binary marker");

    Model model(cfg, 0);
    std::map<std::string, Tensor> params;
    for (auto& [name, t] : model.named_parameters()) params.emplace(name, t);
    std::map<std::string, std::vector<double>*> state;
    for (auto& [name, vec] : model.named_state()) state.emplace(name, vec);

    for (const auto& e : entries) {
        const std::size_t count = shape_numel(e.shape);
        std::vector<double> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw IoError("checkpoint: truncated binary section at '" + e.name + "'");
        if (auto it = params.find(e.name); it != params.end()) {
            if (it->second.shape() != e.shape)
                throw IoError("checkpoint: shape mismatch for '" + e.name + "': stored " +
                              shape_str(e.shape) + ", model wants " + shape_str(it->second.shape()));
            std::copy(buf.begin(), buf.end(), it->second.data().begin());
        } else if (auto st = state.find(e.name); st != state.end()) {
            if (st->second->size() != count)
                throw IoError("checkpoint: size mismatch for state '" + e.name + "'");
            *st->second = std::move(buf);
        } else if (extra) {
            (*extra)[e.name] = std::move(buf);
        }
        // unknown entries without an extra sink are skipped
    }
    return model;
}

}  // namespace patchcast
