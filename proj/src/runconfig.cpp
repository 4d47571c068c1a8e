#include "patchcast/runconfig.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace patchcast {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::size_t parse_size(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size() || n < 0) throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

#define SIZE_FIELD(key)                                                              \
    Field{#key, [](RunConfig& c, const std::string& v) { c.key = parse_size(#key, v); }, \
          [](const RunConfig& c) { return std::to_string(c.key); }}
#define U64_FIELD(key)                                                              \
    Field{#key, [](RunConfig& c, const std::string& v) { c.key = parse_u64(#key, v); }, \
          [](const RunConfig& c) { return std::to_string(c.key); }}
#define DOUBLE_FIELD(key)                                                               \
    Field{#key, [](RunConfig& c, const std::string& v) { c.key = parse_double(#key, v); }, \
          [](const RunConfig& c) { return fmt_double(c.key); }}
#define BOOL_FIELD(key)                                                              \
    Field{#key, [](RunConfig& c, const std::string& v) { c.key = parse_bool(#key, v); }, \
          [](const RunConfig& c) { return c.key ? std::string("true") : std::string("false"); }}
#define STRING_FIELD(key)                                               \
    Field{#key, [](RunConfig& c, const std::string& v) { c.key = v; }, \
          [](const RunConfig& c) { return c.key; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        STRING_FIELD(dataset),
        STRING_FIELD(dataset_name),
        DOUBLE_FIELD(train_frac),
        DOUBLE_FIELD(val_frac),
        DOUBLE_FIELD(test_frac),
        STRING_FIELD(split_mode),
        SIZE_FIELD(split_train_end),
        SIZE_FIELD(split_val_end),
        SIZE_FIELD(split_test_end),
        BOOL_FIELD(standardize),
        BOOL_FIELD(raw_scale_metrics),
        SIZE_FIELD(lookback),
        SIZE_FIELD(horizon),
        SIZE_FIELD(patch_len),
        SIZE_FIELD(stride),
        SIZE_FIELD(d_model),
        SIZE_FIELD(heads),
        SIZE_FIELD(ffn_dim),
        SIZE_FIELD(layers),
        DOUBLE_FIELD(dropout),
        STRING_FIELD(channel_mode),
        BOOL_FIELD(instance_norm),
        BOOL_FIELD(loss_on_normalized),
        SIZE_FIELD(epochs),
        SIZE_FIELD(batch_size),
        DOUBLE_FIELD(learning_rate),
        DOUBLE_FIELD(beta1),
        DOUBLE_FIELD(beta2),
        DOUBLE_FIELD(adam_eps),
        SIZE_FIELD(patience),
        U64_FIELD(seed),
        DOUBLE_FIELD(mask_ratio),
        BOOL_FIELD(pretrain_loss_all_patches),
        SIZE_FIELD(probe_epochs),
        SIZE_FIELD(lp_epochs),
        SIZE_FIELD(ft_epochs),
        DOUBLE_FIELD(train_fraction),
        SIZE_FIELD(synth_channels),
        SIZE_FIELD(synth_timesteps),
        U64_FIELD(synth_seed),
        STRING_FIELD(synth_periods),
        DOUBLE_FIELD(synth_noise),
        DOUBLE_FIELD(synth_trend),
        DOUBLE_FIELD(synth_coupling),
        SIZE_FIELD(mem_budget_mb),
        SIZE_FIELD(jobs),
    };
    return f;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.name == key) return &f;
    return nullptr;
}

std::vector<double> parse_period_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const double p = parse_double("synth_periods", item);
        if (p <= 0) throw ConfigError("config: synth_periods must be positive, got " + item);
        out.push_back(p);
    }
    if (out.empty()) throw ConfigError("config: synth_periods is empty");
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (lookback < patch_len)
        throw ConfigError("config: inconsistent lookback=" + std::to_string(lookback) +
                          " < patch_len=" + std::to_string(patch_len));
    if (heads == 0 || d_model % heads != 0)
        throw ConfigError("config: d_model=" + std::to_string(d_model) +
                          " is not divisible by heads=" + std::to_string(heads));
    if (stride == 0 || patch_len == 0) throw ConfigError("config: patch_len and stride must be >= 1");
    if (layers == 0) throw ConfigError("config: layers must be >= 1");
    if (dropout < 0 || dropout >= 1) throw ConfigError("config: dropout must be in [0, 1)");
    if (mask_ratio < 0 || mask_ratio >= 1) throw ConfigError("config: mask_ratio must be in [0, 1)");
    if (channel_mode != "independent" && channel_mode != "mixing")
        throw ConfigError("config: channel_mode must be 'independent' or 'mixing', got '" +
                          channel_mode + "'");
    if (split_mode != "fractions" && split_mode != "ett_hourly" && split_mode != "ett_minutely" &&
        split_mode != "explicit")
        throw ConfigError("config: unknown split_mode '" + split_mode + "'");
    if (split_mode == "fractions" && std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("config: split fractions must sum to 1");
    if (train_fraction <= 0 || train_fraction > 1)
        throw ConfigError("config: train_fraction must be in (0, 1]");
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (learning_rate <= 0) throw ConfigError("config: learning_rate must be positive");
    if (horizon < 1) throw ConfigError("config: horizon must be >= 1");
    parse_period_list(synth_periods);
}

SplitSpec RunConfig::split_spec() const {
    if (split_mode == "ett_hourly") return SplitSpec::boundaries(12 * 30 * 24, 16 * 30 * 24, 20 * 30 * 24);
    if (split_mode == "ett_minutely")
        return SplitSpec::boundaries(12 * 30 * 24 * 4, 16 * 30 * 24 * 4, 20 * 30 * 24 * 4);
    if (split_mode == "explicit")
        return SplitSpec::boundaries(split_train_end, split_val_end, split_test_end);
    return SplitSpec::fractions(train_frac, val_frac, test_frac);
}

SynthSpec RunConfig::synth_spec() const {
    SynthSpec s;
    s.channels = synth_channels;
    s.timesteps = synth_timesteps;
    s.seed = synth_seed;
    s.base_periods = parse_period_list(synth_periods);
    s.noise_sigma = synth_noise;
    s.trend = synth_trend;
    s.coupling = synth_coupling;
    s.name = dataset_name.empty() ? "synth" : dataset_name;
    return s;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.beta1 = beta1;
    t.beta2 = beta2;
    t.adam_eps = adam_eps;
    t.patience = patience;
    t.seed = seed;
    t.mask_ratio = mask_ratio;
    t.pretrain_loss_all_patches = pretrain_loss_all_patches;
    t.probe_epochs = probe_epochs;
    t.lp_epochs = lp_epochs;
    t.ft_epochs = ft_epochs;
    t.train_fraction = train_fraction;
    t.loss_on_normalized = loss_on_normalized;
    return t;
}

ModelConfig RunConfig::model_config(HeadKind head, std::size_t n_channels) const {
    ModelConfig m;
    m.lookback = lookback;
    m.horizon = horizon;
    m.patch_len = patch_len;
    m.d_model = d_model;
    m.heads = heads;
    m.ffn_dim = ffn_dim;
    m.layers = layers;
    m.dropout = dropout;
    m.instance_norm = instance_norm;
    m.head = head;
    if (head == HeadKind::Reconstruct) {
        m.patch_mode = PatchMode::NonOverlapTruncate;
        m.stride = patch_len;
    } else {
        m.patch_mode = PatchMode::PaddedOverlap;
        m.stride = stride;
    }
    if (channel_mode == "mixing") {
        m.channel_mode = ChannelMode::Mixing;
        m.n_channels = n_channels;
    }
    return m;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value': '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const Field* f = find_field(key);
        if (!f) throw ConfigError("config: unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("config: duplicate key '" + key + "' at line " + std::to_string(lineno));
        f->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const Field* f = find_field(trim(key));
    if (!f) throw ConfigError("config: unknown key '" + key + "'");
    f->set(cfg, trim(value));
    cfg.validate();
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    for (const auto& f : fields()) out << f.name << " = " << f.get(cfg) << '\n';
    return out.str();
}

}  // namespace patchcast
