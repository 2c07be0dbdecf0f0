#include "voxalign/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "voxalign/common.hpp"

namespace voxalign {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " wants an unsigned integer, got '" +
                          v + "'");
    }
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " wants a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: " + key + " wants true or false, got '" + v +
                      "'");
}

std::vector<std::size_t> parse_size_list(const std::string& key,
                                         const std::string& v) {
    std::vector<std::size_t> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            throw ConfigError("config: " + key + " has an empty list entry");
        }
        out.push_back(parse_size(key, item));
    }
    if (out.empty()) throw ConfigError("config: " + key + " is empty");
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void apply_config_entry(RunConfig& c, const std::string& key,
                        const std::string& value) {
    if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "mode") c.mode = freeze_mode_from_name(value);

    else if (key == "data.depth") c.cohort.dims[0] = parse_size(key, value);
    else if (key == "data.height") c.cohort.dims[1] = parse_size(key, value);
    else if (key == "data.width") c.cohort.dims[2] = parse_size(key, value);
    else if (key == "data.count.ad") c.cohort.counts[0] = parse_size(key, value);
    else if (key == "data.count.cn") c.cohort.counts[1] = parse_size(key, value);
    else if (key == "data.count.mci") c.cohort.counts[2] = parse_size(key, value);
    else if (key == "data.train_fraction") c.train_fraction = parse_f64(key, value);
    else if (key == "data.max_tokens") c.max_tokens = parse_size(key, value);

    else if (key == "adapter.depth_reduction")
        c.model.adapter.depth_reduction = parse_size(key, value);
    else if (key == "adapter.stage_channels")
        c.model.adapter.stage_channels = parse_size_list(key, value);
    else if (key == "adapter.kernel") {
        const auto k = parse_size_list(key, value);
        if (k.size() != 3) {
            throw ConfigError("config: adapter.kernel wants three extents");
        }
        c.model.adapter.kernel = {k[0], k[1], k[2]};
    } else if (key == "adapter.residual_block")
        c.model.adapter.residual_block = parse_bool(key, value);

    else if (key == "patch.depth") c.model.patch.patch_dims[0] = parse_size(key, value);
    else if (key == "patch.height") c.model.patch.patch_dims[1] = parse_size(key, value);
    else if (key == "patch.width") c.model.patch.patch_dims[2] = parse_size(key, value);

    else if (key == "vision.token_dim") c.model.vision.token_dim = parse_size(key, value);
    else if (key == "vision.blocks") c.model.vision.n_frozen_blocks = parse_size(key, value);
    else if (key == "vision.proj_dim") c.model.vision.proj_dim = parse_size(key, value);

    else if (key == "text.vocab_size") c.model.text.vocab_size = parse_size(key, value);
    else if (key == "text.token_dim") c.model.text.token_dim = parse_size(key, value);
    else if (key == "text.blocks") c.model.text.n_frozen_blocks = parse_size(key, value);
    else if (key == "text.proj_dim") c.model.text.proj_dim = parse_size(key, value);

    else if (key == "head.hidden") c.model.head_hidden = parse_size(key, value);

    else if (key == "loss.temperature_init")
        c.model.temperature_init = parse_f64(key, value);
    else if (key == "loss.lambda_init") c.model.lambda_init = parse_f64(key, value);
    else if (key == "loss.learn_weights")
        c.model.learn_loss_weights = parse_bool(key, value);

    else if (key == "train.epochs") c.train.epochs = parse_size(key, value);
    else if (key == "train.batch_size") c.train.batch_size = parse_size(key, value);

    else if (key == "optim.lr_adapter") c.train.optim.lr_adapter = parse_f64(key, value);
    else if (key == "optim.lr_projection")
        c.train.optim.lr_projection = parse_f64(key, value);
    else if (key == "optim.beta1") c.train.optim.beta1 = parse_f64(key, value);
    else if (key == "optim.beta2") c.train.optim.beta2 = parse_f64(key, value);
    else if (key == "optim.eps") c.train.optim.eps = parse_f64(key, value);
    else if (key == "optim.weight_decay")
        c.train.optim.weight_decay = parse_f64(key, value);

    else
        throw ConfigError("config: unknown key '" + key + "'");
}

void resolve_run_config(RunConfig& c) {
    c.cohort.seed = c.seed;
    c.model.seed = c.seed;
    c.model.vision.seed = c.seed;
    c.model.text.seed = c.seed;
    c.model.mode = c.mode;
    c.model.adapter.input_dims = c.cohort.dims;
    c.train.seed = c.seed;
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
        throw ConfigError("config: data.train_fraction must lie in (0, 1)");
    }
    if (c.max_tokens < 1) {
        throw ConfigError("config: data.max_tokens must be >= 1");
    }
    if (c.train.epochs < 1) {
        throw ConfigError("config: train.epochs must be >= 1");
    }
    if (c.train.batch_size < 1) {
        throw ConfigError("config: train.batch_size must be >= 1");
    }
    validate_adapter_config(c.model.adapter);
    validate_optim_config(c.train.optim);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    RunConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " of " + path.string() + " is not key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " of " + path.string() +
                              " has an empty key or value");
        }
        apply_config_entry(c, key, value);
    }
    resolve_run_config(c);
    return c;
}

std::string render_run_config(const RunConfig& c) {
    std::string out;
    out += "seed = " + std::to_string(c.seed) + "\n";
    out += std::string("mode = ") + freeze_mode_name(c.mode) + "\n";
    out += "data.depth = " + std::to_string(c.cohort.dims[0]) + "\n";
    out += "data.height = " + std::to_string(c.cohort.dims[1]) + "\n";
    out += "data.width = " + std::to_string(c.cohort.dims[2]) + "\n";
    out += "data.count.ad = " + std::to_string(c.cohort.counts[0]) + "\n";
    out += "data.count.cn = " + std::to_string(c.cohort.counts[1]) + "\n";
    out += "data.count.mci = " + std::to_string(c.cohort.counts[2]) + "\n";
    out += "data.train_fraction = " + fmt_f64(c.train_fraction) + "\n";
    out += "data.max_tokens = " + std::to_string(c.max_tokens) + "\n";
    out += "adapter.depth_reduction = " +
           std::to_string(c.model.adapter.depth_reduction) + "\n";
    out += "adapter.stage_channels = " +
           join_sizes(c.model.adapter.stage_channels) + "\n";
    out += "adapter.kernel = " + std::to_string(c.model.adapter.kernel[0]) +
           "," + std::to_string(c.model.adapter.kernel[1]) + "," +
           std::to_string(c.model.adapter.kernel[2]) + "\n";
    out += std::string("adapter.residual_block = ") +
           (c.model.adapter.residual_block ? "true" : "false") + "\n";
    out += "patch.depth = " + std::to_string(c.model.patch.patch_dims[0]) + "\n";
    out += "patch.height = " + std::to_string(c.model.patch.patch_dims[1]) + "\n";
    out += "patch.width = " + std::to_string(c.model.patch.patch_dims[2]) + "\n";
    out += "vision.token_dim = " + std::to_string(c.model.vision.token_dim) + "\n";
    out += "vision.blocks = " + std::to_string(c.model.vision.n_frozen_blocks) + "\n";
    out += "vision.proj_dim = " + std::to_string(c.model.vision.proj_dim) + "\n";
    out += "text.vocab_size = " + std::to_string(c.model.text.vocab_size) + "\n";
    out += "text.token_dim = " + std::to_string(c.model.text.token_dim) + "\n";
    out += "text.blocks = " + std::to_string(c.model.text.n_frozen_blocks) + "\n";
    out += "text.proj_dim = " + std::to_string(c.model.text.proj_dim) + "\n";
    out += "head.hidden = " + std::to_string(c.model.head_hidden) + "\n";
    out += "loss.temperature_init = " + fmt_f64(c.model.temperature_init) + "\n";
    out += "loss.lambda_init = " + fmt_f64(c.model.lambda_init) + "\n";
    out += std::string("loss.learn_weights = ") +
           (c.model.learn_loss_weights ? "true" : "false") + "\n";
    out += "train.epochs = " + std::to_string(c.train.epochs) + "\n";
    out += "train.batch_size = " + std::to_string(c.train.batch_size) + "\n";
    out += "optim.lr_adapter = " + fmt_f64(c.train.optim.lr_adapter) + "\n";
    out += "optim.lr_projection = " + fmt_f64(c.train.optim.lr_projection) + "\n";
    out += "optim.beta1 = " + fmt_f64(c.train.optim.beta1) + "\n";
    out += "optim.beta2 = " + fmt_f64(c.train.optim.beta2) + "\n";
    out += "optim.eps = " + fmt_f64(c.train.optim.eps) + "\n";
    out += "optim.weight_decay = " + fmt_f64(c.train.optim.weight_decay) + "\n";
    return out;
}

}  // namespace voxalign
