#include "tend/config.hpp"

#include <map>
#include <sstream>

#include "tend/errors.hpp"
#include "tend/util.hpp"

namespace tend {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "' wants true/false, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' wants a number, got '" + v + "'");
    }
    if (used != v.size())
        throw ConfigError("key '" + key + "' wants a number, got '" + v + "'");
    return out;
}

int parse_int(const std::string& v, const std::string& key) {
    size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' wants an integer, got '" + v + "'");
    }
    if (used != v.size())
        throw ConfigError("key '" + key + "' wants an integer, got '" + v + "'");
    return static_cast<int>(out);
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
    size_t used = 0;
    unsigned long long out = 0;
    try {
        out = std::stoull(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' wants an unsigned integer, got '" + v + "'");
    }
    if (used != v.size())
        throw ConfigError("key '" + key + "' wants an unsigned integer, got '" + v + "'");
    return out;
}

std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += items[i];
    }
    return out;
}

}  // namespace

DatasetSpec RunConfig::dataset_spec() const {
    DatasetSpec spec = data;
    spec.input_side = arch.input_side;
    spec.channels = arch.channels;
    spec.seed = data_seed();
    return spec;
}

SyntheticParams RunConfig::synthetic_params() const {
    SyntheticParams params = synth;
    params.seed = data_seed();
    return params;
}

TrainConfig RunConfig::stage1_config() const {
    TrainConfig cfg;
    cfg.stage = 1;
    cfg.epochs = stage1_epochs;
    cfg.learning_rate = learning_rate;
    cfg.batch_size = batch_size;
    cfg.seed = train_seed();
    return cfg;
}

TrainConfig RunConfig::stage2_config() const {
    TrainConfig cfg;
    cfg.stage = 2;
    cfg.epochs = stage2_epochs;
    cfg.learning_rate = learning_rate;
    cfg.batch_size = batch_size;
    cfg.warmup_epochs = warmup_epochs;
    cfg.margin_r = margin_r;
    cfg.margin_reduction = margin_reduction;
    cfg.supervised_mode = supervised;
    cfg.seed = train_seed();
    return cfg;
}

void RunConfig::validate() const {
    arch.validate();
    if (synthetic())
        synthetic_params().validate();
    else
        dataset_spec().validate();
    stage1_config().validate();
    stage2_config().validate();
    if (lambda < 0.0 || lambda > 1.0)
        throw ConfigError("score.lambda must lie in [0, 1], got " + format_double(lambda));
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "data.id_class = " << data.id_class << '\n';
    os << "data.ood_classes = " << join_list(data.ood_classes) << '\n';
    os << "data.ood_train_fraction = " << format_double(data.ood_train_fraction) << '\n';
    os << "data.root = " << data.root << '\n';
    os << "data.train_fraction = " << format_double(data.train_fraction) << '\n';
    os << "model.channels = " << arch.channels << '\n';
    os << "model.input_side = " << arch.input_side << '\n';
    os << "score.lambda = " << format_double(lambda) << '\n';
    os << "score.mode = " << score_mode_name(mode) << '\n';
    os << "seed = " << seed << '\n';
    os << "synthetic.motif = " << motif_name(synth.motif) << '\n';
    os << "synthetic.n_id = " << synth.n_id << '\n';
    os << "synthetic.n_ood = " << synth.n_ood << '\n';
    os << "synthetic.noise_sigma = " << format_double(synth.noise_sigma) << '\n';
    os << "train.batch_size = " << batch_size << '\n';
    os << "train.learning_rate = " << format_double(learning_rate) << '\n';
    os << "train.margin_r = " << format_double(margin_r) << '\n';
    os << "train.margin_reduction = " << margin_reduction_name(margin_reduction) << '\n';
    os << "train.stage1_epochs = " << stage1_epochs << '\n';
    os << "train.stage2_epochs = " << stage2_epochs << '\n';
    os << "train.supervised = " << (supervised ? "true" : "false") << '\n';
    os << "train.warmup_epochs = " << warmup_epochs << '\n';
    return os.str();
}

RunConfig parse_run_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " has no '=': '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError("config key '" + key + "' appears twice");
    }

    RunConfig cfg;
    for (const auto& [key, value] : kv) {
        if (key == "data.root")
            cfg.data.root = value;
        else if (key == "data.id_class")
            cfg.data.id_class = value;
        else if (key == "data.ood_classes")
            cfg.data.ood_classes = split_csv_list(value);
        else if (key == "data.train_fraction")
            cfg.data.train_fraction = parse_double(value, key);
        else if (key == "data.ood_train_fraction")
            cfg.data.ood_train_fraction = parse_double(value, key);
        else if (key == "model.input_side")
            cfg.arch.input_side = parse_int(value, key);
        else if (key == "model.channels")
            cfg.arch.channels = parse_int(value, key);
        else if (key == "synthetic.n_id")
            cfg.synth.n_id = parse_int(value, key);
        else if (key == "synthetic.n_ood")
            cfg.synth.n_ood = parse_int(value, key);
        else if (key == "synthetic.motif")
            cfg.synth.motif = motif_from_name(value);
        else if (key == "synthetic.noise_sigma")
            cfg.synth.noise_sigma = parse_double(value, key);
        else if (key == "train.stage1_epochs")
            cfg.stage1_epochs = parse_int(value, key);
        else if (key == "train.stage2_epochs")
            cfg.stage2_epochs = parse_int(value, key);
        else if (key == "train.learning_rate")
            cfg.learning_rate = parse_double(value, key);
        else if (key == "train.batch_size")
            cfg.batch_size = parse_int(value, key);
        else if (key == "train.warmup_epochs")
            cfg.warmup_epochs = parse_int(value, key);
        else if (key == "train.margin_r")
            cfg.margin_r = parse_double(value, key);
        else if (key == "train.margin_reduction")
            cfg.margin_reduction = margin_reduction_from_name(value);
        else if (key == "train.supervised")
            cfg.supervised = parse_bool(value, key);
        else if (key == "score.lambda")
            cfg.lambda = parse_double(value, key);
        else if (key == "score.mode")
            cfg.mode = score_mode_from_name(value);
        else if (key == "seed")
            cfg.seed = parse_u64(value, key);
        else
            throw ConfigError("unknown config key '" + key + "'");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config_text(read_text_file(path));
}

}  // namespace tend
