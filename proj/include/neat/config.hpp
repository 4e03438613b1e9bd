// config.hpp
// Whole-run configuration: model, sampler and training settings parsed from
// `key = value` text with '#' comments. Unknown keys are rejected.
#ifndef NEAT_CONFIG_HPP
#define NEAT_CONFIG_HPP

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "neat/model.hpp"
#include "neat/sampler.hpp"

namespace neat {

struct TrainConfig {
    int epochs = 400;
    int batch_size = 32;
    double lr = 1e-3;
    int warmup_epochs = 20;
    double min_lr_fraction = 0.10;
    double weight_decay = 1e-6;
    double clip_norm = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.95;
    std::uint64_t seed = 1;
    SamplerConfig sampler;
    double sigma = 1.4;
    int time_resamples = 4;
    double val_fraction = 0.1;  // 0 validates on the training set

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
        if (warmup_epochs < 0) throw std::invalid_argument("TrainConfig: warmup_epochs must be >= 0");
        if (min_lr_fraction <= 0.0 || min_lr_fraction > 1.0)
            throw std::invalid_argument("TrainConfig: min_lr_fraction must be in (0,1]");
        if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
        if (clip_norm <= 0.0) throw std::invalid_argument("TrainConfig: clip_norm must be positive");
        if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0)
            throw std::invalid_argument("TrainConfig: adam betas must be in (0,1)");
        if (sigma <= 0.0) throw std::invalid_argument("TrainConfig: sigma must be positive");
        if (time_resamples < 1) throw std::invalid_argument("TrainConfig: time_resamples must be >= 1");
        if (val_fraction < 0.0 || val_fraction >= 1.0)
            throw std::invalid_argument("TrainConfig: val_fraction must be in [0,1)");
        sampler.validate();
    }
};

struct Config {
    std::vector<std::string> elements = {"H", "C", "N", "O", "F"};
    ModelConfig model;
    TrainConfig train;

    AtomVocabulary vocabulary() const { return AtomVocabulary(elements); }

    void finalize() {
        model.vocab_size = static_cast<int>(elements.size()) + 1;
        model.sigma = train.sigma;
        model.validate();
        train.validate();
    }
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + value + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for " + key + ": '" + value + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad seed value for " + key + ": '" + value + "'");
    }
}

inline std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream is(value);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

// Applies one key to a config; throws ConfigError on unknown keys.
inline void apply_config_key(Config& cfg, const std::string& key, const std::string& value) {
    using detail::parse_double;
    using detail::parse_int;
    using detail::parse_u64;

    if (key == "elements") cfg.elements = detail::parse_list(value);
    else if (key == "hidden") cfg.model.encoder.hidden = parse_int(key, value);
    else if (key == "layers") cfg.model.encoder.layers = parse_int(key, value);
    else if (key == "heads") cfg.model.encoder.heads = parse_int(key, value);
    else if (key == "fourier_bands") cfg.model.encoder.fourier_bands = parse_int(key, value);
    else if (key == "fourier_min_freq") cfg.model.encoder.fourier_min_freq = parse_double(key, value);
    else if (key == "fourier_max_freq") cfg.model.encoder.fourier_max_freq = parse_double(key, value);
    else if (key == "dropout") cfg.model.encoder.dropout = static_cast<float>(parse_double(key, value));
    else if (key == "flow_hidden") cfg.model.flow.hidden = parse_int(key, value);
    else if (key == "flow_blocks") cfg.model.flow.blocks = parse_int(key, value);
    else if (key == "beta") cfg.train.sampler.beta = parse_double(key, value);
    else if (key == "gamma") cfg.train.sampler.gamma = parse_double(key, value);
    else if (key == "sigma") cfg.train.sigma = parse_double(key, value);
    else if (key == "epochs") cfg.train.epochs = parse_int(key, value);
    else if (key == "batch_size") cfg.train.batch_size = parse_int(key, value);
    else if (key == "lr") cfg.train.lr = parse_double(key, value);
    else if (key == "warmup_epochs") cfg.train.warmup_epochs = parse_int(key, value);
    else if (key == "min_lr_fraction") cfg.train.min_lr_fraction = parse_double(key, value);
    else if (key == "weight_decay") cfg.train.weight_decay = parse_double(key, value);
    else if (key == "clip_norm") cfg.train.clip_norm = parse_double(key, value);
    else if (key == "adam_beta1") cfg.train.adam_beta1 = parse_double(key, value);
    else if (key == "adam_beta2") cfg.train.adam_beta2 = parse_double(key, value);
    else if (key == "seed") cfg.train.seed = parse_u64(key, value);
    else if (key == "time_resamples") cfg.train.time_resamples = parse_int(key, value);
    else if (key == "val_fraction") cfg.train.val_fraction = parse_double(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline Config parse_config(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config: empty key or value at line " + std::to_string(lineno));
        apply_config_key(cfg, key, value);
    }
    cfg.finalize();
    return cfg;
}

inline std::string config_to_text(const Config& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "elements = ";
    for (std::size_t i = 0; i < cfg.elements.size(); ++i)
        out << (i ? "," : "") << cfg.elements[i];
    out << "\n";
    out << "hidden = " << cfg.model.encoder.hidden << "\n";
    out << "layers = " << cfg.model.encoder.layers << "\n";
    out << "heads = " << cfg.model.encoder.heads << "\n";
    out << "fourier_bands = " << cfg.model.encoder.fourier_bands << "\n";
    out << "fourier_min_freq = " << cfg.model.encoder.fourier_min_freq << "\n";
    out << "fourier_max_freq = " << cfg.model.encoder.fourier_max_freq << "\n";
    out << "dropout = " << cfg.model.encoder.dropout << "\n";
    out << "flow_hidden = " << cfg.model.flow.hidden << "\n";
    out << "flow_blocks = " << cfg.model.flow.blocks << "\n";
    out << "beta = " << cfg.train.sampler.beta << "\n";
    out << "gamma = " << cfg.train.sampler.gamma << "\n";
    out << "sigma = " << cfg.train.sigma << "\n";
    out << "epochs = " << cfg.train.epochs << "\n";
    out << "batch_size = " << cfg.train.batch_size << "\n";
    out << "lr = " << cfg.train.lr << "\n";
    out << "warmup_epochs = " << cfg.train.warmup_epochs << "\n";
    out << "min_lr_fraction = " << cfg.train.min_lr_fraction << "\n";
    out << "weight_decay = " << cfg.train.weight_decay << "\n";
    out << "clip_norm = " << cfg.train.clip_norm << "\n";
    out << "adam_beta1 = " << cfg.train.adam_beta1 << "\n";
    out << "adam_beta2 = " << cfg.train.adam_beta2 << "\n";
    out << "seed = " << cfg.train.seed << "\n";
    out << "time_resamples = " << cfg.train.time_resamples << "\n";
    out << "val_fraction = " << cfg.train.val_fraction << "\n";
    return out.str();
}

}  // namespace neat

#endif  // NEAT_CONFIG_HPP
