// model.hpp
// Model configuration, named parameter store, initialization, and the fixed
// (non-learned) input featurizations: Fourier position features and sinusoidal
// time features.
#ifndef NEAT_MODEL_HPP
#define NEAT_MODEL_HPP

#include <map>
#include <string>
#include <vector>

#include "neat/tensor.hpp"

namespace neat {

struct EncoderConfig {
    int layers = 4;
    int heads = 4;
    int hidden = 128;
    int fourier_bands = 32;
    double fourier_min_freq = 0.1;   // 1/angstrom
    double fourier_max_freq = 10.0;  // 1/angstrom
    float dropout = 0.0f;

    long fourier_dim() const { return 3L * 2L * fourier_bands; }

    void validate() const {
        if (layers < 1) throw std::invalid_argument("EncoderConfig: layers must be >= 1");
        if (heads < 1 || hidden % heads != 0)
            throw std::invalid_argument("EncoderConfig: hidden must be divisible by heads");
        if (fourier_bands < 1) throw std::invalid_argument("EncoderConfig: fourier_bands must be >= 1");
        if (fourier_min_freq <= 0.0 || fourier_max_freq < fourier_min_freq)
            throw std::invalid_argument("EncoderConfig: bad fourier frequency range");
        if (dropout < 0.0f || dropout >= 1.0f)
            throw std::invalid_argument("EncoderConfig: dropout must be in [0,1)");
    }
};

struct FlowConfig {
    int blocks = 2;
    int hidden = 256;
    int time_dim = 128;  // sinusoidal time feature width

    void validate() const {
        if (blocks < 1) throw std::invalid_argument("FlowConfig: blocks must be >= 1");
        if (hidden < 1) throw std::invalid_argument("FlowConfig: hidden must be >= 1");
        if (time_dim < 2 || time_dim % 2 != 0)
            throw std::invalid_argument("FlowConfig: time_dim must be a positive even number");
    }
};

struct ModelConfig {
    EncoderConfig encoder;
    FlowConfig flow;
    int vocab_size = 6;  // elements + stop
    double sigma = 1.4;  // source noise std for flow matching

    void validate() const {
        encoder.validate();
        flow.validate();
        if (vocab_size < 2) throw std::invalid_argument("ModelConfig: vocab_size must be >= 2");
        if (sigma <= 0.0) throw std::invalid_argument("ModelConfig: sigma must be positive");
    }
};

// Named learnable tensors; map order gives a deterministic iteration order.
class ParamStore {
public:
    Tensor& create(const std::string& name, std::vector<long> shape) {
        auto [it, inserted] = params_.emplace(name, Tensor::zeros(std::move(shape), true));
        if (!inserted) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
        return it->second;
    }

    Tensor& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    std::map<std::string, Tensor>& map() { return params_; }
    const std::map<std::string, Tensor>& map() const { return params_; }

    long total_params() const {
        long n = 0;
        for (const auto& [name, t] : params_) n += t.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

private:
    std::map<std::string, Tensor> params_;
};

namespace init {

inline void normal_(Tensor& t, Rng& rng, float std_dev) {
    for (float& v : t.data()) v = static_cast<float>(rng.normal()) * std_dev;
}

inline void ones_(Tensor& t) {
    for (float& v : t.data()) v = 1.0f;
}

}  // namespace init

// Creates every trunk and head parameter. Residual projections are scaled by
// 1/sqrt(2*layers); adaLN modulations and the flow output layer start at zero
// so the flow head is the identity-residual map with zero output at init.
inline ParamStore init_params(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ParamStore ps;
    const long h = cfg.encoder.hidden;
    const long v = cfg.vocab_size;
    const long fdim = cfg.encoder.fourier_dim();
    const float base_std = 0.02f;
    const float resid_std = base_std / std::sqrt(2.0f * static_cast<float>(cfg.encoder.layers));

    init::normal_(ps.create("encoder.type_embed", {v, h}), rng, base_std);
    init::normal_(ps.create("encoder.fourier_proj.w", {fdim, h}), rng, base_std);
    ps.create("encoder.fourier_proj.b", {h});
    for (int l = 0; l < cfg.encoder.layers; ++l) {
        const std::string p = "encoder.block" + std::to_string(l) + ".";
        init::ones_(ps.create(p + "ln1.w", {h}));
        init::normal_(ps.create(p + "attn.qkv.w", {h, 3 * h}), rng, base_std);
        ps.create(p + "attn.qkv.b", {3 * h});
        init::normal_(ps.create(p + "attn.proj.w", {h, h}), rng, resid_std);
        ps.create(p + "attn.proj.b", {h});
        init::ones_(ps.create(p + "ln2.w", {h}));
        init::normal_(ps.create(p + "mlp.fc.w", {h, 4 * h}), rng, base_std);
        init::normal_(ps.create(p + "mlp.proj.w", {4 * h, h}), rng, resid_std);
    }
    init::ones_(ps.create("encoder.ln_f.w", {h}));

    init::normal_(ps.create("type_head.w", {h, v}), rng, base_std);
    ps.create("type_head.b", {v});

    const long fh = cfg.flow.hidden;
    init::normal_(ps.create("flow_head.pos_proj.w", {fdim, fh}), rng, base_std);
    ps.create("flow_head.pos_proj.b", {fh});
    init::normal_(ps.create("flow_head.type_embed", {v, fh}), rng, base_std);
    init::normal_(ps.create("flow_head.time_proj.w", {cfg.flow.time_dim, fh}), rng, base_std);
    ps.create("flow_head.time_proj.b", {fh});
    init::normal_(ps.create("flow_head.z_proj.w", {h, fh}), rng, base_std);
    ps.create("flow_head.z_proj.b", {fh});
    for (int l = 0; l < cfg.flow.blocks; ++l) {
        const std::string p = "flow_head.block" + std::to_string(l) + ".";
        ps.create(p + "ada.w", {fh, 3 * fh});  // zero: gate 0 at init
        ps.create(p + "ada.b", {3 * fh});
        init::normal_(ps.create(p + "mlp.fc.w", {fh, fh}), rng, base_std);
        ps.create(p + "mlp.fc.b", {fh});
        init::normal_(ps.create(p + "mlp.proj.w", {fh, fh}), rng, base_std);
        ps.create(p + "mlp.proj.b", {fh});
    }
    ps.create("flow_head.final.ada.w", {fh, 2 * fh});
    ps.create("flow_head.final.ada.b", {2 * fh});
    ps.create("flow_head.final.out.w", {fh, 3});  // zero-initialized output layer
    ps.create("flow_head.final.out.b", {3});
    return ps;
}

// Fourier position features: per coordinate d and band k, the pair
// [sin(2*pi*f_k x_d), cos(2*pi*f_k x_d)] with geometric frequencies in
// [min_freq, max_freq]. Output is a plain data tensor [n, 6*bands].
inline Tensor fourier_features(const std::vector<Vec3>& positions, const EncoderConfig& cfg) {
    const long n = static_cast<long>(positions.size());
    const int bands = cfg.fourier_bands;
    std::vector<double> freqs(static_cast<std::size_t>(bands));
    for (int k = 0; k < bands; ++k) {
        double t = bands == 1 ? 0.0 : static_cast<double>(k) / (bands - 1);
        freqs[static_cast<std::size_t>(k)] =
            cfg.fourier_min_freq * std::pow(cfg.fourier_max_freq / cfg.fourier_min_freq, t);
    }
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(n * cfg.fourier_dim()));
    for (const Vec3& p : positions) {
        for (int d = 0; d < 3; ++d) {
            for (int k = 0; k < bands; ++k) {
                double arg = 2.0 * M_PI * freqs[static_cast<std::size_t>(k)] * p[static_cast<std::size_t>(d)];
                out.push_back(static_cast<float>(std::sin(arg)));
                out.push_back(static_cast<float>(std::cos(arg)));
            }
        }
    }
    return Tensor::from_data({n, cfg.fourier_dim()}, std::move(out));
}

// Sinusoidal features of t in [0,1], scaled to [0,1000] with geometric
// frequencies as in standard diffusion-transformer time embeddings.
inline Tensor time_features(const std::vector<double>& t, int time_dim) {
    const long n = static_cast<long>(t.size());
    const int half = time_dim / 2;
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(n * time_dim));
    for (double ti : t) {
        const double u = 1000.0 * ti;
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
            out.push_back(static_cast<float>(std::cos(u * freq)));
            out.push_back(static_cast<float>(std::sin(u * freq)));
        }
    }
    return Tensor::from_data({n, time_dim}, std::move(out));
}

}  // namespace neat

#endif  // NEAT_MODEL_HPP
