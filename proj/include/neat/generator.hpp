// generator.hpp
// Autoregressive inference: grow an atom set until the stop token, integrating
// the learned flow (Euler or Euler-Maruyama) for every new position; prefix
// completion from a rigidly transformed fragment.
#ifndef NEAT_GENERATOR_HPP
#define NEAT_GENERATOR_HPP

#include <functional>

#include "neat/checkpoint.hpp"
#include "neat/heads.hpp"

namespace neat {

enum class Integrator { euler, euler_maruyama };
enum class TypeSampling { multinomial, greedy };

struct GenConfig {
    Integrator integrator = Integrator::euler;
    int steps = 60;
    double tau = 0.3;
    double eta = 1e-3;
    double sigma = 1.4;
    int max_atoms = 1;
    TypeSampling type_sampling = TypeSampling::multinomial;
    std::uint64_t seed = 0;
    bool uniform_seed_type = false;         // else empirical training marginal
    bool prefix_translate = true;
    double prefix_translation_scale = 0.5;

    void validate() const {
        if (steps < 1) throw std::invalid_argument("GenConfig: steps must be >= 1");
        if (tau < 0.0) throw std::invalid_argument("GenConfig: tau must be >= 0");
        if (eta <= 0.0) throw std::invalid_argument("GenConfig: eta must be positive");
        if (sigma <= 0.0) throw std::invalid_argument("GenConfig: sigma must be positive");
        if (max_atoms < 1) throw std::invalid_argument("GenConfig: max_atoms must be >= 1");
    }
};

struct GenerationResult {
    std::vector<int> types;        // vocabulary indices, stop excluded
    std::vector<Vec3> positions;
    std::string stop_reason;       // "stop_token" or "max_atoms"
};

using VelocityFn = std::function<Vec3(const Vec3&, double)>;

// Explicit Euler over t in [0,1] with N equidistant steps.
inline Vec3 integrate_euler(const Vec3& x0, const VelocityFn& velocity, int steps) {
    if (steps < 1) throw std::invalid_argument("integrate_euler: steps must be >= 1");
    const double dt = 1.0 / static_cast<double>(steps);
    Vec3 x = x0;
    for (int k = 0; k < steps; ++k) {
        const Vec3 v = velocity(x, static_cast<double>(k) * dt);
        x = x + (dt * v);
        for (double c : x)
            if (!std::isfinite(c))
                throw std::runtime_error("integrate_euler: non-finite state at step " + std::to_string(k));
    }
    return x;
}

// Score from the velocity field: s = (t*v - x) / (1 - t); the denominator is
// floored at eta. Only valid for t < 1.
inline Vec3 velocity_to_score(const Vec3& v, const Vec3& x, double t, double eta) {
    if (t >= 1.0) throw std::domain_error("velocity_to_score: t must be below 1");
    const double denom = std::max(1.0 - t, eta);
    return (1.0 / denom) * ((t * v) - x);
}

// Diffusion coefficient w(t) = 2(1-t)/(t+eta).
inline double diffusion_coefficient(double t, double eta) {
    return 2.0 * (1.0 - t) / (t + eta);
}

// Stochastic sampler: per step x += [v + w(t)/2 * s] dt + sqrt(tau*w(t)*dt) xi.
// The final step is deterministic (no score, no noise) to avoid the t -> 1
// singularity. With tau = 0 and the score term disabled this reduces exactly
// to the Euler trajectory.
inline Vec3 integrate_euler_maruyama(const Vec3& x0, const VelocityFn& velocity, int steps,
                                     double tau, double eta, Rng& rng, bool score_term = true) {
    if (steps < 1) throw std::invalid_argument("integrate_euler_maruyama: steps must be >= 1");
    const double dt = 1.0 / static_cast<double>(steps);
    Vec3 x = x0;
    for (int k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vec3 v = velocity(x, t);
        Vec3 drift = v;
        Vec3 noise = {0.0, 0.0, 0.0};
        if (k < steps - 1) {
            const double w = diffusion_coefficient(t, eta);
            if (score_term) drift = drift + ((0.5 * w) * velocity_to_score(v, x, t, eta));
            if (tau > 0.0) noise = std::sqrt(tau * w * dt) * rng.normal3();
        }
        x = x + (dt * drift) + noise;
        for (double c : x)
            if (!std::isfinite(c))
                throw std::runtime_error("integrate_euler_maruyama: non-finite state at step " +
                                         std::to_string(k));
    }
    return x;
}

namespace detail {

inline int sample_type(const std::vector<float>& probs, TypeSampling mode, Rng& rng) {
    if (mode == TypeSampling::greedy) {
        int best = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
        return best;
    }
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

inline int sample_seed_type(const std::vector<double>& marginal, bool uniform, int n_elements,
                            Rng& rng) {
    if (uniform || marginal.empty()) return rng.uniform_int(n_elements);
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
        acc += marginal[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(marginal.size()) - 1;
}

inline Vec3 integrate_position(const VelocityFn& fn, const Vec3& x0, const GenConfig& cfg,
                               Rng& rng) {
    if (cfg.integrator == Integrator::euler) return integrate_euler(x0, fn, cfg.steps);
    return integrate_euler_maruyama(x0, fn, cfg.steps, cfg.tau, cfg.eta, rng);
}

// Shared autoregressive loop: extends the given atoms until a stop token or
// the atom cap. Already-present atoms are never modified.
inline GenerationResult grow_molecule(std::vector<int> types, std::vector<Vec3> positions,
                                      ParamStore& params, const ModelConfig& model,
                                      const GenConfig& cfg, Rng& rng) {
    NoGradGuard no_grad;
    GenerationResult out;
    out.stop_reason = "max_atoms";
    while (static_cast<int>(types.size()) < cfg.max_atoms) {
        Tensor z = encode(types, positions, model, params);
        const std::vector<float> probs = type_head(z, params).data();
        const int next_type = sample_type(probs, cfg.type_sampling, rng);
        if (next_type == model.vocab_size - 1) {
            out.stop_reason = "stop_token";
            break;
        }
        const Vec3 x0 = cfg.sigma * rng.normal3();
        VelocityFn fn = [&](const Vec3& x, double t) -> Vec3 {
            Tensor v = flow_velocity({x}, {t}, {next_type}, z, model, params);
            return {static_cast<double>(v.data()[0]), static_cast<double>(v.data()[1]),
                    static_cast<double>(v.data()[2])};
        };
        positions.push_back(integrate_position(fn, x0, cfg, rng));
        types.push_back(next_type);
    }
    out.types = std::move(types);
    out.positions = std::move(positions);
    return out;
}

}  // namespace detail

// Unconditional generation: seed atom type from the training marginal (or
// uniform), seed position from N(0, sigma^2 I), then the autoregressive loop.
// Per-molecule rng streams make results independent of generation order.
inline std::vector<GenerationResult> generate(ParamStore& params, const ModelConfig& model,
                                              const GenConfig& cfg,
                                              const std::vector<double>& type_marginal, int count) {
    cfg.validate();
    if (count < 0) throw std::invalid_argument("generate: count must be >= 0");
    const int n_elements = model.vocab_size - 1;
    Rng master(cfg.seed);
    std::vector<GenerationResult> results;
    results.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng = master.fork(static_cast<std::uint64_t>(i));
        const int seed_type = detail::sample_seed_type(type_marginal, cfg.uniform_seed_type,
                                                       n_elements, rng);
        const Vec3 seed_pos = cfg.sigma * rng.normal3();
        results.push_back(detail::grow_molecule({seed_type}, {seed_pos}, params, model, cfg, rng));
    }
    return results;
}

// Prefix completion: every sample starts from a freshly rotated (and by
// default translated) copy of the prefix; prefix atoms appear verbatim in the
// output.
inline std::vector<GenerationResult> complete_prefix(ParamStore& params, const ModelConfig& model,
                                                     const GenConfig& cfg,
                                                     const std::vector<int>& prefix_types,
                                                     const std::vector<Vec3>& prefix_positions,
                                                     int count) {
    cfg.validate();
    if (prefix_types.empty()) throw std::invalid_argument("complete_prefix: empty prefix");
    if (prefix_types.size() != prefix_positions.size())
        throw std::invalid_argument("complete_prefix: types/positions size mismatch");
    for (int t : prefix_types)
        if (t < 0 || t >= model.vocab_size - 1)
            throw std::invalid_argument("complete_prefix: prefix contains an invalid type index");
    if (static_cast<int>(prefix_types.size()) > cfg.max_atoms)
        throw std::invalid_argument("complete_prefix: prefix larger than max_atoms");

    Rng master(cfg.seed);
    std::vector<GenerationResult> results;
    results.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng = master.fork(static_cast<std::uint64_t>(i));
        std::vector<Vec3> moved = random_rigid_motion(prefix_positions, rng, cfg.prefix_translate,
                                                      cfg.prefix_translation_scale);
        results.push_back(detail::grow_molecule(prefix_types, std::move(moved), params, model, cfg, rng));
    }
    return results;
}

}  // namespace neat

#endif  // NEAT_GENERATOR_HPP
