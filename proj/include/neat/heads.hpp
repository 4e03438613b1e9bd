// heads.hpp
// Prediction heads: categorical next-type head with soft-target cross-entropy,
// exact linear-assignment coupling of noise to targets, logit-normal time
// sampling, linear interpolation paths, and the adaLN-MLP velocity head with
// its flow-matching loss.
#ifndef NEAT_HEADS_HPP
#define NEAT_HEADS_HPP

#include <limits>
#include <numeric>

#include "neat/encoder.hpp"

namespace neat {

// -- next-type head ------------------------------------------------------------

// softmax(W z + b) over the full vocabulary (stop included), [1, vocab].
inline Tensor type_head(const Tensor& z, ParamStore& params) {
    return softmax_lastdim(add_rowvec(matmul(z, params.at("type_head.w")), params.at("type_head.b")));
}

// Soft target over the vocabulary: mean one-hot of the target multiset, or a
// one-hot on the stop token when the target set is empty.
inline std::vector<float> soft_type_target(const std::vector<int>& target_types, int vocab_size) {
    std::vector<float> q(static_cast<std::size_t>(vocab_size), 0.0f);
    if (target_types.empty()) {
        q[static_cast<std::size_t>(vocab_size - 1)] = 1.0f;
        return q;
    }
    const float w = 1.0f / static_cast<float>(target_types.size());
    for (int t : target_types) {
        if (t < 0 || t >= vocab_size)
            throw std::invalid_argument("soft_type_target: type index out of range");
        q[static_cast<std::size_t>(t)] += w;
    }
    return q;
}

// Cross-entropy -sum_c q_c log p_c against the soft target.
inline Tensor type_loss(const Tensor& pred, const std::vector<int>& target_types, int vocab_size) {
    if (pred.rows() != 1 || pred.cols() != vocab_size)
        throw std::invalid_argument("type_loss: prediction shape " + shape_str(pred.shape()) +
                                    " does not match vocab size " + std::to_string(vocab_size));
    Tensor q = Tensor::from_data({1, static_cast<long>(vocab_size)},
                                 soft_type_target(target_types, vocab_size));
    return scale(sum_all(mul(q, log_clamped(pred))), -1.0f);
}

// -- optimal-transport coupling --------------------------------------------------

// Exact minimum-cost assignment for a square cost matrix (shortest augmenting
// path formulation with potentials, O(n^3)). Returns row -> column.
inline std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    for (const auto& row : cost)
        if (static_cast<int>(row.size()) != n)
            throw std::invalid_argument("solve_assignment: cost matrix must be square");

    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            int i0 = p[static_cast<std::size_t>(j0)], j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                             u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

// Permutation pi minimizing sum_i |x1_i - x0_{pi(i)}| over Euclidean distances.
// Reorder x0 as x0[pi[i]] to pair it with x1 row i.
inline std::vector<int> couple_ot(const std::vector<Vec3>& x1, const std::vector<Vec3>& x0) {
    if (x1.size() != x0.size()) throw std::invalid_argument("couple_ot: row count mismatch");
    const int k = static_cast<int>(x1.size());
    if (k == 0) return {};
    std::vector<std::vector<double>> cost(static_cast<std::size_t>(k),
                                          std::vector<double>(static_cast<std::size_t>(k)));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = distance(x1[static_cast<std::size_t>(i)], x0[static_cast<std::size_t>(j)]);
    return solve_assignment(cost);
}

inline double transport_cost(const std::vector<Vec3>& x1, const std::vector<Vec3>& x0,
                             const std::vector<int>& perm) {
    double c = 0.0;
    for (std::size_t i = 0; i < x1.size(); ++i) c += distance(x1[i], x0[static_cast<std::size_t>(perm[i])]);
    return c;
}

// -- time sampling ----------------------------------------------------------------

struct TimeSamplerConfig {
    double mix_uniform = 0.02;
    double m = 0.8;
    double s = 1.7;

    void validate() const {
        if (mix_uniform < 0.0 || mix_uniform > 1.0)
            throw std::invalid_argument("TimeSamplerConfig: mix_uniform must be in [0,1]");
        if (s <= 0.0) throw std::invalid_argument("TimeSamplerConfig: s must be positive");
    }
};

constexpr double kTimeClamp = 1e-5;

// Mixture draw: uniform with probability mix_uniform, otherwise logit-normal
// t = sigmoid(m + s*n). Results are clamped to (kTimeClamp, 1 - kTimeClamp).
inline std::vector<double> sample_time(const TimeSamplerConfig& cfg, Rng& rng, int count) {
    cfg.validate();
    if (count < 1) throw std::invalid_argument("sample_time: count must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(count));
    for (double& t : out) {
        if (rng.uniform() < cfg.mix_uniform) {
            t = rng.uniform();
        } else {
            double logit = cfg.m + cfg.s * rng.normal();
            t = 1.0 / (1.0 + std::exp(-logit));
        }
        t = std::min(std::max(t, kTimeClamp), 1.0 - kTimeClamp);
    }
    return out;
}

// Density of the logit-normal mixture; used by tests against sampled draws.
inline double time_density(const TimeSamplerConfig& cfg, double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double logit = std::log(t / (1.0 - t));
    const double ln = std::exp(-(logit - cfg.m) * (logit - cfg.m) / (2.0 * cfg.s * cfg.s)) /
                      (t * (1.0 - t) * cfg.s * std::sqrt(2.0 * M_PI));
    return cfg.mix_uniform * 1.0 + (1.0 - cfg.mix_uniform) * ln;
}

// -- interpolation paths -----------------------------------------------------------

// x_t = (1-t) x0 + t x1 row-wise; v = x1 - x0.
inline std::pair<std::vector<Vec3>, std::vector<Vec3>> interpolate(const std::vector<Vec3>& x0,
                                                                   const std::vector<Vec3>& x1,
                                                                   const std::vector<double>& t) {
    if (x0.size() != x1.size() || x0.size() != t.size())
        throw std::invalid_argument("interpolate: size mismatch");
    std::vector<Vec3> xt(x0.size()), v(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (t[i] < 0.0 || t[i] > 1.0) throw std::invalid_argument("interpolate: t out of [0,1]");
        xt[i] = ((1.0 - t[i]) * x0[i]) + (t[i] * x1[i]);
        v[i] = x1[i] - x0[i];
    }
    return {std::move(xt), std::move(v)};
}

// -- velocity head -------------------------------------------------------------------

namespace detail {
inline Tensor positions_tensor(const std::vector<Vec3>& x) {
    std::vector<float> data;
    data.reserve(x.size() * 3);
    for (const Vec3& p : x)
        for (double c : p) data.push_back(static_cast<float>(c));
    return Tensor::from_data({static_cast<long>(x.size()), 3}, std::move(data));
}
}  // namespace detail

// Velocity prediction for a batch of interpolated positions. Conditioning is
// the atom-wise sum of position features, type embedding, time embedding and
// the projected set representation; each adaLN block modulates a no-affine
// layernorm with scale/shift/gate derived from that sum.
inline Tensor flow_velocity(const std::vector<Vec3>& x_t, const std::vector<double>& t,
                            const std::vector<int>& cond_types, const Tensor& z,
                            const ModelConfig& cfg, ParamStore& params) {
    const long k = static_cast<long>(x_t.size());
    if (k == 0) throw std::invalid_argument("flow_velocity: empty batch");
    if (t.size() != x_t.size() || cond_types.size() != x_t.size())
        throw std::invalid_argument("flow_velocity: size mismatch");
    for (double ti : t)
        if (ti < 0.0 || ti > 1.0) throw std::invalid_argument("flow_velocity: t out of [0,1]");
    const int stop = cfg.vocab_size - 1;
    for (int c : cond_types)
        if (c == stop) throw std::invalid_argument("flow_velocity: stop token cannot condition a position");

    const long fh = cfg.flow.hidden;
    Tensor pos = add_rowvec(matmul(fourier_features(x_t, cfg.encoder), params.at("flow_head.pos_proj.w")),
                            params.at("flow_head.pos_proj.b"));
    Tensor typ = embedding_lookup(params.at("flow_head.type_embed"), cond_types);
    Tensor tim = add_rowvec(matmul(time_features(t, cfg.flow.time_dim), params.at("flow_head.time_proj.w")),
                            params.at("flow_head.time_proj.b"));
    Tensor zc = add_rowvec(matmul(z, params.at("flow_head.z_proj.w")), params.at("flow_head.z_proj.b"));
    Tensor cond = add(add(pos, typ), add(tim, repeat_rows(zc, k)));

    Tensor h = cond;
    for (int l = 0; l < cfg.flow.blocks; ++l) {
        const std::string p = "flow_head.block" + std::to_string(l) + ".";
        Tensor mod = add_rowvec(matmul(cond, params.at(p + "ada.w")), params.at(p + "ada.b"));
        Tensor shift = slice_cols(mod, 0, fh);
        Tensor scl = slice_cols(mod, fh, 2 * fh);
        Tensor gate = slice_cols(mod, 2 * fh, 3 * fh);
        Tensor u = add(mul(layernorm(h), add_const(scl, 1.0f)), shift);
        u = add_rowvec(matmul(u, params.at(p + "mlp.fc.w")), params.at(p + "mlp.fc.b"));
        u = add_rowvec(matmul(gelu(u), params.at(p + "mlp.proj.w")), params.at(p + "mlp.proj.b"));
        h = add(h, mul(gate, u));
    }
    Tensor mod = add_rowvec(matmul(cond, params.at("flow_head.final.ada.w")),
                            params.at("flow_head.final.ada.b"));
    Tensor shift = slice_cols(mod, 0, fh);
    Tensor scl = slice_cols(mod, fh, 2 * fh);
    Tensor u = add(mul(layernorm(h), add_const(scl, 1.0f)), shift);
    return add_rowvec(matmul(u, params.at("flow_head.final.out.w")), params.at("flow_head.final.out.b"));
}

// -- flow-matching loss ----------------------------------------------------------------

struct CfmBatch {
    std::vector<Vec3> x_t;
    std::vector<double> t;
    std::vector<Vec3> v_target;
    std::vector<int> cond_types;
};

// Builds the training rows for one target set: noise draw, OT coupling, and
// `resamples` independent time draws per coupled path.
inline CfmBatch make_cfm_batch(const std::vector<Vec3>& x1, const std::vector<int>& target_types,
                               double sigma, int resamples, const TimeSamplerConfig& time_cfg,
                               Rng& rng) {
    if (x1.empty()) throw std::invalid_argument("make_cfm_batch: empty target set");
    if (x1.size() != target_types.size())
        throw std::invalid_argument("make_cfm_batch: types/positions size mismatch");
    if (resamples < 1) throw std::invalid_argument("make_cfm_batch: resamples must be >= 1");

    const std::size_t k = x1.size();
    std::vector<Vec3> x0(k);
    for (Vec3& p : x0) p = sigma * rng.normal3();
    std::vector<int> perm = couple_ot(x1, x0);
    std::vector<Vec3> x0c(k);
    for (std::size_t i = 0; i < k; ++i) x0c[i] = x0[static_cast<std::size_t>(perm[i])];

    CfmBatch batch;
    batch.x_t.reserve(k * static_cast<std::size_t>(resamples));
    batch.t.reserve(k * static_cast<std::size_t>(resamples));
    batch.v_target.reserve(k * static_cast<std::size_t>(resamples));
    batch.cond_types.reserve(k * static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        std::vector<double> t = sample_time(time_cfg, rng, static_cast<int>(k));
        auto [xt, v] = interpolate(x0c, x1, t);
        for (std::size_t i = 0; i < k; ++i) {
            batch.x_t.push_back(xt[i]);
            batch.t.push_back(t[i]);
            batch.v_target.push_back(v[i]);
            batch.cond_types.push_back(target_types[i]);
        }
    }
    return batch;
}

// Mean squared velocity error over all (row, resample) pairs; equals the
// 1/|V_T| row average taken uniformly over the time resamples.
inline Tensor cfm_loss(const CfmBatch& batch, const Tensor& z, const ModelConfig& cfg,
                       ParamStore& params) {
    if (batch.x_t.empty()) throw std::invalid_argument("cfm_loss: empty batch");
    Tensor pred = flow_velocity(batch.x_t, batch.t, batch.cond_types, z, cfg, params);
    Tensor target = detail::positions_tensor(batch.v_target);
    Tensor diff = sub(pred, target);
    return scale(sum_all(mul(diff, diff)), 1.0f / static_cast<float>(batch.x_t.size()));
}

}  // namespace neat

#endif  // NEAT_HEADS_HPP
