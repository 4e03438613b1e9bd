// trainer.hpp
// Training loop: per-graph rotation augmentation and split sampling, joint
// teacher-forced loss, AdamW with decoupled weight decay, cosine schedule with
// linear warmup, global-norm clipping, validation and checkpointing.
#ifndef NEAT_TRAINER_HPP
#define NEAT_TRAINER_HPP

#include <filesystem>
#include <fstream>
#include <iostream>

#include "neat/chem.hpp"
#include "neat/checkpoint.hpp"
#include "neat/heads.hpp"

namespace neat {

// Linear warmup to lr, then cosine decay to min_lr_fraction * lr at the final
// epoch.
inline double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
    if (cfg.warmup_epochs > 0 && epoch < cfg.warmup_epochs)
        return cfg.lr * static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
    const double lr_min = cfg.min_lr_fraction * cfg.lr;
    const int last = cfg.epochs - 1;
    if (last <= cfg.warmup_epochs) return epoch >= last ? lr_min : cfg.lr;
    const double progress = std::min(
        1.0, static_cast<double>(epoch - cfg.warmup_epochs) / static_cast<double>(last - cfg.warmup_epochs));
    return lr_min + (cfg.lr - lr_min) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// AdamW with decoupled weight decay: p *= (1 - lr*wd) before the Adam update.
class AdamW {
public:
    AdamW(ParamStore& params, const TrainConfig& cfg, double eps = 1e-8)
        : params_(params), beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2),
          weight_decay_(cfg.weight_decay), eps_(eps) {
        for (auto& [name, t] : params.map()) {
            State s;
            s.m.assign(t.data().size(), 0.0f);
            s.v.assign(t.data().size(), 0.0f);
            state_.emplace(name, std::move(s));
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (auto& [name, p] : params_.map()) {
            State& s = state_.at(name);
            auto& data = p.data();
            const auto& grad = p.grad();
            for (std::size_t i = 0; i < data.size(); ++i) {
                data[i] *= static_cast<float>(1.0 - lr * weight_decay_);
                const double g = grad[i];
                s.m[i] = static_cast<float>(beta1_ * s.m[i] + (1.0 - beta1_) * g);
                s.v[i] = static_cast<float>(beta2_ * s.v[i] + (1.0 - beta2_) * g * g);
                const double mhat = s.m[i] / bc1;
                const double vhat = s.v[i] / bc2;
                data[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    struct State {
        std::vector<float> m, v;
    };
    ParamStore& params_;
    double beta1_, beta2_, weight_decay_, eps_;
    long t_ = 0;
    std::map<std::string, State> state_;
};

// Scales all gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
inline double clip_global_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (auto& [name, p] : params.map())
        for (float g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const float s = static_cast<float>(max_norm / norm);
        for (auto& [name, p] : params.map())
            for (float& g : p.grad()) g *= s;
    }
    return norm;
}

struct StepLosses {
    double loss_type = 0.0;
    double loss_cfm = 0.0;
    double total() const { return loss_type + loss_cfm; }
};

namespace detail {

inline std::vector<Vec3> rotate_all(const std::vector<Vec3>& positions, const Mat3& rot) {
    std::vector<Vec3> out;
    out.reserve(positions.size());
    for (const Vec3& p : positions) out.push_back(rotate(rot, p));
    return out;
}

// Joint loss of one graph under one split draw. Teacher forcing: the flow head
// sees the true target types, never the type head's prediction. An empty
// target supervises the stop token and skips the flow loss.
inline std::pair<Tensor, StepLosses> graph_loss(const MolecularGraph& g, const Config& cfg,
                                                ParamStore& params, Rng& rng, bool training) {
    const Mat3 rot = random_rotation(rng);
    SubgraphSplit split = sample_split(g, cfg.train.sampler, rng);
    std::vector<Vec3> source_pos = rotate_all(split.source_positions, rot);

    Tensor z = encode(split.source_types, source_pos, cfg.model, params, training, &rng);
    Tensor probs = type_head(z, params);
    Tensor lt = type_loss(probs, split.target_types, cfg.model.vocab_size);

    StepLosses losses;
    losses.loss_type = lt.item();
    Tensor total = lt;
    if (!split.target.empty()) {
        std::vector<Vec3> target_pos = rotate_all(split.target_positions, rot);
        TimeSamplerConfig time_cfg;
        CfmBatch batch = make_cfm_batch(target_pos, split.target_types, cfg.train.sigma,
                                        cfg.train.time_resamples, time_cfg, rng);
        Tensor lc = cfm_loss(batch, z, cfg.model, params);
        losses.loss_cfm = lc.item();
        total = add(total, lc);
    }
    return {total, losses};
}

}  // namespace detail

// One optimizer step over a batch of graphs. Losses are averaged over the
// batch; gradients are clipped to cfg.train.clip_norm before the AdamW update.
inline StepLosses train_step(const std::vector<const MolecularGraph*>& batch, ParamStore& params,
                             AdamW& optimizer, const Config& cfg, double lr, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    params.zero_grads();

    Tensor total;
    StepLosses mean;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto [loss, losses] = detail::graph_loss(*batch[b], cfg, params, rng, true);
        if (!std::isfinite(losses.total()))
            throw std::runtime_error("train_step: non-finite loss (seed " +
                                     std::to_string(cfg.train.seed) + ", graph " + std::to_string(b) + ")");
        mean.loss_type += losses.loss_type;
        mean.loss_cfm += losses.loss_cfm;
        total = total.defined() ? add(total, loss) : loss;
    }
    const float inv = 1.0f / static_cast<float>(batch.size());
    Tensor objective = scale(total, inv);
    backward(objective);
    clip_global_norm(params, cfg.train.clip_norm);
    optimizer.step(lr);

    mean.loss_type /= static_cast<double>(batch.size());
    mean.loss_cfm /= static_cast<double>(batch.size());
    return mean;
}

// Mean total loss over a validation set with a pinned rng stream, so repeated
// calls with the same parameters return the same value.
inline double validate(const std::vector<const MolecularGraph*>& val_graphs, ParamStore& params,
                       const Config& cfg, std::uint64_t val_seed) {
    if (val_graphs.empty()) throw std::invalid_argument("validate: empty validation set");
    NoGradGuard no_grad;
    Rng rng(val_seed);
    double total = 0.0;
    for (const MolecularGraph* g : val_graphs) {
        auto [loss, losses] = detail::graph_loss(*g, cfg, params, rng, false);
        total += losses.total();
    }
    return total / static_cast<double>(val_graphs.size());
}

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    double best_val_loss = 0.0;
    int best_epoch = -1;
};

// Full training run over an ingested dataset. Writes a CSV log
// (epoch,loss_type,loss_cfm,loss_total,val_loss,lr) and keeps the checkpoint
// with the lowest validation loss at <out_dir>/checkpoint.neat.
inline TrainResult train(const chem::Dataset& data, const Config& cfg, const std::string& out_dir,
                         std::ostream* progress = nullptr) {
    if (data.graphs.empty()) throw std::runtime_error("train: empty dataset");
    std::filesystem::create_directories(out_dir);

    Rng root(cfg.train.seed);
    Rng init_rng = root.fork(0x1217);
    ParamStore params = init_params(cfg.model, init_rng);
    AdamW optimizer(params, cfg.train);
    Rng train_rng = root.fork(0x7261);
    const std::uint64_t val_seed = mix64(cfg.train.seed ^ 0x76616c69ULL);

    // Deterministic train/val split; val_fraction = 0 validates on train.
    // Both sets keep ascending dataset order so validation is reproducible
    // from the checkpoint alone.
    std::vector<int> order(data.graphs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng split_rng = root.fork(0x73706c69);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(split_rng.uniform_int(static_cast<int>(i)))]);
    const int val_count = static_cast<int>(std::floor(cfg.train.val_fraction * static_cast<double>(order.size())));
    std::vector<int> val_idx(order.begin(), order.begin() + val_count);
    std::vector<int> train_idx(order.begin() + val_count, order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::vector<const MolecularGraph*> train_graphs, val_graphs;
    for (int i : train_idx) train_graphs.push_back(&data.graphs[static_cast<std::size_t>(i)]);
    for (int i : val_idx) val_graphs.push_back(&data.graphs[static_cast<std::size_t>(i)]);
    if (val_graphs.empty()) val_graphs = train_graphs;
    if (train_graphs.empty()) throw std::runtime_error("train: no training graphs after split");

    TrainResult result;
    result.checkpoint_path = (std::filesystem::path(out_dir) / "checkpoint.neat").string();
    result.log_path = (std::filesystem::path(out_dir) / "train_log.csv").string();
    std::ofstream log(result.log_path);
    if (!log) throw std::runtime_error("train: cannot open log file " + result.log_path);
    log << "epoch,loss_type,loss_cfm,loss_total,val_loss,lr\n";
    log.precision(10);

    double best_val = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg.train);

        std::vector<int> idx(train_graphs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(train_rng.uniform_int(static_cast<int>(i)))]);

        StepLosses epoch_mean;
        int steps = 0;
        for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.train.batch_size)) {
            std::vector<const MolecularGraph*> batch;
            for (std::size_t i = start; i < std::min(idx.size(), start + static_cast<std::size_t>(cfg.train.batch_size)); ++i)
                batch.push_back(train_graphs[static_cast<std::size_t>(idx[i])]);
            StepLosses losses = train_step(batch, params, optimizer, cfg, lr, train_rng);
            epoch_mean.loss_type += losses.loss_type;
            epoch_mean.loss_cfm += losses.loss_cfm;
            ++steps;
        }
        epoch_mean.loss_type /= steps;
        epoch_mean.loss_cfm /= steps;

        const double val_loss = validate(val_graphs, params, cfg, val_seed);
        log << epoch << "," << epoch_mean.loss_type << "," << epoch_mean.loss_cfm << ","
            << epoch_mean.total() << "," << val_loss << "," << lr << "\n";

        if (val_loss < best_val) {
            best_val = val_loss;
            result.best_epoch = epoch;
            ckpt::save_model(result.checkpoint_path, params.map(), cfg, epoch, val_loss,
                             data.type_marginal, data.max_atoms);
        }
        if (progress != nullptr && (epoch % 50 == 0 || epoch == cfg.train.epochs - 1))
            *progress << "epoch " << epoch << " loss " << epoch_mean.total() << " val " << val_loss
                      << " lr " << lr << "\n";
    }
    result.best_val_loss = best_val;
    return result;
}

}  // namespace neat

#endif  // NEAT_TRAINER_HPP
