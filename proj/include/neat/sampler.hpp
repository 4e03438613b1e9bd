// sampler.hpp
// Source/target split augmentation: grows a connected source set from a random
// seed node by stochastic 1-hop rounds, then takes the full boundary as target.
#ifndef NEAT_SAMPLER_HPP
#define NEAT_SAMPLER_HPP

#include <cmath>
#include <vector>

#include "neat/graph.hpp"

namespace neat {

struct SamplerConfig {
    double beta = 1.5;    // scales the number of growth rounds
    double gamma = 0.45;  // per-node boundary dropout probability

    void validate() const {
        if (beta < 0.0) throw std::invalid_argument("SamplerConfig: beta must be >= 0");
        if (gamma < 0.0 || gamma >= 1.0)
            throw std::invalid_argument("SamplerConfig: gamma must be in [0, 1)");
    }
};

struct SubgraphSplit {
    NodeSet source;  // connected, contains seed_node
    NodeSet target;  // full boundary of source; may be empty
    int seed_node = 0;
    std::vector<int> source_types;
    std::vector<Vec3> source_positions;
    std::vector<int> target_types;
    std::vector<Vec3> target_positions;
};

namespace detail {
inline void fill_slices(const MolecularGraph& g, const NodeSet& v, std::vector<int>& types,
                        std::vector<Vec3>& positions) {
    types.clear();
    positions.clear();
    types.reserve(static_cast<std::size_t>(v.size()));
    positions.reserve(static_cast<std::size_t>(v.size()));
    for (int i : v.indices()) {
        types.push_back(g.types()[static_cast<std::size_t>(i)]);
        positions.push_back(g.positions()[static_cast<std::size_t>(i)]);
    }
}
}  // namespace detail

// One draw of the source/target split on a connected graph.
//
// Seed node uniform over V; round count m = floor(beta * ecc(seed) * u) + 1;
// each round keeps every current boundary node independently with probability
// 1 - gamma; the target is the undropped boundary of the final source set.
inline SubgraphSplit sample_split(const MolecularGraph& g, const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    const int n = g.num_atoms();
    if (n < 1) throw std::invalid_argument("sample_split: graph must have at least one atom");

    const int v0 = rng.uniform_int(n);
    const int ecc = g.eccentricities().empty() ? eccentricity(g, v0)
                                               : g.eccentricities()[static_cast<std::size_t>(v0)];
    const int rounds = static_cast<int>(std::floor(cfg.beta * ecc * rng.uniform())) + 1;

    std::vector<char> in_source(static_cast<std::size_t>(n), 0);
    in_source[static_cast<std::size_t>(v0)] = 1;
    std::vector<int> source = {v0};

    for (int round = 0; round < rounds; ++round) {
        // Boundary in ascending node order so the rng call sequence is stable.
        std::vector<int> boundary;
        std::vector<char> in_boundary(static_cast<std::size_t>(n), 0);
        for (int i : source) {
            for (int w : g.adjacency()[static_cast<std::size_t>(i)]) {
                if (!in_source[static_cast<std::size_t>(w)] && !in_boundary[static_cast<std::size_t>(w)]) {
                    in_boundary[static_cast<std::size_t>(w)] = 1;
                    boundary.push_back(w);
                }
            }
        }
        std::sort(boundary.begin(), boundary.end());
        for (int w : boundary) {
            if (rng.uniform() > cfg.gamma) {
                in_source[static_cast<std::size_t>(w)] = 1;
                source.push_back(w);
            }
        }
    }

    SubgraphSplit split;
    split.seed_node = v0;
    split.source = NodeSet(std::move(source));
    split.target = boundary_nodes(g, split.source);
    detail::fill_slices(g, split.source, split.source_types, split.source_positions);
    detail::fill_slices(g, split.target, split.target_types, split.target_positions);
    return split;
}

struct SplitStatistics {
    std::vector<double> rel_source;  // |V_S| / N per draw
    std::vector<double> rel_target;  // |V_T| / N per draw

    double mean_rel_source() const {
        double s = 0.0;
        for (double x : rel_source) s += x;
        return rel_source.empty() ? 0.0 : s / static_cast<double>(rel_source.size());
    }
    double mean_rel_target() const {
        double s = 0.0;
        for (double x : rel_target) s += x;
        return rel_target.empty() ? 0.0 : s / static_cast<double>(rel_target.size());
    }
};

// Empirical relative source/target sizes over n_samples draws, cycling through
// the corpus. An empty corpus yields an empty histogram.
inline SplitStatistics split_statistics(const std::vector<MolecularGraph>& graphs,
                                        const SamplerConfig& cfg, int n_samples, Rng& rng) {
    cfg.validate();
    if (n_samples < 1) throw std::invalid_argument("split_statistics: n_samples must be >= 1");
    SplitStatistics stats;
    if (graphs.empty()) return stats;
    stats.rel_source.reserve(static_cast<std::size_t>(n_samples));
    stats.rel_target.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        const MolecularGraph& g = graphs[static_cast<std::size_t>(s) % graphs.size()];
        SubgraphSplit split = sample_split(g, cfg, rng);
        const double n = static_cast<double>(g.num_atoms());
        stats.rel_source.push_back(split.source.size() / n);
        stats.rel_target.push_back(split.target.size() / n);
    }
    return stats;
}

}  // namespace neat

#endif  // NEAT_SAMPLER_HPP
