// graph.hpp
// Molecular graphs, node-set queries (induced subgraphs, boundaries,
// eccentricities) and rigid-motion utilities.
#ifndef NEAT_GRAPH_HPP
#define NEAT_GRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "neat/common.hpp"

namespace neat {

// Element vocabulary plus a trailing stop token.
class AtomVocabulary {
public:
    explicit AtomVocabulary(std::vector<std::string> elements)
        : elements_(std::move(elements)) {
        if (elements_.empty())
            throw std::invalid_argument("AtomVocabulary: element list must be nonempty");
        for (int i = 0; i < static_cast<int>(elements_.size()); ++i) {
            if (!lookup_.emplace(elements_[i], i).second)
                throw std::invalid_argument("AtomVocabulary: duplicate element symbol " + elements_[i]);
        }
    }

    int stop_index() const { return static_cast<int>(elements_.size()); }
    int size() const { return static_cast<int>(elements_.size()) + 1; }
    const std::vector<std::string>& elements() const { return elements_; }

    bool is_stop(int index) const { return index == stop_index(); }

    // -1 when the symbol is not in the vocabulary.
    int index_of(const std::string& symbol) const {
        auto it = lookup_.find(symbol);
        return it == lookup_.end() ? -1 : it->second;
    }

    const std::string& symbol(int index) const {
        if (index < 0 || index >= stop_index())
            throw std::invalid_argument("AtomVocabulary::symbol: index " + std::to_string(index) +
                                        " is not an element index");
        return elements_[index];
    }

private:
    std::vector<std::string> elements_;
    std::map<std::string, int> lookup_;
};

// Sorted, duplicate-free list of node indices of some host graph.
class NodeSet {
public:
    NodeSet() = default;
    explicit NodeSet(std::vector<int> indices) : idx_(std::move(indices)) {
        std::sort(idx_.begin(), idx_.end());
        if (std::adjacent_find(idx_.begin(), idx_.end()) != idx_.end())
            throw std::invalid_argument("NodeSet: duplicate node index");
    }

    static NodeSet all(int n) {
        std::vector<int> v(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
        return NodeSet(std::move(v));
    }

    const std::vector<int>& indices() const { return idx_; }
    int size() const { return static_cast<int>(idx_.size()); }
    bool empty() const { return idx_.empty(); }

    bool contains(int v) const {
        return std::binary_search(idx_.begin(), idx_.end(), v);
    }

    bool operator==(const NodeSet& other) const { return idx_ == other.idx_; }

private:
    std::vector<int> idx_;
};

struct Bond {
    int a = 0, b = 0;  // a < b
    int order = 1;     // 1..3
};

// Undirected molecular graph: vocabulary type indices, 3D positions (ångström)
// and undirected bonds. Immutable after construction.
class MolecularGraph {
public:
    MolecularGraph() = default;

    MolecularGraph(std::vector<int> types, std::vector<Vec3> positions,
                   const std::vector<std::pair<int, int>>& edges,
                   const std::vector<int>& orders = {})
        : types_(std::move(types)), positions_(std::move(positions)) {
        const int n = static_cast<int>(types_.size());
        if (positions_.size() != types_.size())
            throw std::invalid_argument("MolecularGraph: types/positions size mismatch");
        if (!orders.empty() && orders.size() != edges.size())
            throw std::invalid_argument("MolecularGraph: orders/edges size mismatch");
        adj_.assign(static_cast<std::size_t>(n), {});
        bonds_.reserve(edges.size());
        for (std::size_t e = 0; e < edges.size(); ++e) {
            int i = edges[e].first, j = edges[e].second;
            if (i == j) throw std::invalid_argument("MolecularGraph: self-loop at node " + std::to_string(i));
            if (i < 0 || j < 0 || i >= n || j >= n)
                throw std::invalid_argument("MolecularGraph: edge endpoint out of range");
            if (i > j) std::swap(i, j);
            if (!edge_keys_.insert(edge_key(i, j)).second)
                throw std::invalid_argument("MolecularGraph: duplicate edge " + std::to_string(i) + "-" +
                                            std::to_string(j));
            int order = orders.empty() ? 1 : orders[e];
            if (order < 1 || order > 3)
                throw std::invalid_argument("MolecularGraph: bond order must be in {1,2,3}");
            bonds_.push_back({i, j, order});
            adj_[static_cast<std::size_t>(i)].push_back(j);
            adj_[static_cast<std::size_t>(j)].push_back(i);
        }
        std::sort(bonds_.begin(), bonds_.end(), [](const Bond& x, const Bond& y) {
            return std::tie(x.a, x.b) < std::tie(y.a, y.b);
        });
        for (auto& nbrs : adj_) std::sort(nbrs.begin(), nbrs.end());
    }

    int num_atoms() const { return static_cast<int>(types_.size()); }
    int num_bonds() const { return static_cast<int>(bonds_.size()); }
    const std::vector<int>& types() const { return types_; }
    const std::vector<Vec3>& positions() const { return positions_; }
    const std::vector<std::vector<int>>& adjacency() const { return adj_; }
    const std::vector<Bond>& bonds() const { return bonds_; }

    bool has_edge(int i, int j) const {
        if (i > j) std::swap(i, j);
        return edge_keys_.count(edge_key(i, j)) > 0;
    }

    // 0 when the pair is not bonded.
    int bond_order(int i, int j) const {
        if (i > j) std::swap(i, j);
        auto it = std::lower_bound(bonds_.begin(), bonds_.end(), std::make_pair(i, j),
                                   [](const Bond& b, const std::pair<int, int>& k) {
                                       return std::tie(b.a, b.b) < std::tie(k.first, k.second);
                                   });
        if (it != bonds_.end() && it->a == i && it->b == j) return it->order;
        return 0;
    }

    // Per-node eccentricities, cached by ingestion; empty until computed.
    const std::vector<int>& eccentricities() const { return ecc_; }
    void set_eccentricities(std::vector<int> ecc) {
        if (ecc.size() != types_.size())
            throw std::invalid_argument("set_eccentricities: size mismatch");
        ecc_ = std::move(ecc);
    }

private:
    static std::uint64_t edge_key(int i, int j) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
               static_cast<std::uint32_t>(j);
    }

    std::vector<int> types_;
    std::vector<Vec3> positions_;
    std::vector<Bond> bonds_;
    std::vector<std::vector<int>> adj_;
    std::unordered_set<std::uint64_t> edge_keys_;
    std::vector<int> ecc_;
};

inline void check_node_set(const MolecularGraph& g, const NodeSet& v) {
    for (int i : v.indices())
        if (i < 0 || i >= g.num_atoms())
            throw std::invalid_argument("node index " + std::to_string(i) + " out of range for graph of " +
                                        std::to_string(g.num_atoms()) + " atoms");
}

// BFS distances from src; -1 for unreachable nodes.
inline std::vector<int> bfs_distances(const MolecularGraph& g, int src) {
    if (src < 0 || src >= g.num_atoms())
        throw std::invalid_argument("bfs_distances: source out of range");
    std::vector<int> dist(static_cast<std::size_t>(g.num_atoms()), -1);
    std::queue<int> q;
    dist[static_cast<std::size_t>(src)] = 0;
    q.push(src);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int w : g.adjacency()[static_cast<std::size_t>(u)]) {
            if (dist[static_cast<std::size_t>(w)] < 0) {
                dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
                q.push(w);
            }
        }
    }
    return dist;
}

inline bool is_connected(const MolecularGraph& g) {
    if (g.num_atoms() == 0) return true;
    auto dist = bfs_distances(g, 0);
    return std::find(dist.begin(), dist.end(), -1) == dist.end();
}

// Connected components as sorted node lists, ordered by lowest member index.
inline std::vector<std::vector<int>> connected_components(const MolecularGraph& g) {
    std::vector<std::vector<int>> components;
    std::vector<char> seen(static_cast<std::size_t>(g.num_atoms()), 0);
    for (int s = 0; s < g.num_atoms(); ++s) {
        if (seen[static_cast<std::size_t>(s)]) continue;
        std::vector<int> comp;
        std::queue<int> q;
        q.push(s);
        seen[static_cast<std::size_t>(s)] = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            comp.push_back(u);
            for (int w : g.adjacency()[static_cast<std::size_t>(u)]) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    q.push(w);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
    }
    return components;
}

// Node-induced subgraph; indices remapped to 0..|v| by sorted order.
// Positions are copied as-is (no re-centering).
inline MolecularGraph induced_subgraph(const MolecularGraph& g, const NodeSet& v) {
    if (v.empty()) throw std::invalid_argument("induced_subgraph: empty node set");
    check_node_set(g, v);
    const auto& idx = v.indices();
    std::vector<int> remap(static_cast<std::size_t>(g.num_atoms()), -1);
    for (int k = 0; k < v.size(); ++k) remap[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = k;

    std::vector<int> types;
    std::vector<Vec3> positions;
    types.reserve(idx.size());
    positions.reserve(idx.size());
    for (int i : idx) {
        types.push_back(g.types()[static_cast<std::size_t>(i)]);
        positions.push_back(g.positions()[static_cast<std::size_t>(i)]);
    }
    std::vector<std::pair<int, int>> edges;
    std::vector<int> orders;
    for (const Bond& b : g.bonds()) {
        int ra = remap[static_cast<std::size_t>(b.a)], rb = remap[static_cast<std::size_t>(b.b)];
        if (ra >= 0 && rb >= 0) {
            edges.emplace_back(ra, rb);
            orders.push_back(b.order);
        }
    }
    return MolecularGraph(std::move(types), std::move(positions), edges, orders);
}

// All nodes adjacent to v but not in v.
inline NodeSet boundary_nodes(const MolecularGraph& g, const NodeSet& v) {
    check_node_set(g, v);
    std::vector<char> in_v(static_cast<std::size_t>(g.num_atoms()), 0);
    for (int i : v.indices()) in_v[static_cast<std::size_t>(i)] = 1;
    std::vector<char> in_b(static_cast<std::size_t>(g.num_atoms()), 0);
    std::vector<int> result;
    for (int i : v.indices()) {
        for (int w : g.adjacency()[static_cast<std::size_t>(i)]) {
            if (!in_v[static_cast<std::size_t>(w)] && !in_b[static_cast<std::size_t>(w)]) {
                in_b[static_cast<std::size_t>(w)] = 1;
                result.push_back(w);
            }
        }
    }
    return NodeSet(std::move(result));
}

// Maximum shortest-path distance from node; requires a connected graph.
inline int eccentricity(const MolecularGraph& g, int node) {
    auto dist = bfs_distances(g, node);
    int e = 0;
    for (int d : dist) {
        if (d < 0) throw std::domain_error("eccentricity: graph is disconnected");
        e = std::max(e, d);
    }
    return e;
}

inline std::vector<int> all_eccentricities(const MolecularGraph& g) {
    std::vector<int> ecc(static_cast<std::size_t>(g.num_atoms()));
    for (int i = 0; i < g.num_atoms(); ++i) ecc[static_cast<std::size_t>(i)] = eccentricity(g, i);
    return ecc;
}

// Subtract the column mean; pairwise distances are preserved exactly.
inline std::vector<Vec3> zero_center(std::vector<Vec3> positions) {
    if (positions.empty()) return positions;
    Vec3 mean = {0.0, 0.0, 0.0};
    for (const Vec3& p : positions) mean = mean + p;
    mean = (1.0 / static_cast<double>(positions.size())) * mean;
    for (Vec3& p : positions) p = p - mean;
    return positions;
}

using Mat3 = std::array<Vec3, 3>;  // row-major rotation matrix

inline Vec3 rotate(const Mat3& m, const Vec3& x) {
    return {dot(m[0], x), dot(m[1], x), dot(m[2], x)};
}

inline double det(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// Uniform rotation over SO(3) via a uniform unit quaternion; det is always +1.
inline Mat3 random_rotation(Rng& rng) {
    double q[4];
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& qi : q) {
            qi = rng.normal();
            n2 += qi * qi;
        }
    } while (n2 < 1e-12);
    double inv = 1.0 / std::sqrt(n2);
    double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    return Mat3{Vec3{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                Vec3{2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                Vec3{2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

// Random rotation plus optional i.i.d. normal translation of the whole set.
inline std::vector<Vec3> random_rigid_motion(const std::vector<Vec3>& positions, Rng& rng,
                                             bool translate, double translation_scale = 0.5) {
    Mat3 rot = random_rotation(rng);
    Vec3 shift = {0.0, 0.0, 0.0};
    if (translate) shift = translation_scale * rng.normal3();
    std::vector<Vec3> out;
    out.reserve(positions.size());
    for (const Vec3& p : positions) out.push_back(rotate(rot, p) + shift);
    return out;
}

}  // namespace neat

#endif  // NEAT_GRAPH_HPP
