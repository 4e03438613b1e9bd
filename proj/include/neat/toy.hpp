// toy.hpp
// Procedural generator of small, chemically sane 3D molecules: random trees of
// heavy atoms with idealized tetrahedral geometry, hydrogens filled to full
// valence, and a self-consistency check against the bond lookup pipeline.
#ifndef NEAT_TOY_HPP
#define NEAT_TOY_HPP

#include "neat/chem.hpp"

namespace neat {

struct ToySpec {
    int max_heavy_atoms = 6;
    std::vector<std::string> elements = {"C", "N", "O"};  // heavy elements only
    int count = 20;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_heavy_atoms < 1) throw std::invalid_argument("ToySpec: max_heavy_atoms must be >= 1");
        if (count < 0) throw std::invalid_argument("ToySpec: count must be >= 0");
        if (elements.empty()) throw std::invalid_argument("ToySpec: elements must be nonempty");
    }
};

struct ToyMolecule {
    std::vector<std::string> symbols;
    MolecularGraph graph;  // zero-centered, bonds all single, eccentricities cached
};

namespace toy_detail {

constexpr double kTetrahedralCos = -1.0 / 3.0;

inline void orthonormal_basis(const Vec3& d, Vec3& e1, Vec3& e2) {
    Vec3 ref = std::fabs(d[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    // e1 = normalize(ref - (ref.d) d)
    Vec3 proj = dot(ref, d) * d;
    e1 = ref - proj;
    double n = norm(e1);
    e1 = (1.0 / n) * e1;
    e2 = {d[1] * e1[2] - d[2] * e1[1], d[2] * e1[0] - d[0] * e1[2], d[0] * e1[1] - d[1] * e1[0]};
}

// Tetrahedral directions for an atom given the unit direction to its parent;
// phi0 sets the torsion.
inline std::vector<Vec3> child_slots(const Vec3& to_parent, double phi0) {
    Vec3 d = (-1.0) * to_parent;  // axis pointing away from the parent
    Vec3 e1, e2;
    orthonormal_basis(d, e1, e2);
    const double c = kTetrahedralCos;          // cos(109.47 deg) vs the parent direction
    const double s = std::sqrt(1.0 - c * c);
    std::vector<Vec3> dirs;
    for (int i = 0; i < 3; ++i) {
        double phi = phi0 + 2.0 * M_PI * i / 3.0;
        Vec3 v = (c * to_parent) + (s * std::cos(phi) * e1) + (s * std::sin(phi) * e2);
        dirs.push_back((1.0 / norm(v)) * v);
    }
    return dirs;
}

inline std::vector<Vec3> root_slots() {
    const double inv = 1.0 / std::sqrt(3.0);
    return {Vec3{inv, inv, inv}, Vec3{inv, -inv, -inv}, Vec3{-inv, inv, -inv}, Vec3{-inv, -inv, inv}};
}

struct Attempt {
    std::vector<std::string> symbols;
    std::vector<Vec3> positions;
    std::vector<std::pair<int, int>> edges;
};

inline Attempt build_attempt(const ToySpec& spec, const chem::BondTable& table,
                             const chem::ValenceRules& rules, Rng& rng) {
    Attempt mol;
    const int n_heavy = 1 + rng.uniform_int(spec.max_heavy_atoms);

    auto bond_length = [&table](const std::string& a, const std::string& b) {
        auto ref = table.reference_length(a, b, 1);
        if (!ref) throw std::invalid_argument("toy corpus: no single-bond length for " + a + "-" + b);
        return *ref;
    };

    std::vector<std::vector<Vec3>> free_slots;  // unit directions still open per atom
    auto add_atom = [&](const std::string& symbol, const Vec3& pos, std::vector<Vec3> slots) {
        mol.symbols.push_back(symbol);
        mol.positions.push_back(pos);
        free_slots.push_back(std::move(slots));
        return static_cast<int>(mol.symbols.size()) - 1;
    };

    auto element_slots = [&rules](const std::string& symbol) {
        auto valence = rules.allowed(symbol);
        if (!valence) throw std::invalid_argument("toy corpus: element " + symbol + " has no valence rule");
        return *valence;
    };

    // Root heavy atom with its full tetrahedral slot set.
    {
        const std::string& sym = spec.elements[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(spec.elements.size())))];
        auto slots = root_slots();
        slots.resize(static_cast<std::size_t>(std::min(4, element_slots(sym))));
        add_atom(sym, {0.0, 0.0, 0.0}, std::move(slots));
    }

    // Attach remaining heavy atoms to random open slots.
    for (int k = 1; k < n_heavy; ++k) {
        std::vector<int> open;
        for (std::size_t i = 0; i < free_slots.size(); ++i)
            if (!free_slots[i].empty()) open.push_back(static_cast<int>(i));
        if (open.empty()) break;
        const int parent = open[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(open.size())))];
        const int slot = rng.uniform_int(static_cast<int>(free_slots[static_cast<std::size_t>(parent)].size()));
        const Vec3 dir = free_slots[static_cast<std::size_t>(parent)][static_cast<std::size_t>(slot)];
        free_slots[static_cast<std::size_t>(parent)].erase(
            free_slots[static_cast<std::size_t>(parent)].begin() + slot);

        const std::string& sym = spec.elements[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(spec.elements.size())))];
        const double length = bond_length(mol.symbols[static_cast<std::size_t>(parent)], sym);
        const Vec3 pos = mol.positions[static_cast<std::size_t>(parent)] + (length * dir);

        auto slots = child_slots(dir, 2.0 * M_PI * rng.uniform());
        slots.resize(static_cast<std::size_t>(std::max(0, element_slots(sym) - 1)));
        const int child = add_atom(sym, pos, std::move(slots));
        mol.edges.emplace_back(parent, child);
    }

    // Hydrogens on every remaining open slot.
    const int heavy_count = static_cast<int>(mol.symbols.size());
    for (int i = 0; i < heavy_count; ++i) {
        for (const Vec3& dir : free_slots[static_cast<std::size_t>(i)]) {
            const double length = bond_length(mol.symbols[static_cast<std::size_t>(i)], "H");
            const int h = add_atom("H", mol.positions[static_cast<std::size_t>(i)] + (length * dir), {});
            mol.edges.emplace_back(i, h);
        }
        free_slots[static_cast<std::size_t>(i)].clear();
    }

    // Small Gaussian jitter on every coordinate.
    for (Vec3& p : mol.positions)
        for (double& c : p) c += 0.02 * rng.normal();
    return mol;
}

// Perceived graph must reproduce the built tree exactly and every atom must be
// stable; this ties the generator to the evaluation pipeline.
inline bool self_consistent(const Attempt& mol, const chem::BondTable& table,
                            const chem::ValenceRules& rules) {
    chem::BondPerception perceived = chem::infer_bonds(mol.symbols, mol.positions, table);
    if (perceived.graph.num_bonds() != static_cast<int>(mol.edges.size())) return false;
    for (auto [i, j] : mol.edges)
        if (perceived.graph.bond_order(i, j) != 1) return false;
    if (!is_connected(perceived.graph)) return false;
    auto stable = chem::atom_stability(perceived.graph, mol.symbols, rules);
    return std::all_of(stable.begin(), stable.end(), [](bool s) { return s; });
}

}  // namespace toy_detail

inline std::vector<ToyMolecule> generate_toy_corpus(const ToySpec& spec, const chem::BondTable& table,
                                                    const AtomVocabulary& vocab) {
    spec.validate();
    const chem::ValenceRules rules = chem::ValenceRules::standard();
    if (vocab.index_of("H") < 0)
        throw std::invalid_argument("generate_toy_corpus: vocabulary must contain H");
    for (const std::string& e : spec.elements) {
        if (e == "H") throw std::invalid_argument("ToySpec: hydrogens are filled automatically");
        if (vocab.index_of(e) < 0) throw std::invalid_argument("ToySpec: element " + e + " not in vocabulary");
    }

    Rng master(spec.seed);
    std::vector<ToyMolecule> corpus;
    corpus.reserve(static_cast<std::size_t>(spec.count));
    for (int m = 0; m < spec.count; ++m) {
        Rng rng = master.fork(static_cast<std::uint64_t>(m));
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 200)
                throw std::runtime_error("generate_toy_corpus: no self-consistent geometry found");
            toy_detail::Attempt built = toy_detail::build_attempt(spec, table, rules, rng);
            if (!toy_detail::self_consistent(built, table, rules)) continue;

            std::vector<int> types;
            types.reserve(built.symbols.size());
            for (const std::string& s : built.symbols) types.push_back(vocab.index_of(s));
            MolecularGraph g(std::move(types), zero_center(built.positions), built.edges);
            g.set_eccentricities(all_eccentricities(g));
            corpus.push_back(ToyMolecule{std::move(built.symbols), std::move(g)});
            break;
        }
    }
    return corpus;
}

// Writes mol_XXXX.xyz plus .bonds sidecars consumable by ingest_dataset.
inline void write_toy_corpus(const std::vector<ToyMolecule>& corpus, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    char name[32];
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        std::snprintf(name, sizeof(name), "mol_%04zu", i);
        const ToyMolecule& mol = corpus[i];
        {
            std::ofstream out(fs::path(directory) / (std::string(name) + ".xyz"));
            out << chem::write_xyz(mol.symbols, mol.graph.positions(), name);
        }
        {
            std::ofstream out(fs::path(directory) / (std::string(name) + ".bonds"));
            for (const Bond& b : mol.graph.bonds()) out << b.a << " " << b.b << " " << b.order << "\n";
        }
    }
}

}  // namespace neat

#endif  // NEAT_TOY_HPP
