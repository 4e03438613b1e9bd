// chem.hpp
// Bond perception from coordinates via a distance lookup table, valence-based
// stability metrics, Weisfeiler-Lehman canonical graph hashing, XYZ file
// parsing/writing, and dataset ingestion.
#ifndef NEAT_CHEM_HPP
#define NEAT_CHEM_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "neat/graph.hpp"

namespace neat {
namespace chem {

// Symbols accepted by the XYZ parser.
inline const std::set<std::string>& periodic_symbols() {
    static const std::set<std::string> symbols = {
        "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si",
        "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni",
        "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo",
        "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba",
        "La", "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi"};
    return symbols;
}

// -- bond lookup table ------------------------------------------------------------

// Reference bond lengths per (element pair, order) with a shared tolerance
// margin. Orders are probed shortest first (triple, double, single); a pair
// bonds at the first order whose band [ref - margin, ref + margin] contains
// the distance.
class BondTable {
public:
    explicit BondTable(double margin = 0.10) : margin_(margin) {
        if (margin < 0.0) throw std::invalid_argument("BondTable: margin must be >= 0");
    }

    double margin() const { return margin_; }
    void set_margin(double m) {
        if (m < 0.0) throw std::invalid_argument("BondTable: margin must be >= 0");
        margin_ = m;
    }

    void add(const std::string& a, const std::string& b, int order, double length) {
        if (order < 1 || order > 3) throw std::invalid_argument("BondTable: order must be in {1,2,3}");
        if (length <= 0.0) throw std::invalid_argument("BondTable: length must be positive");
        entries_[key(a, b, order)] = length;
        known_pairs_.insert(key(a, b, 0));
    }

    std::optional<double> reference_length(const std::string& a, const std::string& b,
                                           int order) const {
        auto it = entries_.find(key(a, b, order));
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    bool known_pair(const std::string& a, const std::string& b) const {
        return known_pairs_.count(key(a, b, 0)) > 0;
    }

    // 0 when no order matches.
    int assign_order(const std::string& a, const std::string& b, double dist) const {
        for (int order = 3; order >= 1; --order) {
            auto ref = reference_length(a, b, order);
            if (!ref) continue;
            if (dist > *ref - margin_ && dist < *ref + margin_) return order;
        }
        return 0;
    }

    // Lines: elemA <tab> elemB <tab> order <tab> length_angstrom.
    static BondTable load_tsv(const std::string& path, double margin = 0.10) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("BondTable: cannot open " + path);
        BondTable table(margin);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream is(line);
            std::string a, b;
            int order = 0;
            double length = 0.0;
            if (!(is >> a >> b >> order >> length))
                throw std::runtime_error("BondTable: malformed line " + std::to_string(lineno) +
                                         " in " + path);
            table.add(a, b, order, length);
        }
        return table;
    }

private:
    static std::string key(std::string a, std::string b, int order) {
        if (b < a) std::swap(a, b);
        return a + "|" + b + "|" + std::to_string(order);
    }

    double margin_;
    std::unordered_map<std::string, double> entries_;
    std::unordered_set<std::string> known_pairs_;
};

// Octet/duet valences per element.
class ValenceRules {
public:
    static ValenceRules standard() {
        ValenceRules r;
        r.valence_ = {{"H", 1}, {"C", 4}, {"N", 3}, {"O", 2}, {"F", 1},
                      {"P", 3}, {"S", 2}, {"Cl", 1}, {"Br", 1}, {"I", 1}};
        return r;
    }

    std::optional<int> allowed(const std::string& element) const {
        auto it = valence_.find(element);
        if (it == valence_.end()) return std::nullopt;
        return it->second;
    }

    void set(const std::string& element, int valence) {
        if (valence <= 0) throw std::invalid_argument("ValenceRules: valence must be positive");
        valence_[element] = valence;
    }

private:
    std::unordered_map<std::string, int> valence_;
};

// -- bond perception ---------------------------------------------------------------

struct BondPerception {
    MolecularGraph graph;
    int unknown_pair_warnings = 0;
};

// Assigns bond orders pairwise from interatomic distances, probing triple,
// then double, then single. Pairs of elements absent from the table stay
// unbonded and are counted as warnings.
inline BondPerception infer_bonds(const std::vector<std::string>& symbols,
                                  const std::vector<Vec3>& positions, const BondTable& table,
                                  const std::vector<int>* vocab_types = nullptr) {
    if (symbols.size() != positions.size())
        throw std::invalid_argument("infer_bonds: symbols/positions size mismatch");
    for (const Vec3& p : positions)
        for (double c : p)
            if (!std::isfinite(c)) throw std::invalid_argument("infer_bonds: non-finite position");

    const int n = static_cast<int>(symbols.size());
    std::vector<std::pair<int, int>> edges;
    std::vector<int> orders;
    int warnings = 0;
    std::set<std::pair<std::string, std::string>> warned;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const std::string& a = symbols[static_cast<std::size_t>(i)];
            const std::string& b = symbols[static_cast<std::size_t>(j)];
            if (!table.known_pair(a, b)) {
                if (warned.insert(std::minmax(a, b)).second) ++warnings;
                continue;
            }
            int order = table.assign_order(a, b, distance(positions[static_cast<std::size_t>(i)],
                                                          positions[static_cast<std::size_t>(j)]));
            if (order > 0) {
                edges.emplace_back(i, j);
                orders.push_back(order);
            }
        }
    }
    std::vector<int> types;
    if (vocab_types != nullptr) {
        types = *vocab_types;
    } else {
        types.assign(static_cast<std::size_t>(n), 0);
    }
    BondPerception out{MolecularGraph(std::move(types), positions, edges, orders), warnings};
    return out;
}

// -- stability -----------------------------------------------------------------------

// Atom i is stable iff the sum of its incident bond orders equals the allowed
// valence of its element. Unknown elements are unstable.
inline std::vector<bool> atom_stability(const MolecularGraph& g,
                                        const std::vector<std::string>& symbols,
                                        const ValenceRules& rules, int* unknown_warnings = nullptr) {
    if (static_cast<int>(symbols.size()) != g.num_atoms())
        throw std::invalid_argument("atom_stability: symbols size mismatch");
    std::vector<int> total(static_cast<std::size_t>(g.num_atoms()), 0);
    for (const Bond& b : g.bonds()) {
        total[static_cast<std::size_t>(b.a)] += b.order;
        total[static_cast<std::size_t>(b.b)] += b.order;
    }
    std::vector<bool> stable(static_cast<std::size_t>(g.num_atoms()), false);
    for (int i = 0; i < g.num_atoms(); ++i) {
        auto allowed = rules.allowed(symbols[static_cast<std::size_t>(i)]);
        if (!allowed) {
            if (unknown_warnings != nullptr) ++*unknown_warnings;
            continue;
        }
        stable[static_cast<std::size_t>(i)] = total[static_cast<std::size_t>(i)] == *allowed;
    }
    return stable;
}

// -- canonical hashing ------------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Order-independent 64-bit digest via Weisfeiler-Lehman refinement of node
// labels (element, total incident bond order) with the connecting bond order
// folded into each neighbor contribution.
inline std::uint64_t canonical_hash(const MolecularGraph& g,
                                    const std::vector<std::string>& symbols, int iterations = 3) {
    if (static_cast<int>(symbols.size()) != g.num_atoms())
        throw std::invalid_argument("canonical_hash: symbols size mismatch");
    const int n = g.num_atoms();
    if (n == 0) return mix64(0x9e3779b97f4a7c15ULL);

    std::vector<int> total_order(static_cast<std::size_t>(n), 0);
    for (const Bond& b : g.bonds()) {
        total_order[static_cast<std::size_t>(b.a)] += b.order;
        total_order[static_cast<std::size_t>(b.b)] += b.order;
    }
    std::vector<std::uint64_t> label(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        label[static_cast<std::size_t>(i)] =
            hash_combine(mix64(fnv1a(symbols[static_cast<std::size_t>(i)])),
                         mix64(static_cast<std::uint64_t>(total_order[static_cast<std::size_t>(i)])));

    for (int it = 0; it < iterations; ++it) {
        std::vector<std::uint64_t> next(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<std::uint64_t> neigh;
            neigh.reserve(g.adjacency()[static_cast<std::size_t>(i)].size());
            for (int w : g.adjacency()[static_cast<std::size_t>(i)])
                neigh.push_back(hash_combine(mix64(static_cast<std::uint64_t>(g.bond_order(i, w))),
                                             label[static_cast<std::size_t>(w)]));
            std::sort(neigh.begin(), neigh.end());
            std::uint64_t acc = label[static_cast<std::size_t>(i)];
            for (std::uint64_t nh : neigh) acc = hash_combine(acc, nh);
            next[static_cast<std::size_t>(i)] = acc;
        }
        label = std::move(next);
    }
    std::sort(label.begin(), label.end());
    std::uint64_t digest = mix64(static_cast<std::uint64_t>(n));
    for (std::uint64_t l : label) digest = hash_combine(digest, l);
    return digest;
}

// -- XYZ format ----------------------------------------------------------------------------

struct XyzMolecule {
    std::vector<std::string> symbols;
    std::vector<Vec3> positions;
    std::string comment;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, int line)
        : std::runtime_error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

inline XyzMolecule parse_xyz(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;

    auto next_line = [&](bool required) -> bool {
        if (!std::getline(in, line)) {
            if (required) throw ParseError("unexpected end of file", lineno + 1);
            return false;
        }
        ++lineno;
        return true;
    };

    next_line(true);
    int count = 0;
    try {
        std::size_t pos = 0;
        count = std::stoi(line, &pos);
        while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
        if (pos != line.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
        throw ParseError("malformed atom count '" + line + "'", lineno);
    }
    if (count < 0) throw ParseError("negative atom count", lineno);

    XyzMolecule mol;
    next_line(true);
    mol.comment = line;

    for (int i = 0; i < count; ++i) {
        if (!next_line(false)) throw ParseError("atom count mismatch: expected " +
                                                std::to_string(count) + " atoms", lineno + 1);
        std::istringstream is(line);
        std::string symbol, xs, ys, zs;
        if (!(is >> symbol >> xs >> ys >> zs))
            throw ParseError("malformed atom line '" + line + "'", lineno);
        if (!periodic_symbols().count(symbol))
            throw ParseError("unknown element symbol '" + symbol + "'", lineno);
        Vec3 p;
        const std::string* comps[3] = {&xs, &ys, &zs};
        for (int d = 0; d < 3; ++d) {
            try {
                std::size_t pos = 0;
                p[static_cast<std::size_t>(d)] = std::stod(*comps[d], &pos);
                if (pos != comps[d]->size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ParseError("malformed coordinate '" + *comps[d] + "'", lineno);
            }
        }
        // Extra trailing columns are ignored.
        mol.symbols.push_back(symbol);
        mol.positions.push_back(p);
    }
    return mol;
}

// Fixed-point writer: 6 decimals, single spaces. write -> parse -> write is
// byte-stable.
inline std::string write_xyz(const std::vector<std::string>& symbols,
                             const std::vector<Vec3>& positions, const std::string& comment = "") {
    if (symbols.size() != positions.size())
        throw std::invalid_argument("write_xyz: symbols/positions size mismatch");
    std::ostringstream out;
    out << symbols.size() << "\n" << comment << "\n";
    char buf[64];
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        out << symbols[i];
        for (double c : positions[i]) {
            std::snprintf(buf, sizeof(buf), " %.6f", c);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

// -- dataset ingestion ----------------------------------------------------------------------

struct Dataset {
    std::vector<MolecularGraph> graphs;
    std::vector<std::vector<std::string>> symbols;  // per graph, parallel to atoms
    std::unordered_set<std::uint64_t> reference_hashes;
    std::vector<double> type_marginal;  // over vocabulary elements (stop excluded)
    int max_atoms = 0;
    int skipped_files = 0;
    int unknown_pair_warnings = 0;
};

// Sidecar bond list: lines "i j order" with 0-based indices.
inline std::vector<std::tuple<int, int, int>> parse_bond_sidecar(const std::string& text,
                                                                 const std::string& path) {
    std::vector<std::tuple<int, int, int>> bonds;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        int i = 0, j = 0, order = 0;
        if (!(is >> i >> j >> order))
            throw std::runtime_error("bond sidecar " + path + ": malformed line " +
                                     std::to_string(lineno));
        bonds.emplace_back(i, j, order);
    }
    return bonds;
}

// Reads every .xyz file in a directory (sorted by filename). Bonds come from a
// same-stem .bonds sidecar when present, otherwise from the lookup table. Only
// the largest connected fragment is kept; positions are zero-centered and
// eccentricities cached. Files that fail to parse or contain elements outside
// the vocabulary are skipped with a warning count.
inline Dataset ingest_dataset(const std::string& directory, const BondTable& table,
                              const AtomVocabulary& vocab) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory))
        throw std::runtime_error("ingest_dataset: not a directory: " + directory);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".xyz")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    Dataset ds;
    std::vector<double> type_counts(static_cast<std::size_t>(vocab.stop_index()), 0.0);
    for (const fs::path& file : files) {
        try {
            std::ifstream in(file);
            if (!in) throw std::runtime_error("cannot open file");
            std::stringstream buffer;
            buffer << in.rdbuf();
            XyzMolecule mol = parse_xyz(buffer.str());
            if (mol.symbols.empty()) throw std::runtime_error("empty molecule");

            std::vector<int> types;
            types.reserve(mol.symbols.size());
            for (const std::string& s : mol.symbols) {
                int idx = vocab.index_of(s);
                if (idx < 0) throw std::runtime_error("element " + s + " not in vocabulary");
                types.push_back(idx);
            }

            MolecularGraph bonded;
            fs::path sidecar = file;
            sidecar.replace_extension(".bonds");
            if (fs::exists(sidecar)) {
                std::ifstream sin(sidecar);
                std::stringstream sbuf;
                sbuf << sin.rdbuf();
                auto bonds = parse_bond_sidecar(sbuf.str(), sidecar.string());
                std::vector<std::pair<int, int>> edges;
                std::vector<int> orders;
                for (auto [i, j, order] : bonds) {
                    edges.emplace_back(i, j);
                    orders.push_back(order);
                }
                bonded = MolecularGraph(types, mol.positions, edges, orders);
            } else {
                BondPerception perception = infer_bonds(mol.symbols, mol.positions, table, &types);
                ds.unknown_pair_warnings += perception.unknown_pair_warnings;
                bonded = std::move(perception.graph);
            }

            auto components = connected_components(bonded);
            std::size_t best = 0;
            for (std::size_t c = 1; c < components.size(); ++c)
                if (components[c].size() > components[best].size()) best = c;
            MolecularGraph fragment = components.size() == 1
                                          ? std::move(bonded)
                                          : induced_subgraph(bonded, NodeSet(components[best]));

            std::vector<std::string> frag_symbols;
            frag_symbols.reserve(static_cast<std::size_t>(fragment.num_atoms()));
            for (int t : fragment.types()) frag_symbols.push_back(vocab.symbol(t));

            MolecularGraph centered(std::vector<int>(fragment.types()),
                                    zero_center(fragment.positions()),
                                    [&fragment] {
                                        std::vector<std::pair<int, int>> e;
                                        for (const Bond& b : fragment.bonds()) e.emplace_back(b.a, b.b);
                                        return e;
                                    }(),
                                    [&fragment] {
                                        std::vector<int> o;
                                        for (const Bond& b : fragment.bonds()) o.push_back(b.order);
                                        return o;
                                    }());
            centered.set_eccentricities(all_eccentricities(centered));

            ds.reference_hashes.insert(canonical_hash(centered, frag_symbols));
            ds.max_atoms = std::max(ds.max_atoms, centered.num_atoms());
            for (int t : centered.types()) type_counts[static_cast<std::size_t>(t)] += 1.0;
            ds.graphs.push_back(std::move(centered));
            ds.symbols.push_back(std::move(frag_symbols));
        } catch (const std::exception&) {
            ++ds.skipped_files;
        }
    }

    double total = 0.0;
    for (double c : type_counts) total += c;
    ds.type_marginal.assign(type_counts.size(), 0.0);
    if (total > 0.0)
        for (std::size_t i = 0; i < type_counts.size(); ++i) ds.type_marginal[i] = type_counts[i] / total;
    return ds;
}

// -- corpus metrics ---------------------------------------------------------------------------

struct MoleculeRow {
    int atoms = 0;
    int stable_atoms = 0;
    bool mol_stable = false;
    bool connected = false;
    bool valid = false;
    bool valid_single_reduction = false;
    std::uint64_t hash = 0;
};

struct EvalReport {
    int n_samples = 0;
    double atom_stable_pct = 0.0;
    double mol_stable_pct = 0.0;
    double valid_pct = 0.0;
    double valid_single_reduction_pct = 0.0;
    double unique_pct = 0.0;
    double novel_pct = 0.0;
    bool has_reference = false;
    int unknown_element_warnings = 0;
    std::vector<MoleculeRow> rows;
};

struct MetricOptions {
    bool single_bond_reduction = false;  // drives which validity feeds unique/novel
};

namespace detail {
// Valence sanitization: connected and no atom exceeds its allowed valence,
// everything bonded at least once. Unknown elements fail.
inline bool sanitize(const MolecularGraph& g, const std::vector<std::string>& symbols,
                     const ValenceRules& rules, bool reduce_to_single) {
    if (g.num_atoms() == 0) return false;
    if (!is_connected(g)) return false;
    std::vector<int> total(static_cast<std::size_t>(g.num_atoms()), 0);
    for (const Bond& b : g.bonds()) {
        int order = reduce_to_single ? 1 : b.order;
        total[static_cast<std::size_t>(b.a)] += order;
        total[static_cast<std::size_t>(b.b)] += order;
    }
    for (int i = 0; i < g.num_atoms(); ++i) {
        auto allowed = rules.allowed(symbols[static_cast<std::size_t>(i)]);
        if (!allowed) return false;
        if (total[static_cast<std::size_t>(i)] < 1 || total[static_cast<std::size_t>(i)] > *allowed) return false;
    }
    return true;
}
}  // namespace detail

// Corpus-level stability/validity/uniqueness/novelty. Inputs are bonded graphs
// (orders assigned) with parallel element symbols. Percentages are over all
// samples; uniqueness counts distinct canonical hashes among valid molecules
// and novelty counts unique hashes absent from the reference set.
inline EvalReport molecule_metrics(const std::vector<MolecularGraph>& graphs,
                                   const std::vector<std::vector<std::string>>& symbols,
                                   const ValenceRules& rules,
                                   const std::unordered_set<std::uint64_t>* reference_hashes = nullptr,
                                   const MetricOptions& options = {}) {
    if (graphs.size() != symbols.size())
        throw std::invalid_argument("molecule_metrics: graphs/symbols size mismatch");
    EvalReport report;
    report.n_samples = static_cast<int>(graphs.size());
    report.has_reference = reference_hashes != nullptr;
    if (graphs.empty()) return report;

    long total_atoms = 0, total_stable = 0, mol_stable = 0, valid = 0, valid_single = 0;
    for (std::size_t m = 0; m < graphs.size(); ++m) {
        const MolecularGraph& g = graphs[m];
        MoleculeRow row;
        row.atoms = g.num_atoms();
        auto stable = atom_stability(g, symbols[m], rules, &report.unknown_element_warnings);
        row.stable_atoms = static_cast<int>(std::count(stable.begin(), stable.end(), true));
        row.mol_stable = row.stable_atoms == row.atoms && row.atoms > 0;
        row.connected = g.num_atoms() > 0 && is_connected(g);
        row.valid = detail::sanitize(g, symbols[m], rules, false);
        row.valid_single_reduction = detail::sanitize(g, symbols[m], rules, true);
        row.hash = canonical_hash(g, symbols[m]);
        if (row.mol_stable) {
            // Definitional: a stable molecule has every atom stable.
            if (row.stable_atoms != row.atoms)
                throw std::logic_error("molecule_metrics: stability bookkeeping violated");
        }
        total_atoms += row.atoms;
        total_stable += row.stable_atoms;
        mol_stable += row.mol_stable ? 1 : 0;
        valid += row.valid ? 1 : 0;
        valid_single += row.valid_single_reduction ? 1 : 0;
        report.rows.push_back(row);
    }

    std::unordered_set<std::uint64_t> unique_hashes;
    long novel = 0;
    for (const MoleculeRow& row : report.rows) {
        const bool counts_as_valid = options.single_bond_reduction ? row.valid_single_reduction : row.valid;
        if (!counts_as_valid) continue;
        if (unique_hashes.insert(row.hash).second) {
            if (reference_hashes != nullptr && !reference_hashes->count(row.hash)) ++novel;
        }
    }

    const double n = static_cast<double>(report.n_samples);
    report.atom_stable_pct = total_atoms > 0 ? 100.0 * static_cast<double>(total_stable) /
                                                   static_cast<double>(total_atoms)
                                             : 0.0;
    report.mol_stable_pct = 100.0 * static_cast<double>(mol_stable) / n;
    report.valid_pct = 100.0 * static_cast<double>(valid) / n;
    report.valid_single_reduction_pct = 100.0 * static_cast<double>(valid_single) / n;
    report.unique_pct = 100.0 * static_cast<double>(unique_hashes.size()) / n;
    report.novel_pct = reference_hashes != nullptr ? 100.0 * static_cast<double>(novel) / n : 0.0;
    return report;
}

}  // namespace chem
}  // namespace neat

#endif  // NEAT_CHEM_HPP
