#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "neat/toy.hpp"

using namespace neat;
using namespace neat::chem;

namespace {
BondTable shipped_table() {
    return BondTable::load_tsv(std::string(NEAT_DATA_DIR) + "/bond_table.tsv");
}
}  // namespace

TEST_CASE("single carbon gives methane") {
    BondTable table = shipped_table();
    AtomVocabulary vocab({"H", "C", "N", "O", "F"});
    ToySpec spec;
    spec.max_heavy_atoms = 1;
    spec.elements = {"C"};
    spec.count = 3;
    spec.seed = 7;
    auto corpus = generate_toy_corpus(spec, table, vocab);
    REQUIRE(corpus.size() == 3);
    for (const ToyMolecule& mol : corpus) {
        CHECK(mol.graph.num_atoms() == 5);
        CHECK(mol.graph.num_bonds() == 4);
        CHECK(std::count(mol.symbols.begin(), mol.symbols.end(), "H") == 4);
        CHECK(std::count(mol.symbols.begin(), mol.symbols.end(), "C") == 1);
    }
}

TEST_CASE("every generated molecule is fully stable under the lookup pipeline") {
    BondTable table = shipped_table();
    AtomVocabulary vocab({"H", "C", "N", "O", "F"});
    ValenceRules rules = ValenceRules::standard();
    ToySpec spec;
    spec.max_heavy_atoms = 6;
    spec.count = 40;
    spec.seed = 123;
    auto corpus = generate_toy_corpus(spec, table, vocab);
    REQUIRE(corpus.size() == 40);

    std::vector<MolecularGraph> perceived;
    std::vector<std::vector<std::string>> symbols;
    for (const ToyMolecule& mol : corpus) {
        auto out = infer_bonds(mol.symbols, mol.graph.positions(), table);
        perceived.push_back(out.graph);
        symbols.push_back(mol.symbols);
    }
    EvalReport report = molecule_metrics(perceived, symbols, rules);
    CHECK(report.atom_stable_pct == 100.0);
    CHECK(report.mol_stable_pct == 100.0);
    CHECK(report.valid_pct == 100.0);
}

TEST_CASE("toy corpus is deterministic in the seed") {
    BondTable table = shipped_table();
    AtomVocabulary vocab({"H", "C", "N", "O"});
    ToySpec spec;
    spec.max_heavy_atoms = 4;
    spec.count = 10;
    spec.seed = 55;
    auto a = generate_toy_corpus(spec, table, vocab);
    auto b = generate_toy_corpus(spec, table, vocab);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].symbols == b[i].symbols);
        for (int j = 0; j < a[i].graph.num_atoms(); ++j)
            for (int d = 0; d < 3; ++d)
                CHECK(a[i].graph.positions()[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)] ==
                      b[i].graph.positions()[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)]);
    }
}

TEST_CASE("written corpus round-trips through ingest_dataset") {
    BondTable table = shipped_table();
    AtomVocabulary vocab({"H", "C", "N", "O", "F"});
    ToySpec spec;
    spec.max_heavy_atoms = 5;
    spec.count = 8;
    spec.seed = 99;
    auto corpus = generate_toy_corpus(spec, table, vocab);

    auto dir = std::filesystem::temp_directory_path() / "neat_test_toy_roundtrip";
    std::filesystem::remove_all(dir);
    write_toy_corpus(corpus, dir.string());
    Dataset ds = ingest_dataset(dir.string(), table, vocab);
    std::filesystem::remove_all(dir);

    REQUIRE(ds.graphs.size() == corpus.size());
    CHECK(ds.skipped_files == 0);
    // Sidecar bond counts survive; canonical hashes match the in-memory corpus.
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(ds.graphs[i].num_atoms() == corpus[i].graph.num_atoms());
        CHECK(ds.graphs[i].num_bonds() == corpus[i].graph.num_bonds());
        CHECK(ds.reference_hashes.count(canonical_hash(corpus[i].graph, corpus[i].symbols)) == 1);
    }
}

TEST_CASE("toy spec validation") {
    BondTable table = shipped_table();
    AtomVocabulary vocab({"H", "C"});
    ToySpec bad;
    bad.elements = {"H"};
    CHECK_THROWS_AS(generate_toy_corpus(bad, table, vocab), std::invalid_argument);
    ToySpec off_vocab;
    off_vocab.elements = {"Si"};
    CHECK_THROWS_AS(generate_toy_corpus(off_vocab, table, vocab), std::invalid_argument);
}
