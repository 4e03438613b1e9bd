// cli.hpp
// Command-line entrypoint: train, sample, complete, eval, split-demo, toy-gen.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#ifndef NEAT_CLI_HPP
#define NEAT_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <thread>

#include "neat/generator.hpp"
#include "neat/toy.hpp"
#include "neat/trainer.hpp"

namespace neat {
namespace cli {

namespace detail {

inline std::string default_table_path() {
    namespace fs = std::filesystem;
    if (fs::exists("data/bond_table.tsv")) return "data/bond_table.tsv";
    return std::string(NEAT_DATA_DIR) + "/bond_table.tsv";
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Chunked index-parallel map with a deterministic merge (results land by
// index regardless of the thread schedule).
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int n_threads = std::min<int>(threads, static_cast<int>(count));
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

struct EvalInput {
    std::vector<std::vector<std::string>> symbols;
    std::vector<MolecularGraph> graphs;  // bonded, no fragment selection
    int unknown_pair_warnings = 0;
    int skipped_files = 0;
};

// Evaluation-side loader: bonds from sidecars when present, otherwise from
// the lookup table. Molecules are taken as-is (a disconnected result must
// count against validity).
inline EvalInput load_eval_dir(const std::string& directory, const chem::BondTable& table,
                               int threads) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) throw std::runtime_error("not a directory: " + directory);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".xyz")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    EvalInput out;
    out.symbols.resize(files.size());
    out.graphs.resize(files.size());
    std::vector<int> warnings(files.size(), 0);
    std::vector<char> ok(files.size(), 0);
    parallel_for(files.size(), threads, [&](std::size_t i) {
        try {
            chem::XyzMolecule mol = chem::parse_xyz(read_file(files[i].string()));
            fs::path sidecar = files[i];
            sidecar.replace_extension(".bonds");
            if (fs::exists(sidecar)) {
                auto bonds = chem::parse_bond_sidecar(read_file(sidecar.string()), sidecar.string());
                std::vector<std::pair<int, int>> edges;
                std::vector<int> orders;
                for (auto [a, b, order] : bonds) {
                    edges.emplace_back(a, b);
                    orders.push_back(order);
                }
                out.graphs[i] = MolecularGraph(std::vector<int>(mol.symbols.size(), 0),
                                               mol.positions, edges, orders);
            } else {
                chem::BondPerception p = chem::infer_bonds(mol.symbols, mol.positions, table);
                out.graphs[i] = std::move(p.graph);
                warnings[i] = p.unknown_pair_warnings;
            }
            out.symbols[i] = std::move(mol.symbols);
            ok[i] = 1;
        } catch (const std::exception&) {
            ok[i] = 0;
        }
    });
    EvalInput filtered;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!ok[i]) {
            ++filtered.skipped_files;
            continue;
        }
        filtered.symbols.push_back(std::move(out.symbols[i]));
        filtered.graphs.push_back(std::move(out.graphs[i]));
        filtered.unknown_pair_warnings += warnings[i];
    }
    return filtered;
}

inline nlohmann::ordered_json report_to_json(const chem::EvalReport& report) {
    nlohmann::ordered_json j;
    j["n_samples"] = report.n_samples;
    j["atom_stable_pct"] = report.atom_stable_pct;
    j["mol_stable_pct"] = report.mol_stable_pct;
    j["valid_pct"] = report.valid_pct;
    j["valid_single_reduction_pct"] = report.valid_single_reduction_pct;
    j["unique_pct"] = report.unique_pct;
    if (report.has_reference)
        j["novel_pct"] = report.novel_pct;
    else
        j["novel_pct"] = nullptr;
    j["unknown_element_warnings"] = report.unknown_element_warnings;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const chem::MoleculeRow& row : report.rows) {
        nlohmann::ordered_json r;
        r["atoms"] = row.atoms;
        r["stable_atoms"] = row.stable_atoms;
        r["mol_stable"] = row.mol_stable;
        r["connected"] = row.connected;
        r["valid"] = row.valid;
        r["valid_single_reduction"] = row.valid_single_reduction;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(row.hash));
        r["hash"] = buf;
        rows.push_back(std::move(r));
    }
    j["molecules"] = std::move(rows);
    return j;
}

inline void print_report_table(const chem::EvalReport& report, std::ostream& os) {
    char line[160];
    os << "metric                      value\n";
    os << "---------------------------------\n";
    std::snprintf(line, sizeof(line), "%-26s %7d\n", "n_samples", report.n_samples);
    os << line;
    auto pct = [&](const char* name, double v) {
        std::snprintf(line, sizeof(line), "%-26s %7.2f\n", name, v);
        os << line;
    };
    pct("atom_stable_pct", report.atom_stable_pct);
    pct("mol_stable_pct", report.mol_stable_pct);
    pct("valid_pct", report.valid_pct);
    pct("valid_single_reduction_pct", report.valid_single_reduction_pct);
    pct("unique_pct", report.unique_pct);
    if (report.has_reference) pct("novel_pct", report.novel_pct);
}

struct LoadedModel {
    Config config;
    ParamStore params;
    std::vector<double> type_marginal;
    int max_train_atoms = 0;
};

inline LoadedModel load_model_for_inference(const std::string& ckpt_path) {
    ckpt::ModelCheckpoint m = ckpt::load_model(ckpt_path);
    Rng dummy(0);
    LoadedModel out{m.config, init_params(m.config.model, dummy), m.type_marginal,
                    m.max_train_atoms};
    ckpt::restore_params(out.params, m.tensors);
    return out;
}

inline void write_results(const std::vector<GenerationResult>& results,
                          const AtomVocabulary& vocab, const std::string& out_dir,
                          std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream manifest(fs::path(out_dir) / "manifest.jsonl");
    char name[32];
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::snprintf(name, sizeof(name), "sample_%05zu", i);
        std::vector<std::string> symbols;
        for (int t : results[i].types) symbols.push_back(vocab.symbol(t));
        std::ofstream xyz(fs::path(out_dir) / (std::string(name) + ".xyz"));
        xyz << chem::write_xyz(symbols, results[i].positions, name);
        nlohmann::ordered_json j;
        j["index"] = i;
        j["atoms"] = results[i].types.size();
        j["stop_reason"] = results[i].stop_reason;
        j["seed"] = seed;
        manifest << j.dump() << "\n";
    }
}

// Generation settings shared by `sample` and `complete`.
struct GenCliOptions {
    std::string integrator = "euler";
    int steps = 60;
    double tau = 0.3;
    double eta = 1e-3;
    double sigma = 0.0;  // 0: take the checkpoint value
    int max_atoms = 0;   // 0: largest training molecule + 10%
    std::string type_sampling = "multinomial";
    bool uniform_seed_type = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--integrator", integrator, "ODE/SDE integrator")
            ->check(CLI::IsMember({"euler", "euler_maruyama"}));
        cmd->add_option("--steps", steps, "integration steps");
        cmd->add_option("--tau", tau, "SDE noise scale");
        cmd->add_option("--eta", eta, "diffusion-coefficient stabilizer");
        cmd->add_option("--sigma", sigma, "source noise std (default: checkpoint value)");
        cmd->add_option("--max-atoms", max_atoms,
                        "atom cap (default: largest training molecule + 10%)");
        cmd->add_option("--type-sampling", type_sampling, "next-type sampling rule")
            ->check(CLI::IsMember({"multinomial", "greedy"}));
        cmd->add_flag("--uniform-seed-type", uniform_seed_type,
                      "seed atom type uniform instead of the training marginal");
    }

    GenConfig to_config(const LoadedModel& model, std::uint64_t seed) const {
        GenConfig gen;
        gen.integrator = integrator == "euler" ? Integrator::euler : Integrator::euler_maruyama;
        gen.steps = steps;
        gen.tau = tau;
        gen.eta = eta;
        gen.sigma = sigma > 0.0 ? sigma : model.config.train.sigma;
        gen.max_atoms = max_atoms > 0
                            ? max_atoms
                            : std::max(1, static_cast<int>(std::ceil(model.max_train_atoms * 1.1)));
        gen.type_sampling = type_sampling == "greedy" ? TypeSampling::greedy
                                                      : TypeSampling::multinomial;
        gen.seed = seed;
        gen.uniform_seed_type = uniform_seed_type;
        gen.validate();
        return gen;
    }
};

}  // namespace detail

// Parses argv and runs one subcommand.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"neighborhood-guided autoregressive 3D molecule generator"};
    app.require_subcommand(1);

    // --- train ---------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train a model on an XYZ dataset");
    std::string train_data, train_config_path, train_out = "run", train_table;
    double train_margin = 0.10;
    std::vector<std::pair<std::string, std::string>> overrides;
    train_cmd->add_option("--data", train_data, "dataset directory (.xyz [+ .bonds])")->required();
    train_cmd->add_option("--config", train_config_path, "key = value config file");
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_option("--table", train_table, "bond table tsv");
    train_cmd->add_option("--margin", train_margin, "bond length tolerance margin");
    // Every config key doubles as a CLI override.
    static const char* kConfigKeys[] = {
        "elements", "hidden", "layers", "heads", "fourier_bands", "fourier_min_freq",
        "fourier_max_freq", "dropout", "flow_hidden", "flow_blocks", "beta", "gamma", "sigma",
        "epochs", "batch_size", "lr", "warmup_epochs", "min_lr_fraction", "weight_decay",
        "clip_norm", "adam_beta1", "adam_beta2", "seed", "time_resamples", "val_fraction"};
    auto override_values = std::make_shared<std::map<std::string, std::string>>();
    for (const char* key : kConfigKeys)
        train_cmd->add_option_function<std::string>(
            "--" + std::string(key),
            [override_values, key](const std::string& v) { (*override_values)[key] = v; },
            "config override");

    // --- sample --------------------------------------------------------------
    auto* sample_cmd = app.add_subcommand("sample", "generate molecules from a checkpoint");
    std::string sample_ckpt, sample_out = "samples";
    int sample_n = 10;
    std::uint64_t sample_seed = 0;
    detail::GenCliOptions sample_gen;
    sample_cmd->add_option("--ckpt", sample_ckpt, "checkpoint file")->required();
    sample_cmd->add_option("--n", sample_n, "number of molecules")->required();
    sample_cmd->add_option("--out", sample_out, "output directory");
    sample_cmd->add_option("--seed", sample_seed, "generation seed");
    sample_gen.add_to(sample_cmd);

    // --- complete ------------------------------------------------------------
    auto* complete_cmd = app.add_subcommand("complete", "complete a molecular prefix");
    std::string complete_ckpt, complete_prefix_path, complete_out = "completions";
    int complete_n = 10;
    std::uint64_t complete_seed = 0;
    bool no_translate = false;
    double translation_scale = 0.5;
    detail::GenCliOptions complete_gen;
    complete_cmd->add_option("--ckpt", complete_ckpt, "checkpoint file")->required();
    complete_cmd->add_option("--prefix", complete_prefix_path, "prefix .xyz file")->required();
    complete_cmd->add_option("--n", complete_n, "number of completions")->required();
    complete_cmd->add_option("--out", complete_out, "output directory");
    complete_cmd->add_option("--seed", complete_seed, "generation seed");
    complete_cmd->add_flag("--no-translate", no_translate, "rotate the prefix without translating");
    complete_cmd->add_option("--translation-scale", translation_scale,
                             "std of the random prefix translation");
    complete_gen.add_to(complete_cmd);

    // --- eval ----------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "bond-lookup metrics over an XYZ directory");
    std::string eval_in, eval_ref, eval_table, eval_json;
    bool single_bond_reduction = false;
    int eval_threads = static_cast<int>(std::thread::hardware_concurrency());
    double eval_margin = 0.10;
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--in", eval_in, "directory of molecules to evaluate")->required();
    eval_cmd->add_option("--ref", eval_ref, "reference directory for novelty");
    eval_cmd->add_option("--table", eval_table, "bond table tsv");
    eval_cmd->add_option("--margin", eval_margin, "bond length tolerance margin");
    eval_cmd->add_option("--json", eval_json, "write the JSON report here (default: stdout)");
    eval_cmd->add_flag("--single-bond-reduction", single_bond_reduction,
                       "reduce assigned bonds to single bonds for validity");
    eval_cmd->add_option("--threads", eval_threads, "worker threads");
    eval_cmd->add_option("--seed", eval_seed, "unused; accepted for interface uniformity");

    // --- split-demo ------------------------------------------------------------
    auto* split_cmd = app.add_subcommand("split-demo", "source/target split size histogram");
    std::string split_in, split_out, split_table, split_elements = "H,C,N,O,F";
    int split_samples = 10000;
    double split_beta = 1.5, split_gamma = 0.45;
    std::uint64_t split_seed = 0;
    split_cmd->add_option("--in", split_in, "dataset directory")->required();
    split_cmd->add_option("--samples", split_samples, "number of split draws");
    split_cmd->add_option("--beta", split_beta, "round-count scale");
    split_cmd->add_option("--gamma", split_gamma, "boundary dropout");
    split_cmd->add_option("--out", split_out, "CSV output path (default: stdout)");
    split_cmd->add_option("--seed", split_seed, "sampling seed");
    split_cmd->add_option("--table", split_table, "bond table tsv");
    split_cmd->add_option("--elements", split_elements, "vocabulary elements");

    // --- toy-gen ----------------------------------------------------------------
    auto* toy_cmd = app.add_subcommand("toy-gen", "generate an idealized toy corpus");
    std::string toy_out, toy_elements = "C,N,O", toy_table;
    int toy_n = 20, toy_max_heavy = 6;
    std::uint64_t toy_seed = 0;
    toy_cmd->add_option("--out", toy_out, "output directory")->required();
    toy_cmd->add_option("--n", toy_n, "number of molecules");
    toy_cmd->add_option("--max-heavy", toy_max_heavy, "maximum heavy atoms");
    toy_cmd->add_option("--elements", toy_elements, "heavy elements, comma separated");
    toy_cmd->add_option("--seed", toy_seed, "corpus seed");
    toy_cmd->add_option("--table", toy_table, "bond table tsv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 1;
    }

    try {
        if (train_cmd->parsed()) {
            Config cfg;
            if (!train_config_path.empty()) cfg = parse_config(detail::read_file(train_config_path));
            for (const auto& [key, value] : *override_values) apply_config_key(cfg, key, value);
            cfg.finalize();
            chem::BondTable table = chem::BondTable::load_tsv(
                train_table.empty() ? detail::default_table_path() : train_table, train_margin);
            AtomVocabulary vocab = cfg.vocabulary();
            chem::Dataset data = chem::ingest_dataset(train_data, table, vocab);
            if (data.graphs.empty()) throw std::runtime_error("no usable molecules in " + train_data);
            std::cout << "ingested " << data.graphs.size() << " molecules ("
                      << data.skipped_files << " skipped)\n";
            TrainResult result = train(data, cfg, train_out, &std::cout);
            std::cout << "best val loss " << result.best_val_loss << " at epoch "
                      << result.best_epoch << "\n";
            std::cout << "checkpoint: " << result.checkpoint_path << "\n";
            std::cout << "log: " << result.log_path << "\n";
        } else if (sample_cmd->parsed()) {
            detail::LoadedModel model = detail::load_model_for_inference(sample_ckpt);
            GenConfig gen = sample_gen.to_config(model, sample_seed);
            auto results = generate(model.params, model.config.model, gen, model.type_marginal,
                                    sample_n);
            detail::write_results(results, model.config.vocabulary(), sample_out, sample_seed);
            std::cout << "wrote " << results.size() << " molecules to " << sample_out << "\n";
        } else if (complete_cmd->parsed()) {
            detail::LoadedModel model = detail::load_model_for_inference(complete_ckpt);
            GenConfig gen = complete_gen.to_config(model, complete_seed);
            gen.prefix_translate = !no_translate;
            gen.prefix_translation_scale = translation_scale;
            chem::XyzMolecule prefix = chem::parse_xyz(detail::read_file(complete_prefix_path));
            AtomVocabulary vocab = model.config.vocabulary();
            std::vector<int> prefix_types;
            for (const std::string& s : prefix.symbols) {
                int idx = vocab.index_of(s);
                if (idx < 0) throw std::runtime_error("prefix element " + s + " not in vocabulary");
                prefix_types.push_back(idx);
            }
            auto results = complete_prefix(model.params, model.config.model, gen, prefix_types,
                                           prefix.positions, complete_n);
            detail::write_results(results, vocab, complete_out, complete_seed);
            std::cout << "wrote " << results.size() << " completions to " << complete_out << "\n";
        } else if (eval_cmd->parsed()) {
            chem::BondTable table = chem::BondTable::load_tsv(
                eval_table.empty() ? detail::default_table_path() : eval_table, eval_margin);
            detail::EvalInput input = detail::load_eval_dir(eval_in, table, eval_threads);
            chem::ValenceRules rules = chem::ValenceRules::standard();
            std::unordered_set<std::uint64_t> reference;
            const std::unordered_set<std::uint64_t>* reference_ptr = nullptr;
            if (!eval_ref.empty()) {
                detail::EvalInput ref = detail::load_eval_dir(eval_ref, table, eval_threads);
                for (std::size_t i = 0; i < ref.graphs.size(); ++i)
                    reference.insert(chem::canonical_hash(ref.graphs[i], ref.symbols[i]));
                reference_ptr = &reference;
            }
            chem::MetricOptions options;
            options.single_bond_reduction = single_bond_reduction;
            chem::EvalReport report =
                chem::molecule_metrics(input.graphs, input.symbols, rules, reference_ptr, options);
            detail::print_report_table(report, std::cout);
            nlohmann::ordered_json j = detail::report_to_json(report);
            if (eval_json.empty()) {
                std::cout << j.dump(2) << "\n";
            } else {
                std::ofstream out(eval_json);
                if (!out) throw std::runtime_error("cannot open " + eval_json);
                out << j.dump(2) << "\n";
                std::cout << "report: " << eval_json << "\n";
            }
        } else if (split_cmd->parsed()) {
            chem::BondTable table = chem::BondTable::load_tsv(
                split_table.empty() ? detail::default_table_path() : split_table);
            Config ecfg;
            apply_config_key(ecfg, "elements", split_elements);
            AtomVocabulary vocab = ecfg.vocabulary();
            chem::Dataset data = chem::ingest_dataset(split_in, table, vocab);
            if (data.graphs.empty()) throw std::runtime_error("no usable molecules in " + split_in);
            SamplerConfig scfg{split_beta, split_gamma};
            Rng rng(split_seed);
            SplitStatistics stats = split_statistics(data.graphs, scfg, split_samples, rng);
            std::ostringstream csv;
            csv << "rel_source,rel_target\n";
            csv.precision(8);
            for (std::size_t i = 0; i < stats.rel_source.size(); ++i)
                csv << stats.rel_source[i] << "," << stats.rel_target[i] << "\n";
            if (split_out.empty()) {
                std::cout << csv.str();
            } else {
                std::ofstream out(split_out);
                if (!out) throw std::runtime_error("cannot open " + split_out);
                out << csv.str();
                std::cout << "histogram: " << split_out << " (mean rel_source "
                          << stats.mean_rel_source() << ", mean rel_target "
                          << stats.mean_rel_target() << ")\n";
            }
        } else if (toy_cmd->parsed()) {
            chem::BondTable table = chem::BondTable::load_tsv(
                toy_table.empty() ? detail::default_table_path() : toy_table);
            ToySpec spec;
            spec.count = toy_n;
            spec.max_heavy_atoms = toy_max_heavy;
            spec.seed = toy_seed;
            spec.elements = neat::detail::parse_list(toy_elements);
            std::vector<std::string> vocab_elements = {"H"};
            for (const std::string& e : spec.elements) vocab_elements.push_back(e);
            AtomVocabulary vocab{vocab_elements};
            auto corpus = generate_toy_corpus(spec, table, vocab);
            write_toy_corpus(corpus, toy_out);
            std::cout << "wrote " << corpus.size() << " molecules to " << toy_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace cli
}  // namespace neat

#endif  // NEAT_CLI_HPP
