#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "neat/toy.hpp"
#include "neat/trainer.hpp"

using namespace neat;

namespace {

Config tiny_config() {
    Config cfg;
    cfg.elements = {"H", "C", "N", "O"};
    cfg.model.encoder.layers = 2;
    cfg.model.encoder.heads = 2;
    cfg.model.encoder.hidden = 32;
    cfg.model.encoder.fourier_bands = 8;
    cfg.model.flow.blocks = 1;
    cfg.model.flow.hidden = 48;
    cfg.train.sigma = 1.4;
    cfg.train.batch_size = 8;
    cfg.train.lr = 2e-3;
    cfg.train.epochs = 100;
    cfg.train.warmup_epochs = 5;
    cfg.train.val_fraction = 0.0;
    cfg.finalize();
    return cfg;
}

std::vector<MolecularGraph> toy_graphs(int count, std::uint64_t seed) {
    chem::BondTable table =
        chem::BondTable::load_tsv(std::string(NEAT_DATA_DIR) + "/bond_table.tsv");
    AtomVocabulary vocab({"H", "C", "N", "O"});
    ToySpec spec;
    spec.max_heavy_atoms = 3;
    spec.count = count;
    spec.seed = seed;
    std::vector<MolecularGraph> graphs;
    for (auto& mol : generate_toy_corpus(spec, table, vocab)) graphs.push_back(std::move(mol.graph));
    return graphs;
}

}  // namespace

TEST_CASE("lr schedule") {
    TrainConfig cfg;
    cfg.lr = 0.004;
    cfg.epochs = 200;
    cfg.warmup_epochs = 10;
    cfg.min_lr_fraction = 0.10;

    CHECK(lr_at(0, cfg) == 0.0);
    CHECK(lr_at(1, cfg) == Catch::Approx(0.004 / 10.0));
    CHECK(lr_at(10, cfg) == Catch::Approx(0.004));
    CHECK(lr_at(199, cfg) == Catch::Approx(0.0004).margin(1e-9));
    // Monotone decay after warmup.
    for (int e = 11; e < 199; ++e) CHECK(lr_at(e, cfg) <= lr_at(e - 1, cfg) + 1e-15);
    CHECK_THROWS_AS(lr_at(-1, cfg), std::invalid_argument);

    SECTION("no warmup") {
        cfg.warmup_epochs = 0;
        CHECK(lr_at(0, cfg) == Catch::Approx(0.004));
        CHECK(lr_at(199, cfg) == Catch::Approx(0.0004).margin(1e-9));
    }
}

TEST_CASE("AdamW decoupled weight decay") {
    Config cfg = tiny_config();
    cfg.train.weight_decay = 0.01;
    ParamStore params;
    Tensor& w = params.create("w", {2, 2});
    w.data() = {1.0f, -2.0f, 0.5f, 4.0f};
    std::vector<float> before = w.data();

    AdamW opt(params, cfg.train);
    w.grad();  // allocate zero gradient
    const double lr = 0.1;
    opt.step(lr);
    // Zero gradient: parameters shrink by exactly (1 - lr*wd).
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(w.data()[i] == Catch::Approx(before[i] * (1.0 - lr * 0.01)).margin(1e-7));
}

TEST_CASE("global norm clipping") {
    Config cfg = tiny_config();
    ParamStore params;
    Tensor& a = params.create("a", {2});
    Tensor& b = params.create("b", {2});
    a.grad() = {3.0f, 0.0f};
    b.grad() = {0.0f, 4.0f};
    double norm = clip_global_norm(params, 1.0);
    CHECK(norm == Catch::Approx(5.0));
    double sq = 0.0;
    for (float g : a.grad()) sq += g * g;
    for (float g : b.grad()) sq += g * g;
    CHECK(std::sqrt(sq) == Catch::Approx(1.0).margin(1e-6));

    a.grad() = {0.3f, 0.0f};
    b.grad() = {0.0f, 0.4f};
    clip_global_norm(params, 1.0);
    CHECK(a.grad()[0] == 0.3f);  // below the threshold: untouched
}

TEST_CASE("train_step clips the gradient norm") {
    Config cfg = tiny_config();
    auto graphs = toy_graphs(4, 21);
    Rng init(1);
    ParamStore params = init_params(cfg.model, init);
    AdamW opt(params, cfg.train);
    Rng rng(2);
    std::vector<const MolecularGraph*> batch;
    for (const auto& g : graphs) batch.push_back(&g);
    train_step(batch, params, opt, cfg, 1e-3, rng);
    double sq = 0.0;
    for (auto& [name, p] : params.map())
        for (float g : p.grad()) sq += static_cast<double>(g) * g;
    CHECK(std::sqrt(sq) <= cfg.train.clip_norm + 1e-6);
}

TEST_CASE("training is deterministic in the seed") {
    Config cfg = tiny_config();
    auto graphs = toy_graphs(6, 33);
    std::vector<const MolecularGraph*> batch;
    for (const auto& g : graphs) batch.push_back(&g);

    auto run3 = [&](std::uint64_t seed) {
        Rng init(seed);
        ParamStore params = init_params(cfg.model, init);
        AdamW opt(params, cfg.train);
        Rng rng(seed + 1);
        std::vector<double> losses;
        for (int s = 0; s < 3; ++s) {
            StepLosses l = train_step(batch, params, opt, cfg, 1e-3, rng);
            losses.push_back(l.total());
        }
        return losses;
    };
    auto a = run3(42), b = run3(42);
    for (int s = 0; s < 3; ++s) CHECK(a[static_cast<std::size_t>(s)] == b[static_cast<std::size_t>(s)]);
}

TEST_CASE("validate") {
    Config cfg = tiny_config();
    auto graphs = toy_graphs(5, 44);
    std::vector<const MolecularGraph*> val;
    for (const auto& g : graphs) val.push_back(&g);
    Rng init(3);
    ParamStore params = init_params(cfg.model, init);

    SECTION("same params give the same value") {
        double v1 = validate(val, params, cfg, 77);
        double v2 = validate(val, params, cfg, 77);
        CHECK(v1 == v2);
    }
    SECTION("empty set errors") {
        CHECK_THROWS_AS(validate({}, params, cfg, 77), std::invalid_argument);
    }
}

TEST_CASE("toy overfit: validation loss drops below the first epoch") {
    chem::BondTable table =
        chem::BondTable::load_tsv(std::string(NEAT_DATA_DIR) + "/bond_table.tsv");
    AtomVocabulary vocab({"H", "C", "N", "O"});
    ToySpec spec;
    spec.max_heavy_atoms = 3;
    spec.count = 20;
    spec.seed = 2025;
    auto corpus = generate_toy_corpus(spec, table, vocab);

    auto dir = std::filesystem::temp_directory_path() / "neat_test_trainer_overfit";
    std::filesystem::remove_all(dir);
    write_toy_corpus(corpus, dir.string());
    chem::Dataset data = ingest_dataset(dir.string(), table, vocab);

    Config cfg = tiny_config();
    cfg.train.epochs = 200;
    cfg.train.warmup_epochs = 10;
    cfg.train.batch_size = 20;
    cfg.train.lr = 3e-3;
    cfg.train.seed = 7;
    cfg.finalize();

    auto out_dir = std::filesystem::temp_directory_path() / "neat_test_trainer_out";
    std::filesystem::remove_all(out_dir);
    TrainResult result = train(data, cfg, out_dir.string());

    // First and last logged validation losses.
    std::ifstream log(result.log_path);
    std::string header, line, first_row, last_row;
    std::getline(log, header);
    CHECK(header == "epoch,loss_type,loss_cfm,loss_total,val_loss,lr");
    while (std::getline(log, line)) {
        if (first_row.empty()) first_row = line;
        last_row = line;
    }
    auto val_of = [](const std::string& row) {
        std::istringstream is(row);
        std::string field;
        for (int i = 0; i < 5; ++i) std::getline(is, field, ',');
        return std::stod(field);
    };
    const double first_val = val_of(first_row);
    CHECK(result.best_val_loss < first_val);
    CHECK(result.best_epoch >= 0);

    // Checkpoint reload reproduces the best validation loss bitwise.
    ckpt::ModelCheckpoint loaded = ckpt::load_model(result.checkpoint_path);
    Rng fresh_rng(999);
    ParamStore restored = init_params(loaded.config.model, fresh_rng);
    ckpt::restore_params(restored, loaded.tensors);
    std::vector<const MolecularGraph*> val;
    for (const auto& g : data.graphs) val.push_back(&g);
    const std::uint64_t val_seed = mix64(cfg.train.seed ^ 0x76616c69ULL);
    const double revalidated = validate(val, restored, loaded.config, val_seed);
    CHECK(revalidated == result.best_val_loss);

    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(out_dir);
}

TEST_CASE("train_step rejects empty batches") {
    Config cfg = tiny_config();
    Rng init(5);
    ParamStore params = init_params(cfg.model, init);
    AdamW opt(params, cfg.train);
    Rng rng(6);
    CHECK_THROWS_AS(train_step({}, params, opt, cfg, 1e-3, rng), std::invalid_argument);
}
