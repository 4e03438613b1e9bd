#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "neat/checkpoint.hpp"

using namespace neat;

namespace {
std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

TEST_CASE("tensor container round-trip is bit-exact") {
    auto dir = std::filesystem::temp_directory_path() / "neat_test_ckpt";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "tensors.neat").string();

    Rng rng(1);
    std::map<std::string, Tensor> tensors;
    tensors.emplace("a.weight", Tensor::from_data({3, 4}, [&] {
        std::vector<float> v(12);
        for (float& x : v) x = static_cast<float>(rng.normal());
        return v;
    }()));
    tensors.emplace("a.bias", Tensor::from_data({4}, {1.5f, -2.25f, 0.0f, 1e-20f}));
    tensors.emplace("z", Tensor::from_data({1}, {42.0f}));

    ckpt::save(path, tensors);
    std::string bytes1 = read_bytes(path);
    CHECK(bytes1.substr(0, 9) == "NEATCKPT1");

    auto loaded = ckpt::load(path);
    REQUIRE(loaded.size() == 3);
    for (const auto& [name, t] : tensors) {
        REQUIRE(loaded.count(name) == 1);
        CHECK(loaded.at(name).shape() == t.shape());
        CHECK(loaded.at(name).data() == t.data());
    }

    ckpt::save(path, loaded);
    CHECK(read_bytes(path) == bytes1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("container wire format layout") {
    auto dir = std::filesystem::temp_directory_path() / "neat_test_ckpt_fmt";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "one.neat").string();
    std::map<std::string, Tensor> tensors;
    tensors.emplace("w", Tensor::from_data({2, 1}, {1.0f, 2.0f}));
    ckpt::save(path, tensors);
    std::string bytes = read_bytes(path);
    // magic(9) + name_len(8) + "w"(1) + rank(8) + dims(16) + payload(8)
    REQUIRE(bytes.size() == 9 + 8 + 1 + 8 + 16 + 8);
    CHECK(static_cast<unsigned char>(bytes[9]) == 1);   // name length LE
    CHECK(bytes[17] == 'w');
    CHECK(static_cast<unsigned char>(bytes[18]) == 2);  // rank LE
    CHECK(static_cast<unsigned char>(bytes[26]) == 2);  // dim 0
    CHECK(static_cast<unsigned char>(bytes[34]) == 1);  // dim 1
    float payload[2];
    std::memcpy(payload, bytes.data() + 42, 8);
    CHECK(payload[0] == 1.0f);
    CHECK(payload[1] == 2.0f);
    std::filesystem::remove_all(dir);
}

TEST_CASE("bad files are rejected") {
    auto dir = std::filesystem::temp_directory_path() / "neat_test_ckpt_bad";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "bad.neat").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTMAGIC!";
    }
    CHECK_THROWS_AS(ckpt::load(path), std::runtime_error);
    {
        std::ofstream out(path, std::ios::binary);
        out << "NEATCKPT1";
        out.write("\x05\x00\x00", 3);  // truncated name length
    }
    CHECK_THROWS_AS(ckpt::load(path), std::runtime_error);
    CHECK_THROWS_AS(ckpt::load((dir / "missing.neat").string()), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("model checkpoint carries config echo and metadata") {
    auto dir = std::filesystem::temp_directory_path() / "neat_test_ckpt_model";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.neat").string();

    Config cfg;
    cfg.elements = {"H", "C", "O"};
    cfg.model.encoder.layers = 1;
    cfg.model.encoder.heads = 2;
    cfg.model.encoder.hidden = 16;
    cfg.model.encoder.fourier_bands = 4;
    cfg.model.flow.blocks = 1;
    cfg.model.flow.hidden = 12;
    cfg.train.sigma = 2.5;
    cfg.finalize();

    Rng rng(3);
    ParamStore params = init_params(cfg.model, rng);
    ckpt::save_model(path, params.map(), cfg, 17, 0.75, {0.5, 0.3, 0.2}, 11);

    ckpt::ModelCheckpoint loaded = ckpt::load_model(path);
    CHECK(loaded.epoch == 17);
    CHECK(loaded.val_loss == Catch::Approx(0.75).margin(1e-6));
    CHECK(loaded.max_train_atoms == 11);
    REQUIRE(loaded.type_marginal.size() == 3);
    CHECK(loaded.type_marginal[1] == Catch::Approx(0.3).margin(1e-7));
    CHECK(loaded.config.elements == cfg.elements);
    CHECK(loaded.config.model.encoder.hidden == 16);
    CHECK(loaded.config.train.sigma == 2.5);

    // Restoring into a fresh store reproduces every tensor exactly.
    Rng rng2(99);
    ParamStore fresh = init_params(loaded.config.model, rng2);
    ckpt::restore_params(fresh, loaded.tensors);
    for (const auto& [name, t] : params.map()) CHECK(fresh.at(name).data() == t.data());

    // save -> load -> save is byte-identical.
    std::string bytes1 = read_bytes(path);
    const std::string path2 = (dir / "model2.neat").string();
    ckpt::save_model(path2, loaded.tensors, loaded.config, loaded.epoch,
                     static_cast<double>(static_cast<float>(loaded.val_loss)), loaded.type_marginal,
                     loaded.max_train_atoms);
    CHECK(read_bytes(path2) == bytes1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config text round-trip") {
    Config cfg;
    cfg.elements = {"H", "C", "N", "O", "F"};
    cfg.train.lr = 0.00025;
    cfg.train.seed = 123456789;
    cfg.model.encoder.dropout = 0.1f;
    cfg.finalize();
    Config parsed = parse_config(config_to_text(cfg));
    CHECK(parsed.train.lr == cfg.train.lr);
    CHECK(parsed.train.seed == cfg.train.seed);
    CHECK(parsed.model.encoder.dropout == cfg.model.encoder.dropout);
    CHECK(config_to_text(parsed) == config_to_text(cfg));
}

TEST_CASE("config parsing rejects unknown keys and bad lines") {
    CHECK_THROWS_AS(parse_config("unknown_key = 5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("hidden\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("lr = abc\n"), ConfigError);
    Config cfg = parse_config("# comment line\nhidden = 64\nheads = 4 # trailing comment\n");
    CHECK(cfg.model.encoder.hidden == 64);
    CHECK(cfg.model.encoder.heads == 4);
}
