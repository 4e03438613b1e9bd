// checkpoint.hpp
// Named-tensor container: magic "NEATCKPT1", then per tensor the name length,
// UTF-8 name, rank and dims as 64-bit little-endian, and a row-major 32-bit
// little-endian float payload. Tensors are written in name order.
#ifndef NEAT_CHECKPOINT_HPP
#define NEAT_CHECKPOINT_HPP

#include <fstream>
#include <map>

#include "neat/config.hpp"

namespace neat {
namespace ckpt {

inline constexpr char kMagic[] = "NEATCKPT1";
inline constexpr std::size_t kMagicLen = 9;

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

inline void write_f32(std::ostream& out, const std::vector<float>& data) {
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * 4));
}

}  // namespace detail

inline void save(const std::string& path, const std::map<std::string, Tensor>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    out.write(kMagic, kMagicLen);
    for (const auto& [name, t] : tensors) {
        detail::write_u64(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u64(out, static_cast<std::uint64_t>(t.shape().size()));
        for (long d : t.shape()) detail::write_u64(out, static_cast<std::uint64_t>(d));
        detail::write_f32(out, t.data());
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline std::map<std::string, Tensor> load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (!in || std::string(magic, kMagicLen) != std::string(kMagic, kMagicLen))
        throw std::runtime_error("checkpoint: bad magic in " + path);

    std::map<std::string, Tensor> tensors;
    while (true) {
        in.peek();
        if (in.eof()) break;
        std::uint64_t name_len = detail::read_u64(in);
        if (name_len > 1'000'000) throw std::runtime_error("checkpoint: corrupt name length");
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        std::uint64_t rank = detail::read_u64(in);
        if (rank > 8) throw std::runtime_error("checkpoint: corrupt rank for " + name);
        std::vector<long> shape;
        std::uint64_t numel = 1;
        for (std::uint64_t r = 0; r < rank; ++r) {
            std::uint64_t d = detail::read_u64(in);
            shape.push_back(static_cast<long>(d));
            numel *= d;
        }
        std::vector<float> data(numel);
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(numel * 4));
        if (!in) throw std::runtime_error("checkpoint: truncated payload for " + name);
        tensors.emplace(name, Tensor::from_data(std::move(shape), std::move(data)));
    }
    return tensors;
}

// Text payloads ride in the container as one byte per float.
inline Tensor string_tensor(const std::string& s) {
    std::vector<float> data;
    data.reserve(s.size());
    for (unsigned char c : s) data.push_back(static_cast<float>(c));
    return Tensor::from_data({static_cast<long>(s.size())}, std::move(data));
}

inline std::string tensor_string(const Tensor& t) {
    std::string s;
    s.reserve(t.data().size());
    for (float f : t.data()) s.push_back(static_cast<char>(static_cast<unsigned char>(f)));
    return s;
}

// Full model checkpoint: parameters plus config echo, epoch, validation loss
// and generation metadata (training type marginal and maximum molecule size).
struct ModelCheckpoint {
    Config config;
    std::map<std::string, Tensor> tensors;  // parameter values
    int epoch = 0;
    double val_loss = 0.0;
    std::vector<double> type_marginal;
    int max_train_atoms = 0;
};

inline void save_model(const std::string& path, const std::map<std::string, Tensor>& params,
                       const Config& config, int epoch, double val_loss,
                       const std::vector<double>& type_marginal, int max_train_atoms) {
    std::map<std::string, Tensor> all;
    for (const auto& [name, t] : params) {
        Tensor copy = Tensor::from_data(t.shape(), t.data());
        all.emplace(name, std::move(copy));
    }
    all.emplace("meta.config", string_tensor(config_to_text(config)));
    all.emplace("meta.epoch", Tensor::from_data({1}, {static_cast<float>(epoch)}));
    all.emplace("meta.val_loss", Tensor::from_data({1}, {static_cast<float>(val_loss)}));
    std::vector<float> marginal(type_marginal.begin(), type_marginal.end());
    const long marginal_len = static_cast<long>(marginal.size());
    all.emplace("meta.type_marginal", Tensor::from_data({marginal_len}, std::move(marginal)));
    all.emplace("meta.max_train_atoms",
                Tensor::from_data({1}, {static_cast<float>(max_train_atoms)}));
    save(path, all);
}

inline ModelCheckpoint load_model(const std::string& path) {
    auto all = load(path);
    auto take = [&all, &path](const std::string& name) {
        auto it = all.find(name);
        if (it == all.end())
            throw std::runtime_error("checkpoint: missing tensor '" + name + "' in " + path);
        Tensor t = it->second;
        all.erase(it);
        return t;
    };
    ModelCheckpoint m;
    m.config = parse_config(tensor_string(take("meta.config")));
    m.epoch = static_cast<int>(take("meta.epoch").item());
    m.val_loss = static_cast<double>(take("meta.val_loss").item());
    Tensor marginal = take("meta.type_marginal");
    m.type_marginal.assign(marginal.data().begin(), marginal.data().end());
    m.max_train_atoms = static_cast<int>(take("meta.max_train_atoms").item());
    m.tensors = std::move(all);
    return m;
}

// Copies checkpoint tensor values into an initialized parameter store,
// checking shapes.
inline void restore_params(ParamStore& params, const std::map<std::string, Tensor>& tensors) {
    for (auto& [name, t] : params.map()) {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
        if (it->second.shape() != t.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': " +
                                     shape_str(it->second.shape()) + " vs " + shape_str(t.shape()));
        t.data() = it->second.data();
    }
}

}  // namespace ckpt
}  // namespace neat

#endif  // NEAT_CHECKPOINT_HPP
