// encoder.hpp
// Permutation-invariant set encoder: type embeddings plus Fourier position
// features, pre-norm bidirectional transformer blocks, additive pooling.
#ifndef NEAT_ENCODER_HPP
#define NEAT_ENCODER_HPP

#include <optional>

#include "neat/model.hpp"

namespace neat {

namespace detail {
inline void check_encoder_types(const std::vector<int>& types, int vocab_size) {
    if (types.empty()) throw std::invalid_argument("encoder: input must contain at least one atom");
    const int stop = vocab_size - 1;
    for (int t : types) {
        if (t < 0 || t >= vocab_size)
            throw std::invalid_argument("encoder: type index " + std::to_string(t) + " out of range");
        if (t == stop) throw std::invalid_argument("encoder: stop token is not a valid input atom");
    }
}
}  // namespace detail

// Initial node features: TypeEmbed(a_i) + Linear(Fourier(x_i)).
// Positions are used as given; no re-centering happens here.
inline Tensor embed_atoms(const std::vector<int>& types, const std::vector<Vec3>& positions,
                          const ModelConfig& cfg, ParamStore& params) {
    detail::check_encoder_types(types, cfg.vocab_size);
    if (types.size() != positions.size())
        throw std::invalid_argument("embed_atoms: types/positions size mismatch");
    Tensor type_emb = embedding_lookup(params.at("encoder.type_embed"), types);
    Tensor four = fourier_features(positions, cfg.encoder);
    Tensor pos_emb = add_rowvec(matmul(four, params.at("encoder.fourier_proj.w")),
                                params.at("encoder.fourier_proj.b"));
    return add(type_emb, pos_emb);
}

namespace detail {

inline Tensor attention(const Tensor& x, const std::string& prefix, const EncoderConfig& cfg,
                        ParamStore& params, bool training, Rng* rng) {
    const long h = cfg.hidden;
    const long d = h / cfg.heads;
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));
    Tensor qkv = add_rowvec(matmul(x, params.at(prefix + "attn.qkv.w")),
                            params.at(prefix + "attn.qkv.b"));
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(cfg.heads));
    for (int i = 0; i < cfg.heads; ++i) {
        Tensor q = slice_cols(qkv, i * d, (i + 1) * d);
        Tensor k = slice_cols(qkv, h + i * d, h + (i + 1) * d);
        Tensor v = slice_cols(qkv, 2 * h + i * d, 2 * h + (i + 1) * d);
        Tensor att = softmax_lastdim(scale(matmul_nt(q, k), inv_sqrt_d));
        if (training && cfg.dropout > 0.0f) att = dropout(att, cfg.dropout, *rng);
        head_outputs.push_back(matmul(att, v));
    }
    Tensor merged = cfg.heads == 1 ? head_outputs[0] : concat_cols(head_outputs);
    Tensor out = add_rowvec(matmul(merged, params.at(prefix + "attn.proj.w")),
                            params.at(prefix + "attn.proj.b"));
    if (training && cfg.dropout > 0.0f) out = dropout(out, cfg.dropout, *rng);
    return out;
}

inline Tensor mlp(const Tensor& x, const std::string& prefix, const EncoderConfig& cfg,
                  ParamStore& params, bool training, Rng* rng) {
    Tensor hgelu = gelu(matmul(x, params.at(prefix + "mlp.fc.w")));
    Tensor out = matmul(hgelu, params.at(prefix + "mlp.proj.w"));
    if (training && cfg.dropout > 0.0f) out = dropout(out, cfg.dropout, *rng);
    return out;
}

}  // namespace detail

// Final per-node representations after the transformer trunk, [n, hidden].
inline Tensor encode_nodes(const std::vector<int>& types, const std::vector<Vec3>& positions,
                           const ModelConfig& cfg, ParamStore& params, bool training = false,
                           Rng* rng = nullptr) {
    if (training && cfg.encoder.dropout > 0.0f && rng == nullptr)
        throw std::invalid_argument("encode: training with dropout requires an rng");
    Tensor x = embed_atoms(types, positions, cfg, params);
    for (int l = 0; l < cfg.encoder.layers; ++l) {
        const std::string p = "encoder.block" + std::to_string(l) + ".";
        Tensor a = detail::attention(mul_rowvec(layernorm(x), params.at(p + "ln1.w")), p,
                                     cfg.encoder, params, training, rng);
        x = add(x, a);
        Tensor m = detail::mlp(mul_rowvec(layernorm(x), params.at(p + "ln2.w")), p, cfg.encoder,
                               params, training, rng);
        x = add(x, m);
    }
    return mul_rowvec(layernorm(x), params.at("encoder.ln_f.w"));
}

// Set-level representation z, [1, hidden]: additive pooling of the node
// representations, summed in ascending node order.
inline Tensor encode(const std::vector<int>& types, const std::vector<Vec3>& positions,
                     const ModelConfig& cfg, ParamStore& params, bool training = false,
                     Rng* rng = nullptr) {
    return sum_rows(encode_nodes(types, positions, cfg, params, training, rng));
}

}  // namespace neat

#endif  // NEAT_ENCODER_HPP
