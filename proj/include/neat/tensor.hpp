// tensor.hpp
// Minimal dense float tensor with reverse-mode automatic differentiation.
// Rank 1 and 2 tensors only; no broadcasting beyond the row-vector helpers.
#ifndef NEAT_TENSOR_HPP
#define NEAT_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "neat/common.hpp"

namespace neat {

namespace detail {

struct TensorNode {
    std::vector<long> shape;
    std::vector<float> value;
    std::vector<float> grad;  // allocated on demand, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;

    long numel() const {
        long n = 1;
        for (long d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0f);
    }
};

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

// Disables graph recording for the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline std::string shape_str(const std::vector<long>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<long> shape, bool requires_grad = false) {
        auto node = std::make_shared<detail::TensorNode>();
        node->shape = std::move(shape);
        node->value.assign(static_cast<std::size_t>(node->numel()), 0.0f);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor from_data(std::vector<long> shape, std::vector<float> data,
                            bool requires_grad = false) {
        auto node = std::make_shared<detail::TensorNode>();
        node->shape = std::move(shape);
        if (static_cast<long>(data.size()) != node->numel())
            throw std::invalid_argument("Tensor::from_data: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(node->shape));
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor scalar(float v) { return from_data({1, 1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const std::vector<long>& shape() const { return node_->shape; }
    long rank() const { return static_cast<long>(node_->shape.size()); }
    long numel() const { return node_->numel(); }

    long rows() const { return rank() == 2 ? node_->shape[0] : 1; }
    long cols() const { return rank() == 2 ? node_->shape[1] : node_->shape[0]; }

    std::vector<float>& data() { return node_->value; }
    const std::vector<float>& data() const { return node_->value; }

    float item() const {
        if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor has " +
                                                      std::to_string(numel()) + " elements");
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<float>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        if (!node_->grad.empty()) node_->grad.assign(node_->grad.size(), 0.0f);
    }

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

inline Tensor make_result(std::vector<long> shape, std::vector<float> value,
                          std::vector<Tensor> inputs,
                          std::function<void(TensorNode&)> backward) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool req = false;
    for (const Tensor& t : inputs) req = req || t.requires_grad();
    if (grad_mode() && req) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (const Tensor& t : inputs) node->parents.push_back(t.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

// -- raw matmul kernels (row-major) ------------------------------------------

// C += A(n,k) * B(k,m)
inline void mm_nn(float* c, const float* a, const float* b, long n, long k, long m) {
    for (long i = 0; i < n; ++i) {
        float* ci = c + i * m;
        const float* ai = a + i * k;
        for (long p = 0; p < k; ++p) {
            const float av = ai[p];
            const float* bp = b + p * m;
            for (long j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

// C += A(n,k) * B(m,k)^T
inline void mm_nt(float* c, const float* a, const float* b, long n, long k, long m) {
    for (long i = 0; i < n; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * m;
        for (long j = 0; j < m; ++j) {
            const float* bj = b + j * k;
            float acc = 0.0f;
            for (long p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C += A(k,n)^T * B(k,m)
inline void mm_tn(float* c, const float* a, const float* b, long n, long k, long m) {
    for (long p = 0; p < k; ++p) {
        const float* ap = a + p * n;
        const float* bp = b + p * m;
        for (long i = 0; i < n; ++i) {
            const float av = ap[i];
            float* ci = c + i * m;
            for (long j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

inline void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got shape " +
                                    shape_str(t.shape()));
}

}  // namespace detail

// -- elementwise and structural ops -------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<float> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        for (int p = 0; p < 2; ++p) {
            auto& par = n.parents[static_cast<std::size_t>(p)];
            if (!par->requires_grad) continue;
            par->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) par->grad[i] += n.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<float> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<float> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->value[i];
        }
    });
}

inline Tensor scale(const Tensor& a, float s) {
    std::vector<float> out(a.data());
    for (float& v : out) v *= s;
    return detail::make_result(a.shape(), std::move(out), {a}, [s](detail::TensorNode& n) {
        auto& pa = n.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += s * n.grad[i];
    });
}

inline Tensor add_const(const Tensor& a, float c) {
    std::vector<float> out(a.data());
    for (float& v : out) v += c;
    return detail::make_result(a.shape(), std::move(out), {a}, [](detail::TensorNode& n) {
        auto& pa = n.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    });
}

// x:[n,h] + b:[h] broadcast over rows.
inline Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    detail::check_rank2(x, "add_rowvec");
    if (b.rank() != 1 || b.cols() != x.cols())
        throw std::invalid_argument("add_rowvec: shape mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(b.shape()));
    const long n = x.rows(), h = x.cols();
    std::vector<float> out(x.data());
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < h; ++j) out[static_cast<std::size_t>(i * h + j)] += b.data()[static_cast<std::size_t>(j)];
    return detail::make_result(x.shape(), std::move(out), {x, b}, [n, h](detail::TensorNode& nd) {
        auto& px = nd.parents[0];
        auto& pb = nd.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (std::size_t i = 0; i < nd.grad.size(); ++i) px->grad[i] += nd.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (long i = 0; i < n; ++i)
                for (long j = 0; j < h; ++j)
                    pb->grad[static_cast<std::size_t>(j)] += nd.grad[static_cast<std::size_t>(i * h + j)];
        }
    });
}

// x:[n,h] * w:[h] broadcast over rows.
inline Tensor mul_rowvec(const Tensor& x, const Tensor& w) {
    detail::check_rank2(x, "mul_rowvec");
    if (w.rank() != 1 || w.cols() != x.cols())
        throw std::invalid_argument("mul_rowvec: shape mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(w.shape()));
    const long n = x.rows(), h = x.cols();
    std::vector<float> out(x.data());
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < h; ++j) out[static_cast<std::size_t>(i * h + j)] *= w.data()[static_cast<std::size_t>(j)];
    return detail::make_result(x.shape(), std::move(out), {x, w}, [n, h](detail::TensorNode& nd) {
        auto& px = nd.parents[0];
        auto& pw = nd.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (long i = 0; i < n; ++i)
                for (long j = 0; j < h; ++j)
                    px->grad[static_cast<std::size_t>(i * h + j)] +=
                        nd.grad[static_cast<std::size_t>(i * h + j)] * pw->value[static_cast<std::size_t>(j)];
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            for (long i = 0; i < n; ++i)
                for (long j = 0; j < h; ++j)
                    pw->grad[static_cast<std::size_t>(j)] +=
                        nd.grad[static_cast<std::size_t>(i * h + j)] * px->value[static_cast<std::size_t>(i * h + j)];
        }
    });
}

// -- matrix ops ---------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::check_rank2(a, "matmul");
    detail::check_rank2(b, "matmul");
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const long n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<float> out(static_cast<std::size_t>(n * m), 0.0f);
    detail::mm_nn(out.data(), a.data().data(), b.data().data(), n, k, m);
    return detail::make_result({n, m}, std::move(out), {a, b}, [n, k, m](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        auto& pb = nd.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();  // dA = dC * B^T
            detail::mm_nt(pa->grad.data(), nd.grad.data(), pb->value.data(), n, m, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();  // dB = A^T * dC
            detail::mm_tn(pb->grad.data(), pa->value.data(), nd.grad.data(), k, n, m);
        }
    });
}

// a * b^T without materializing the transpose.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    detail::check_rank2(a, "matmul_nt");
    detail::check_rank2(b, "matmul_nt");
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_nt: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const long n = a.rows(), k = a.cols(), m = b.rows();
    std::vector<float> out(static_cast<std::size_t>(n * m), 0.0f);
    detail::mm_nt(out.data(), a.data().data(), b.data().data(), n, k, m);
    return detail::make_result({n, m}, std::move(out), {a, b}, [n, k, m](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        auto& pb = nd.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();  // dA = dC * B
            detail::mm_nn(pa->grad.data(), nd.grad.data(), pb->value.data(), n, m, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();  // dB = dC^T * A
            detail::mm_tn(pb->grad.data(), nd.grad.data(), pa->value.data(), m, n, k);
        }
    });
}

inline Tensor transpose(const Tensor& a) {
    detail::check_rank2(a, "transpose");
    const long n = a.rows(), m = a.cols();
    std::vector<float> out(static_cast<std::size_t>(n * m));
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < m; ++j)
            out[static_cast<std::size_t>(j * n + i)] = a.data()[static_cast<std::size_t>(i * m + j)];
    return detail::make_result({m, n}, std::move(out), {a}, [n, m](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < m; ++j)
                pa->grad[static_cast<std::size_t>(i * m + j)] += nd.grad[static_cast<std::size_t>(j * n + i)];
    });
}

// -- nonlinearities -------------------------------------------------------------

// tanh-approximation GELU.
inline Tensor gelu(const Tensor& a) {
    constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
    constexpr float kA = 0.044715f;
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        float x = a.data()[i];
        float u = kC * (x + kA * x * x * x);
        out[i] = 0.5f * x * (1.0f + std::tanh(u));
    }
    return detail::make_result(a.shape(), std::move(out), {a}, [](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        constexpr float c = 0.7978845608028654f;
        constexpr float aa = 0.044715f;
        for (std::size_t i = 0; i < nd.grad.size(); ++i) {
            float x = pa->value[i];
            float u = c * (x + aa * x * x * x);
            float t = std::tanh(u);
            float du = c * (1.0f + 3.0f * aa * x * x);
            float d = 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
            pa->grad[i] += nd.grad[i] * d;
        }
    });
}

inline Tensor softmax_lastdim(const Tensor& a) {
    const long n = a.rows(), m = a.cols();
    std::vector<float> out(a.data().size());
    for (long i = 0; i < n; ++i) {
        const float* row = a.data().data() + i * m;
        float* orow = out.data() + i * m;
        float mx = row[0];
        for (long j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (long j = 0; j < m; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (long j = 0; j < m; ++j) orow[j] /= sum;
    }
    return detail::make_result(a.shape(), std::move(out), {a}, [n, m](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (long i = 0; i < n; ++i) {
            const float* y = nd.value.data() + i * m;
            const float* g = nd.grad.data() + i * m;
            float dotgy = 0.0f;
            for (long j = 0; j < m; ++j) dotgy += g[j] * y[j];
            float* pg = pa->grad.data() + i * m;
            for (long j = 0; j < m; ++j) pg[j] += (g[j] - dotgy) * y[j];
        }
    });
}

// Row-wise layer normalization without affine parameters.
inline Tensor layernorm(const Tensor& a, float eps = 1e-5f) {
    detail::check_rank2(a, "layernorm");
    const long n = a.rows(), m = a.cols();
    std::vector<float> out(a.data().size());
    std::vector<float> inv_std(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const float* row = a.data().data() + i * m;
        float mean = 0.0f;
        for (long j = 0; j < m; ++j) mean += row[j];
        mean /= static_cast<float>(m);
        float var = 0.0f;
        for (long j = 0; j < m; ++j) {
            float d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<float>(m);
        float is = 1.0f / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = is;
        float* orow = out.data() + i * m;
        for (long j = 0; j < m; ++j) orow[j] = (row[j] - mean) * is;
    }
    return detail::make_result(a.shape(), std::move(out), {a},
                               [n, m, inv_std](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (long i = 0; i < n; ++i) {
            const float* y = nd.value.data() + i * m;
            const float* g = nd.grad.data() + i * m;
            float gmean = 0.0f, gymean = 0.0f;
            for (long j = 0; j < m; ++j) {
                gmean += g[j];
                gymean += g[j] * y[j];
            }
            gmean /= static_cast<float>(m);
            gymean /= static_cast<float>(m);
            const float is = inv_std[static_cast<std::size_t>(i)];
            float* pg = pa->grad.data() + i * m;
            for (long j = 0; j < m; ++j) pg[j] += is * (g[j] - gmean - y[j] * gymean);
        }
    });
}

// Natural log with a positive floor; gradient is zero below the floor.
inline Tensor log_clamped(const Tensor& a, float floor = 1e-12f) {
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(a.data()[i], floor));
    return detail::make_result(a.shape(), std::move(out), {a}, [floor](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < nd.grad.size(); ++i) {
            float x = pa->value[i];
            if (x > floor) pa->grad[i] += nd.grad[i] / x;
        }
    });
}

// -- gather/scatter and reductions ---------------------------------------------

inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    detail::check_rank2(table, "embedding_lookup");
    const long v = table.rows(), h = table.cols();
    const long n = static_cast<long>(ids.size());
    if (n == 0) throw std::invalid_argument("embedding_lookup: empty index list");
    std::vector<float> out(static_cast<std::size_t>(n * h));
    for (long i = 0; i < n; ++i) {
        int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= v)
            throw std::invalid_argument("embedding_lookup: index " + std::to_string(id) +
                                        " out of range for table " + shape_str(table.shape()));
        std::copy_n(table.data().data() + id * h, h, out.data() + i * h);
    }
    return detail::make_result({n, h}, std::move(out), {table}, [ids, h](detail::TensorNode& nd) {
        auto& pt = nd.parents[0];
        if (!pt->requires_grad) return;
        pt->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            float* dst = pt->grad.data() + static_cast<long>(ids[i]) * h;
            const float* src = nd.grad.data() + static_cast<long>(i) * h;
            for (long j = 0; j < h; ++j) dst[j] += src[j];
        }
    });
}

inline Tensor slice_cols(const Tensor& a, long c0, long c1) {
    detail::check_rank2(a, "slice_cols");
    if (c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") for shape " + shape_str(a.shape()));
    const long n = a.rows(), m = a.cols(), w = c1 - c0;
    std::vector<float> out(static_cast<std::size_t>(n * w));
    for (long i = 0; i < n; ++i)
        std::copy_n(a.data().data() + i * m + c0, w, out.data() + i * w);
    return detail::make_result({n, w}, std::move(out), {a}, [n, m, c0, w](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (long i = 0; i < n; ++i) {
            const float* src = nd.grad.data() + i * w;
            float* dst = pa->grad.data() + i * m + c0;
            for (long j = 0; j < w; ++j) dst[j] += src[j];
        }
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const long n = parts[0].rows();
    long total = 0;
    for (const Tensor& p : parts) {
        detail::check_rank2(p, "concat_cols");
        if (p.rows() != n)
            throw std::invalid_argument("concat_cols: row mismatch " + shape_str(parts[0].shape()) +
                                        " vs " + shape_str(p.shape()));
        total += p.cols();
    }
    std::vector<float> out(static_cast<std::size_t>(n * total));
    long off = 0;
    std::vector<long> widths;
    for (const Tensor& p : parts) {
        const long w = p.cols();
        widths.push_back(w);
        for (long i = 0; i < n; ++i)
            std::copy_n(p.data().data() + i * w, w, out.data() + i * total + off);
        off += w;
    }
    return detail::make_result({n, total}, std::move(out), parts,
                               [n, total, widths](detail::TensorNode& nd) {
        long off2 = 0;
        for (std::size_t k = 0; k < nd.parents.size(); ++k) {
            auto& p = nd.parents[k];
            const long w = widths[k];
            if (p->requires_grad) {
                p->ensure_grad();
                for (long i = 0; i < n; ++i) {
                    const float* src = nd.grad.data() + i * total + off2;
                    float* dst = p->grad.data() + i * w;
                    for (long j = 0; j < w; ++j) dst[j] += src[j];
                }
            }
            off2 += w;
        }
    });
}

// Repeat a [1,h] row n times; gradient sums over rows.
inline Tensor repeat_rows(const Tensor& row, long n) {
    detail::check_rank2(row, "repeat_rows");
    if (row.rows() != 1) throw std::invalid_argument("repeat_rows: expected [1,h], got " +
                                                     shape_str(row.shape()));
    if (n < 1) throw std::invalid_argument("repeat_rows: n must be >= 1");
    const long h = row.cols();
    std::vector<float> out(static_cast<std::size_t>(n * h));
    for (long i = 0; i < n; ++i) std::copy_n(row.data().data(), h, out.data() + i * h);
    return detail::make_result({n, h}, std::move(out), {row}, [n, h](detail::TensorNode& nd) {
        auto& pr = nd.parents[0];
        if (!pr->requires_grad) return;
        pr->ensure_grad();
        for (long i = 0; i < n; ++i) {
            const float* src = nd.grad.data() + i * h;
            for (long j = 0; j < h; ++j) pr->grad[static_cast<std::size_t>(j)] += src[j];
        }
    });
}

// [n,h] -> [1,h]; rows summed in ascending row order.
inline Tensor sum_rows(const Tensor& a) {
    detail::check_rank2(a, "sum_rows");
    const long n = a.rows(), h = a.cols();
    std::vector<float> out(static_cast<std::size_t>(h), 0.0f);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < h; ++j) out[static_cast<std::size_t>(j)] += a.data()[static_cast<std::size_t>(i * h + j)];
    return detail::make_result({1, h}, std::move(out), {a}, [n, h](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < h; ++j)
                pa->grad[static_cast<std::size_t>(i * h + j)] += nd.grad[static_cast<std::size_t>(j)];
    });
}

inline Tensor sum_all(const Tensor& a) {
    float s = 0.0f;
    for (float v : a.data()) s += v;
    return detail::make_result({1, 1}, {s}, {a}, [](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (float& g : pa->grad) g += nd.grad[0];
    });
}

inline Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0f / static_cast<float>(a.numel()));
}

// Inverted dropout; active only when called (callers skip it in eval mode).
inline Tensor dropout(const Tensor& a, float p, Rng& rng) {
    if (p < 0.0f || p >= 1.0f) throw std::invalid_argument("dropout: p must be in [0,1)");
    if (p == 0.0f) return a;
    std::vector<float> mask(a.data().size());
    const float keep = 1.0f - p;
    for (float& m : mask) m = (rng.uniform() >= p) ? 1.0f / keep : 0.0f;
    std::vector<float> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return detail::make_result(a.shape(), std::move(out), {a}, [mask](detail::TensorNode& nd) {
        auto& pa = nd.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < nd.grad.size(); ++i) pa->grad[i] += nd.grad[i] * mask[i];
    });
}

// -- reverse pass ----------------------------------------------------------------

// Populates grads of everything reachable from a scalar loss.
inline void backward(Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS for the topological order.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> visited;
    std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::TensorNode* par = node->parents[next].get();
            ++next;
            if (par->requires_grad && !visited.count(par)) {
                visited.insert(par);
                stack.emplace_back(par, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

// -- gradient checking -------------------------------------------------------------

struct GradCheckReport {
    float max_rel_err = 0.0f;
    bool pass = false;
};

// Compares reverse-mode gradients of a scalar function against central finite
// differences at the given point. The relative error uses a floor so that
// near-zero gradients are compared absolutely.
inline GradCheckReport grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f,
                                  std::vector<Tensor> point, float h = 1e-3f, float tol = 1e-2f,
                                  float floor = 1e-2f) {
    for (auto& p : point) p.zero_grad();
    Tensor loss = f(point);
    if (loss.numel() != 1) throw std::invalid_argument("grad_check: f must be scalar-valued");
    backward(loss);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < point.size(); ++pi) {
        Tensor& p = point[pi];
        if (!p.requires_grad()) continue;
        std::vector<float> analytic = p.grad();
        for (std::size_t i = 0; i < p.data().size(); ++i) {
            const float orig = p.data()[i];
            p.data()[i] = orig + h;
            float fp = f(point).item();
            p.data()[i] = orig - h;
            float fm = f(point).item();
            p.data()[i] = orig;
            const float numeric = (fp - fm) / (2.0f * h);
            const float a = analytic[i];
            const float denom = std::max({std::fabs(a), std::fabs(numeric), floor});
            report.max_rel_err = std::max(report.max_rel_err, std::fabs(a - numeric) / denom);
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace neat

#endif  // NEAT_TENSOR_HPP
