#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "neat/heads.hpp"

using namespace neat;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.encoder.layers = 1;
    cfg.encoder.heads = 2;
    cfg.encoder.hidden = 16;
    cfg.encoder.fourier_bands = 4;
    cfg.flow.blocks = 2;
    cfg.flow.hidden = 24;
    cfg.vocab_size = 6;
    return cfg;
}

double brute_force_min_cost(const std::vector<Vec3>& x1, const std::vector<Vec3>& x0) {
    std::vector<int> perm(x0.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, transport_cost(x1, x0, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("type_head") {
    ModelConfig cfg = small_config();
    Rng rng(1);
    ParamStore params = init_params(cfg, rng);

    SECTION("zero weights give the uniform distribution") {
        for (float& v : params.at("type_head.w").data()) v = 0.0f;
        for (float& v : params.at("type_head.b").data()) v = 0.0f;
        Tensor z = Tensor::from_data({1, 16}, std::vector<float>(16, 0.3f));
        Tensor p = type_head(z, params);
        for (float v : p.data()) CHECK(v == Catch::Approx(1.0 / 6.0));
    }
    SECTION("a huge bias logit concentrates the mass") {
        params.at("type_head.b").data()[2] = 50.0f;
        Tensor z = Tensor::from_data({1, 16}, std::vector<float>(16, 0.0f));
        Tensor p = type_head(z, params);
        CHECK(p.data()[2] > 0.999f);
    }
    SECTION("probabilities sum to one") {
        Rng zr(3);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<float> zv(16);
            for (float& v : zv) v = static_cast<float>(zr.normal()) * 3.0f;
            Tensor p = type_head(Tensor::from_data({1, 16}, std::move(zv)), params);
            float sum = 0.0f;
            for (float v : p.data()) sum += v;
            CHECK(sum == Catch::Approx(1.0).margin(1e-6));
        }
    }
}

TEST_CASE("type_loss") {
    SECTION("target {C,C,O} at matching prediction gives the target entropy") {
        // Oracle: -(2/3 ln 2/3 + 1/3 ln 1/3) = 0.636514...
        std::vector<float> q = soft_type_target({1, 1, 3}, 6);
        CHECK(q[1] == Catch::Approx(2.0 / 3.0));
        CHECK(q[3] == Catch::Approx(1.0 / 3.0));
        Tensor pred = Tensor::from_data({1, 6}, std::vector<float>(q));
        Tensor loss = type_loss(pred, {1, 1, 3}, 6);
        const double entropy = -(2.0 / 3.0 * std::log(2.0 / 3.0) + 1.0 / 3.0 * std::log(1.0 / 3.0));
        CHECK(entropy == Catch::Approx(0.6365142));
        CHECK(loss.item() == Catch::Approx(entropy).margin(1e-5));
    }
    SECTION("one-hot prediction matching a single-element target is near zero") {
        std::vector<float> pv(6, 0.0f);
        pv[2] = 1.0f;
        Tensor loss = type_loss(Tensor::from_data({1, 6}, std::move(pv)), {2}, 6);
        CHECK(loss.item() == Catch::Approx(0.0).margin(1e-6));
    }
    SECTION("empty target supervises the stop token") {
        std::vector<float> q = soft_type_target({}, 6);
        CHECK(q[5] == 1.0f);
        std::vector<float> pv(6, 1.0f / 6.0f);
        Tensor loss = type_loss(Tensor::from_data({1, 6}, std::move(pv)), {}, 6);
        CHECK(loss.item() == Catch::Approx(std::log(6.0)).margin(1e-5));
    }
    SECTION("soft CE is minimized at pred = q (gradient descent oracle)") {
        std::vector<int> target = {0, 0, 1, 2, 2, 2, 3, 4, 4, 5};  // full-support multiset
        std::vector<float> q = soft_type_target(target, 6);
        Tensor logits = Tensor::zeros({1, 6}, true);
        for (int step = 0; step < 3000; ++step) {
            logits.zero_grad();
            Tensor loss = type_loss(softmax_lastdim(logits), target, 6);
            backward(loss);
            for (std::size_t i = 0; i < 6; ++i) logits.data()[i] -= 1.0f * logits.grad()[i];
        }
        NoGradGuard ng;
        Tensor p = softmax_lastdim(logits);
        for (std::size_t i = 0; i < 6; ++i) CHECK(p.data()[i] == Catch::Approx(q[i]).margin(1e-4));
    }
}

TEST_CASE("couple_ot") {
    SECTION("identity when x0 equals x1") {
        std::vector<Vec3> x = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        std::vector<int> perm = couple_ot(x, x);
        for (int i = 0; i < 3; ++i) CHECK(perm[static_cast<std::size_t>(i)] == i);
        CHECK(transport_cost(x, x, perm) == Catch::Approx(0.0));
    }
    SECTION("two-point swap") {
        std::vector<Vec3> x1 = {{0, 0, 0}, {1, 0, 0}};
        std::vector<Vec3> x0 = {{1.1, 0, 0}, {0.1, 0, 0}};
        std::vector<int> perm = couple_ot(x1, x0);
        CHECK(perm[0] == 1);
        CHECK(perm[1] == 0);
        CHECK(transport_cost(x1, x0, perm) == Catch::Approx(0.2));
    }
    SECTION("empty input") {
        CHECK(couple_ot({}, {}).empty());
    }
    SECTION("matches exhaustive search for k = 4") {
        Rng rng(21);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Vec3> x1(4), x0(4);
            for (auto& p : x1) p = rng.normal3();
            for (auto& p : x0) p = rng.normal3();
            std::vector<int> perm = couple_ot(x1, x0);
            CHECK(transport_cost(x1, x0, perm) ==
                  Catch::Approx(brute_force_min_cost(x1, x0)).margin(1e-9));
        }
    }
    SECTION("never beats nor loses to itself against identity") {
        Rng rng(22);
        for (int trial = 0; trial < 50; ++trial) {
            const int k = 1 + rng.uniform_int(8);
            std::vector<Vec3> x1(static_cast<std::size_t>(k)), x0(static_cast<std::size_t>(k));
            for (auto& p : x1) p = rng.normal3();
            for (auto& p : x0) p = rng.normal3();
            std::vector<int> identity(static_cast<std::size_t>(k));
            std::iota(identity.begin(), identity.end(), 0);
            std::vector<int> perm = couple_ot(x1, x0);
            CHECK(transport_cost(x1, x0, perm) <=
                  transport_cost(x1, x0, identity) + 1e-12);
        }
    }
}

TEST_CASE("sample_time") {
    TimeSamplerConfig cfg;
    SECTION("all draws in (0,1)") {
        Rng rng(31);
        auto t = sample_time(cfg, rng, 20000);
        for (double ti : t) {
            CHECK(ti > 0.0);
            CHECK(ti < 1.0);
        }
    }
    SECTION("logit-normal component mean matches m") {
        TimeSamplerConfig ln_only;
        ln_only.mix_uniform = 0.0;
        Rng rng(32);
        auto t = sample_time(ln_only, rng, 1000000);
        double mean_logit = 0.0;
        for (double ti : t) mean_logit += std::log(ti / (1.0 - ti));
        mean_logit /= static_cast<double>(t.size());
        CHECK(mean_logit == Catch::Approx(0.8).margin(0.01));
    }
    SECTION("logit-normal density value at t = 0.5") {
        TimeSamplerConfig ln_only;
        ln_only.mix_uniform = 0.0;
        // 1/(0.25 * 1.7 * sqrt(2 pi)) * exp(-0.8^2 / (2 * 1.7^2)) = 0.84037
        CHECK(time_density(ln_only, 0.5) == Catch::Approx(0.84037).margin(5e-4));
    }
    SECTION("KS test against numeric CDF of the mixture") {
        // CDF from trapezoid quadrature of the density.
        const int grid_n = 400000;
        std::vector<double> cdf(static_cast<std::size_t>(grid_n + 1), 0.0);
        const double lo = 1e-9, hi = 1.0 - 1e-9;
        const double step = (hi - lo) / grid_n;
        double prev = time_density(cfg, lo);
        for (int i = 1; i <= grid_n; ++i) {
            double x = lo + step * i;
            double d = time_density(cfg, x);
            cdf[static_cast<std::size_t>(i)] = cdf[static_cast<std::size_t>(i - 1)] + 0.5 * (prev + d) * step;
            prev = d;
        }
        const double total = cdf.back();
        CHECK(total == Catch::Approx(1.0).margin(1e-3));
        auto cdf_at = [&](double x) {
            if (x <= lo) return 0.0;
            if (x >= hi) return 1.0;
            double u = (x - lo) / step;
            int i = static_cast<int>(u);
            double frac = u - i;
            return (cdf[static_cast<std::size_t>(i)] * (1.0 - frac) +
                    cdf[static_cast<std::size_t>(i + 1)] * frac) / total;
        };

        const int n = 200000;
        Rng rng(33);
        auto t = sample_time(cfg, rng, n);
        std::sort(t.begin(), t.end());
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            double f = cdf_at(t[static_cast<std::size_t>(i)]);
            ks = std::max(ks, std::fabs(f - static_cast<double>(i) / n));
            ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / n - f));
        }
        const double critical = 1.62762 / std::sqrt(static_cast<double>(n));  // alpha = 0.01
        INFO("KS statistic " << ks << " critical " << critical);
        CHECK(ks < critical);
    }
}

TEST_CASE("interpolate") {
    std::vector<Vec3> x0 = {{0, 0, 0}, {1, 1, 1}};
    std::vector<Vec3> x1 = {{1, 0, 0}, {3, 1, 1}};
    SECTION("endpoints") {
        auto [a, va] = interpolate(x0, x1, {0.0, 0.0});
        CHECK(a[0][0] == 0.0);
        CHECK(a[1][0] == 1.0);
        auto [b, vb] = interpolate(x0, x1, {1.0, 1.0});
        CHECK(b[0][0] == 1.0);
        CHECK(b[1][0] == 3.0);
    }
    SECTION("midpoint and velocity") {
        auto [xt, v] = interpolate({{0, 0, 0}}, {{1, 0, 0}}, {0.5});
        CHECK(xt[0][0] == Catch::Approx(0.5));
        CHECK(v[0][0] == Catch::Approx(1.0));
        CHECK(v[0][1] == 0.0);
    }
    SECTION("FlowBatch rows satisfy the interpolation invariant") {
        Rng rng(41);
        std::vector<Vec3> targets(5);
        for (auto& p : targets) p = rng.normal3();
        TimeSamplerConfig tcfg;
        CfmBatch batch = make_cfm_batch(targets, {0, 1, 2, 3, 4}, 1.4, 3, tcfg, rng);
        REQUIRE(batch.x_t.size() == 15);
        for (std::size_t r = 0; r < batch.x_t.size(); ++r) {
            const Vec3 x1r = targets[r % 5];
            // x_t = (1-t) x0 + t x1 and v = x1 - x0  =>  x_t + (1-t) v = x1
            Vec3 recon = batch.x_t[r] + ((1.0 - batch.t[r]) * batch.v_target[r]);
            for (int d = 0; d < 3; ++d)
                CHECK(recon[static_cast<std::size_t>(d)] ==
                      Catch::Approx(x1r[static_cast<std::size_t>(d)]).margin(1e-9));
        }
    }
}

TEST_CASE("flow_velocity") {
    ModelConfig cfg = small_config();
    Rng rng(51);
    ParamStore params = init_params(cfg, rng);
    Tensor z = Tensor::from_data({1, 16}, std::vector<float>(16, 0.5f));

    SECTION("zero-initialized output layer gives zero velocity") {
        Tensor v = flow_velocity({{0.3, -1.0, 2.0}}, {0.4}, {1}, z, cfg, params);
        for (float c : v.data()) CHECK(c == 0.0f);
    }
    SECTION("stop type is rejected") {
        CHECK_THROWS_AS(flow_velocity({{0, 0, 0}}, {0.5}, {5}, z, cfg, params), std::invalid_argument);
    }
    SECTION("permuting batch rows permutes outputs") {
        for (float& v : params.at("flow_head.final.out.w").data()) v = 0.05f;
        std::vector<Vec3> x = {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}};
        std::vector<double> t = {0.2, 0.5, 0.8};
        std::vector<int> types = {0, 1, 2};
        Tensor a = flow_velocity(x, t, types, z, cfg, params);
        Tensor b = flow_velocity({x[2], x[0], x[1]}, {t[2], t[0], t[1]}, {types[2], types[0], types[1]},
                                 z, cfg, params);
        for (int d = 0; d < 3; ++d) {
            CHECK(b.data()[static_cast<std::size_t>(0 * 3 + d)] == a.data()[static_cast<std::size_t>(2 * 3 + d)]);
            CHECK(b.data()[static_cast<std::size_t>(1 * 3 + d)] == a.data()[static_cast<std::size_t>(0 * 3 + d)]);
        }
    }
    SECTION("gradients pass a finite-difference check") {
        for (float& v : params.at("flow_head.final.out.w").data()) v = 0.05f;
        std::vector<Vec3> x = {{0.5, -0.2, 1.0}, {-1.0, 0.3, 0.2}};
        std::vector<double> t = {0.3, 0.7};
        std::vector<int> types = {0, 2};
        auto f = [&](std::vector<Tensor>& p) {
            (void)p;
            Tensor v = flow_velocity(x, t, types, z, cfg, params);
            return mean_all(mul(v, v));
        };
        std::vector<Tensor> point = {params.at("flow_head.block0.mlp.fc.w"),
                                     params.at("flow_head.block1.ada.w"),
                                     params.at("flow_head.z_proj.w"),
                                     params.at("flow_head.final.out.b")};
        params.zero_grads();
        GradCheckReport r = grad_check(f, point, 1e-3f, 1e-2f);
        INFO("max_rel_err " << r.max_rel_err);
        CHECK(r.pass);
    }
}

TEST_CASE("cfm_loss") {
    ModelConfig cfg = small_config();
    Rng rng(61);
    ParamStore params = init_params(cfg, rng);
    Tensor z = Tensor::from_data({1, 16}, std::vector<float>(16, 0.1f));

    SECTION("prediction equal to target gives zero") {
        // Zero-init head predicts 0; make all target velocities 0.
        CfmBatch batch;
        batch.x_t = {{0.1, 0.2, 0.3}, {0.5, 0.5, 0.5}};
        batch.t = {0.2, 0.9};
        batch.v_target = {{0, 0, 0}, {0, 0, 0}};
        batch.cond_types = {0, 1};
        CHECK(cfm_loss(batch, z, cfg, params).item() == 0.0f);
    }
    SECTION("constant row offset u gives loss |u|^2") {
        CfmBatch batch;
        batch.x_t = {{0.1, 0.2, 0.3}, {0.5, 0.5, 0.5}, {1.0, -1.0, 0.0}};
        batch.t = {0.2, 0.6, 0.9};
        const Vec3 u = {0.3, -0.4, 1.2};
        batch.v_target = {(-1.0) * u, (-1.0) * u, (-1.0) * u};  // pred - target = u
        batch.cond_types = {0, 1, 2};
        CHECK(cfm_loss(batch, z, cfg, params).item() == Catch::Approx(dot(u, u)).margin(1e-5));
    }
    SECTION("single-row hand computation") {
        CfmBatch batch;
        batch.x_t = {{0.0, 0.0, 0.0}};
        batch.t = {0.5};
        batch.v_target = {{1.0, 2.0, 2.0}};
        batch.cond_types = {0};
        // pred = 0, so loss = (1 + 4 + 4) / 1 = 9
        CHECK(cfm_loss(batch, z, cfg, params).item() == Catch::Approx(9.0).margin(1e-5));
    }
    SECTION("coupled pair multiset is invariant to target row order") {
        Rng draw_rng(71);
        std::vector<Vec3> x1(5);
        for (auto& p : x1) p = draw_rng.normal3();
        std::vector<int> types = {0, 1, 2, 3, 4};
        TimeSamplerConfig tcfg;

        Rng a(123);
        CfmBatch ba = make_cfm_batch(x1, types, 1.0, 1, tcfg, a);
        std::vector<int> perm = {3, 0, 4, 1, 2};
        std::vector<Vec3> x1p;
        std::vector<int> typesp;
        for (int p : perm) {
            x1p.push_back(x1[static_cast<std::size_t>(p)]);
            typesp.push_back(types[static_cast<std::size_t>(p)]);
        }
        Rng b(123);
        CfmBatch bb = make_cfm_batch(x1p, typesp, 1.0, 1, tcfg, b);

        // Same noise multiset, so coupling must produce the same set of
        // (x0, type) pairs up to row order.
        auto pairs = [](const CfmBatch& batch) {
            std::vector<std::array<double, 4>> out;
            for (std::size_t i = 0; i < batch.x_t.size(); ++i) {
                const Vec3 x0 = batch.x_t[i] - (batch.t[i] * batch.v_target[i]);
                out.push_back({x0[0], x0[1], x0[2], static_cast<double>(batch.cond_types[i])});
            }
            std::sort(out.begin(), out.end());
            return out;
        };
        auto pa = pairs(ba);
        auto pb = pairs(bb);
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i)
            for (int d = 0; d < 4; ++d)
                CHECK(pa[i][static_cast<std::size_t>(d)] ==
                      Catch::Approx(pb[i][static_cast<std::size_t>(d)]).margin(1e-12));
    }
    SECTION("row order of an assembled batch does not change the loss") {
        for (float& v : params.at("flow_head.final.out.w").data()) v = 0.05f;
        CfmBatch batch;
        Rng r(81);
        for (int i = 0; i < 6; ++i) {
            batch.x_t.push_back(r.normal3());
            batch.t.push_back(0.1 + 0.8 * r.uniform());
            batch.v_target.push_back(r.normal3());
            batch.cond_types.push_back(r.uniform_int(5));
        }
        float l1 = cfm_loss(batch, z, cfg, params).item();
        CfmBatch shuffled;
        for (int i : {4, 2, 0, 5, 1, 3}) {
            shuffled.x_t.push_back(batch.x_t[static_cast<std::size_t>(i)]);
            shuffled.t.push_back(batch.t[static_cast<std::size_t>(i)]);
            shuffled.v_target.push_back(batch.v_target[static_cast<std::size_t>(i)]);
            shuffled.cond_types.push_back(batch.cond_types[static_cast<std::size_t>(i)]);
        }
        float l2 = cfm_loss(shuffled, z, cfg, params).item();
        CHECK(l1 == Catch::Approx(l2).margin(1e-6));
    }
}
