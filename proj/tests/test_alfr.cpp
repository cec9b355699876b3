#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dfr/alfr.hpp"

using namespace dfr;

namespace {

void check_row_stochastic(const AttentionMap& map, double tol = 1e-9) {
    const Shape& s = map.weights.shape();
    REQUIRE(s.size() == 2);
    REQUIRE(s[0] == s[1]);
    for (int r = 0; r < s[0]; ++r) {
        double acc = 0.0;
        for (int c = 0; c < s[1]; ++c) {
            const double v = map.weights.at({r, c});
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            acc += v;
        }
        CHECK(std::abs(acc - 1.0) < tol);
    }
}

// Brute-force attention: exp(f1^T f2) normalized row by row, no max trick.
std::vector<double> attention_oracle(const std::vector<double>& f1, const std::vector<double>& f2,
                                     int c, int n) {
    std::vector<double> w(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int ch = 0; ch < c; ++ch) dot += f1[ch * n + i] * f2[ch * n + j];
            w[i * n + j] = std::exp(dot);
            denom += w[i * n + j];
        }
        for (int j = 0; j < n; ++j) w[i * n + j] /= denom;
    }
    return w;
}

AlfrParams make_params(int channels, int reduction, std::uint64_t seed) {
    Rng rng(seed);
    return AlfrParams::init(channels, reduction, rng);
}

}  // namespace

TEST_CASE("separate: zero weights give zero outputs") {
    AlfrParams p = make_params(4, 2, 1);
    for (auto& v : p.sep_v.weight.data()) v = 0.0;
    for (auto& v : p.sep_s.weight.data()) v = 0.0;
    Rng rng(2);
    Tensor f = Tensor::uniform({4, 3, 3}, rng, -2, 2);
    auto [fv, fs] = separate(f, p);
    for (double v : fv.data()) CHECK(v == 0.0);
    for (double v : fs.data()) CHECK(v == 0.0);
}

TEST_CASE("separate: identity transform + relu passes non-negative input through") {
    AlfrParams p = make_params(3, 3, 3);
    for (auto& v : p.sep_v.weight.data()) v = 0.0;
    for (int i = 0; i < 3; ++i) p.sep_v.weight.data()[i * 3 + i] = 1.0;
    Rng rng(4);
    Tensor f = Tensor::uniform({3, 2, 2}, rng, 0.0, 2.0);
    auto [fv, fs] = separate(f, p);
    for (std::size_t i = 0; i < f.data().size(); ++i) CHECK(fv.data()[i] == f.data()[i]);
}

TEST_CASE("separate: random case matches per-pixel matrix product oracle") {
    AlfrParams p = make_params(4, 2, 5);
    Rng rng(6);
    Tensor f = Tensor::uniform({4, 2, 3}, rng, -2, 2);
    auto [fv, fs] = separate(f, p);
    const auto& w = p.sep_v.weight.data();
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 3; ++x) {
            for (int co = 0; co < 4; ++co) {
                double acc = 0.0;
                for (int ci = 0; ci < 4; ++ci) acc += w[co * 4 + ci] * f.at({ci, y, x});
                acc = std::max(acc, 0.0);
                CHECK(fv.at({co, y, x}) == doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("self_reflect single position is [[1]]") {
    Tensor f1 = Tensor::from_data({2, 1}, {0.3, -1.2});
    Tensor f2 = Tensor::from_data({2, 1}, {0.9, 0.1});
    AttentionMap w = self_reflect(f1, f2);
    CHECK(w.weights.shape() == Shape{1, 1});
    CHECK(w.weights.item() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("self_reflect of zeros is uniform") {
    Tensor f1 = Tensor::zeros({2, 4});
    Rng rng(7);
    Tensor f2 = Tensor::uniform({2, 4}, rng, -2, 2);
    AttentionMap w = self_reflect(f1, f2);
    for (double v : w.weights.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("self_reflect matches brute-force softmax oracle") {
    Rng rng(8);
    Tensor f1 = Tensor::uniform({2, 3}, rng, -2, 2);
    Tensor f2 = Tensor::uniform({2, 3}, rng, -2, 2);
    AttentionMap w = self_reflect(f1, f2);
    const auto oracle = attention_oracle(f1.data(), f2.data(), 2, 3);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(std::abs(w.weights.data()[i] - oracle[i]) < 1e-12);
    }
    check_row_stochastic(w);
}

TEST_CASE("mutual_reflect with identical operands equals self_reflect") {
    Rng rng(9);
    Tensor f1 = Tensor::uniform({3, 4}, rng, -2, 2);
    Tensor f2 = Tensor::uniform({3, 4}, rng, -2, 2);
    AttentionMap a = self_reflect(f1, f2);
    AttentionMap b = mutual_reflect(f1, f2);
    for (std::size_t i = 0; i < a.weights.data().size(); ++i) {
        CHECK(a.weights.data()[i] == b.weights.data()[i]);
    }
}

TEST_CASE("combine blends and preserves stochasticity") {
    Rng rng(10);
    Tensor f1 = Tensor::uniform({2, 3}, rng, -2, 2);
    Tensor f2 = Tensor::uniform({2, 3}, rng, -2, 2);
    Tensor f3 = Tensor::uniform({2, 3}, rng, -2, 2);
    AttentionMap ws = self_reflect(f1, f2);
    AttentionMap wm = self_reflect(f3, f2);

    SUBCASE("mix_raw=0 averages") {
        AttentionMap w = combine(ws, wm, Tensor::scalar(0.0));
        for (std::size_t i = 0; i < w.weights.data().size(); ++i) {
            const double expect = 0.5 * (ws.weights.data()[i] + wm.weights.data()[i]);
            CHECK(w.weights.data()[i] == doctest::Approx(expect).epsilon(1e-14));
        }
        check_row_stochastic(w);
    }

    SUBCASE("equal maps are a fixed point for any mix") {
        for (double raw : {-3.0, 0.0, 1.7}) {
            AttentionMap w = combine(ws, ws, Tensor::scalar(raw));
            for (std::size_t i = 0; i < w.weights.data().size(); ++i) {
                CHECK(w.weights.data()[i] == doctest::Approx(ws.weights.data()[i]).epsilon(1e-14));
            }
        }
    }

    SUBCASE("mix_raw=+20 saturates to the self map") {
        AttentionMap w = combine(ws, wm, Tensor::scalar(20.0));
        for (std::size_t i = 0; i < w.weights.data().size(); ++i) {
            CHECK(std::abs(w.weights.data()[i] - ws.weights.data()[i]) < 1e-8);
        }
    }

    SUBCASE("shape mismatch") {
        AttentionMap tiny{Tensor::zeros({2, 2})};
        CHECK_THROWS_AS(combine(ws, tiny, Tensor::scalar(0.0)), DimensionError);
    }
}

TEST_CASE("warp_and_residual") {
    AlfrParams p = make_params(3, 3, 11);
    Rng rng(12);
    Tensor f = Tensor::uniform({3, 2, 2}, rng, -2, 2);

    SUBCASE("res=0 returns the input exactly") {
        AttentionMap w = {softmax(Tensor::uniform({4, 4}, rng, -1, 1), 1)};
        Tensor out = warp_and_residual(f, w, p.value_v, Tensor::scalar(0.0));
        for (std::size_t i = 0; i < f.data().size(); ++i) CHECK(out.data()[i] == f.data()[i]);
    }

    SUBCASE("identity attention adds res * value(f)") {
        std::vector<double> eye(16, 0.0);
        for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
        AttentionMap w = {Tensor::from_data({4, 4}, eye)};
        const double res = 0.7;
        Tensor out = warp_and_residual(f, w, p.value_v, Tensor::scalar(res));
        Tensor values = p.value_v.apply_map(f);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 2; ++y)
                for (int x = 0; x < 2; ++x) {
                    const double expect = f.at({c, y, x}) + res * values.at({c, y, x});
                    CHECK(out.at({c, y, x}) == doctest::Approx(expect).epsilon(1e-12));
                }
    }

    SUBCASE("random case matches explicit summation oracle") {
        AttentionMap w = {softmax(Tensor::uniform({4, 4}, rng, -1, 1), 1)};
        const double res = -0.4;
        Tensor out = warp_and_residual(f, w, p.value_v, Tensor::scalar(res));
        Tensor values = p.value_v.apply_map(f);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 4; ++i) {
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    acc += values.at({c, j / 2, j % 2}) * w.weights.at({i, j});
                }
                const double expect = f.at({c, i / 2, i % 2}) + res * acc;
                CHECK(out.at({c, i / 2, i % 2}) == doctest::Approx(expect).epsilon(1e-11));
            }
    }
}

TEST_CASE("alfr_forward disabled block is the identity") {
    AlfrParams p = make_params(4, 2, 13);
    // residual scalars are zero-initialized
    Rng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor f = Tensor::uniform({4, 2, 3}, rng, -2, 2);
        StreamOutputs out = alfr_forward(f, p, FlowMode::none);
        for (std::size_t i = 0; i < f.data().size(); ++i) {
            CHECK(out.f_star_v.data()[i] == f.data()[i]);
            CHECK(out.f_star_s.data()[i] == f.data()[i]);
        }
    }
}

TEST_CASE("alfr_forward matches a step-by-step composition oracle") {
    AlfrParams p = make_params(4, 2, 15);
    p.res_v.data()[0] = 0.3;
    p.res_s.data()[0] = -0.2;
    p.mix_v_raw.data()[0] = 0.4;
    p.mix_s_raw.data()[0] = -0.7;
    Rng rng(16);
    Tensor f = Tensor::uniform({4, 2, 2}, rng, -2, 2);

    StreamOutputs out = alfr_forward(f, p, FlowMode::both);

    // relu(1x1) oracles, then attention oracles, then the warp by hand
    auto [f_v, f_s] = separate(f, p);
    auto to_flat = [](const Tensor& t) { return reshape(t, {2, 4}); };
    Tensor fv1 = to_flat(p.proj_v1.apply_map(f_v));
    Tensor fv2 = to_flat(p.proj_v2.apply_map(f_v));
    Tensor fs1 = to_flat(p.proj_s1.apply_map(f_s));
    Tensor fs2 = to_flat(p.proj_s2.apply_map(f_s));

    auto w_vs = attention_oracle(fv1.data(), fv2.data(), 2, 4);
    auto w_vm = attention_oracle(fs1.data(), fv2.data(), 2, 4);
    auto w_ss = attention_oracle(fs1.data(), fs2.data(), 2, 4);
    auto w_sm = attention_oracle(fv1.data(), fs2.data(), 2, 4);

    const double lam_v = 1.0 / (1.0 + std::exp(-0.4));
    const double lam_s = 1.0 / (1.0 + std::exp(0.7));
    std::vector<double> w_v(16), w_s(16);
    for (int i = 0; i < 16; ++i) {
        w_v[i] = lam_v * w_vs[i] + (1 - lam_v) * w_vm[i];
        w_s[i] = lam_s * w_ss[i] + (1 - lam_s) * w_sm[i];
    }
    for (int i = 0; i < 16; ++i) {
        CHECK(out.w_v.weights.data()[i] == doctest::Approx(w_v[i]).epsilon(1e-12));
        CHECK(out.w_s.weights.data()[i] == doctest::Approx(w_s[i]).epsilon(1e-12));
    }

    Tensor val_v = p.value_v.apply_map(f);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 4; ++i) {
            double acc = 0.0;
            for (int j = 0; j < 4; ++j) acc += val_v.at({c, j / 2, j % 2}) * w_v[i * 4 + j];
            const double expect = f.at({c, i / 2, i % 2}) + 0.3 * acc;
            CHECK(out.f_star_v.at({c, i / 2, i % 2}) == doctest::Approx(expect).epsilon(1e-11));
        }
}

TEST_CASE("alfr_forward preserves shape") {
    Rng rng(17);
    for (int channels : {8, 16}) {
        AlfrParams p = AlfrParams::init(channels, 4, rng);
        for (auto [h, w] : {std::pair{4, 4}, std::pair{3, 5}}) {
            Tensor f = Tensor::uniform({channels, h, w}, rng, -2, 2);
            StreamOutputs out = alfr_forward(f, p, FlowMode::both);
            CHECK(out.f_star_v.shape() == Shape{channels, h, w});
            CHECK(out.f_star_s.shape() == Shape{channels, h, w});
        }
    }
}

TEST_CASE("attention maps are row-stochastic across flows and sizes") {
    Rng rng(18);
    const FlowMode flows[4] = {FlowMode::both, FlowMode::app_to_loc, FlowMode::loc_to_app,
                               FlowMode::none};
    for (int trial = 0; trial < 60; ++trial) {
        const int channels = trial % 2 == 0 ? 8 : 16;
        AlfrParams p = AlfrParams::init(channels, trial % 3 == 0 ? 2 : 4, rng);
        p.mix_v_raw.data()[0] = rng.uniform(-2, 2);
        p.mix_s_raw.data()[0] = rng.uniform(-2, 2);
        Tensor f = Tensor::uniform({channels, 3, 3}, rng, -3, 3);
        StreamOutputs out = alfr_forward(f, p, flows[trial % 4]);
        check_row_stochastic(out.w_v);
        check_row_stochastic(out.w_s);
    }
}

TEST_CASE("identity at init holds bitwise regardless of other weights") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        AlfrParams p = AlfrParams::init(8, 2, rng);
        p.mix_v_raw.data()[0] = rng.uniform(-3, 3);
        p.mix_s_raw.data()[0] = rng.uniform(-3, 3);
        Tensor f = Tensor::uniform({8, 2, 2}, rng, -2, 2);
        StreamOutputs out = alfr_forward(f, p, FlowMode::both);
        for (std::size_t i = 0; i < f.data().size(); ++i) {
            CHECK(out.f_star_v.data()[i] == f.data()[i]);
            CHECK(out.f_star_s.data()[i] == f.data()[i]);
        }
    }
}

TEST_CASE("gradients reach every parameter once the residual is live") {
    Rng rng(20);
    AlfrParams p = AlfrParams::init(4, 2, rng);
    p.res_v.data()[0] = 0.1;
    p.res_s.data()[0] = 0.1;
    ParameterSet params;
    p.collect(params, "alfr");
    Tensor f = Tensor::uniform({4, 2, 2}, rng, -2, 2);
    StreamOutputs out = alfr_forward(f, p, FlowMode::both);
    Tensor loss = add(sum_all(mul(out.f_star_v, out.f_star_v)),
                      sum_all(mul(out.f_star_s, out.f_star_s)));
    loss.backward();
    for (const auto& param : params.items()) {
        CAPTURE(param.name);
        REQUIRE(param.value.has_grad());
        double norm = 0.0;
        for (double g : param.value.grad()) norm += std::abs(g);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("warp is equivariant to spatial permutation") {
    Rng rng(21);
    AlfrParams p = make_params(3, 3, 22);
    Tensor f = Tensor::uniform({3, 2, 2}, rng, -2, 2);
    AttentionMap w = {softmax(Tensor::uniform({4, 4}, rng, -1, 1), 1)};
    Tensor res = Tensor::scalar(0.5);
    Tensor base = warp_and_residual(f, w, p.value_v, res);

    const int perm[4] = {2, 0, 3, 1};
    // permute spatial positions of f
    std::vector<double> fp(f.data().size());
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < 4; ++j) {
            fp[c * 4 + perm[j]] = f.data()[c * 4 + j];
        }
    // conjugate the attention by the same permutation
    std::vector<double> wp(16);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) wp[perm[i] * 4 + perm[j]] = w.weights.data()[i * 4 + j];

    Tensor out = warp_and_residual(Tensor::from_data({3, 2, 2}, fp),
                                   {Tensor::from_data({4, 4}, wp)}, p.value_v, res);
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < 4; ++j) {
            CHECK(out.data()[c * 4 + perm[j]] == doctest::Approx(base.data()[c * 4 + j]).epsilon(1e-11));
        }
}

TEST_CASE("flow=both with blend forced to 1 reproduces flow=none bitwise") {
    Rng rng(23);
    AlfrParams p = AlfrParams::init(8, 4, rng);
    p.res_v.data()[0] = 0.4;
    p.res_s.data()[0] = 0.2;
    // sigmoid(40) rounds to exactly 1.0 in doubles
    p.mix_v_raw.data()[0] = 40.0;
    p.mix_s_raw.data()[0] = 40.0;
    Tensor f = Tensor::uniform({8, 3, 3}, rng, -2, 2);
    StreamOutputs with_mutual = alfr_forward(f, p, FlowMode::both);
    StreamOutputs self_only = alfr_forward(f, p, FlowMode::none);
    for (std::size_t i = 0; i < f.data().size(); ++i) {
        CHECK(with_mutual.f_star_v.data()[i] == self_only.f_star_v.data()[i]);
        CHECK(with_mutual.f_star_s.data()[i] == self_only.f_star_s.data()[i]);
    }
}

TEST_CASE("alfr_forward gradient agrees with finite differences") {
    Rng rng(24);
    AlfrParams p = AlfrParams::init(4, 2, rng);
    p.res_v.data()[0] = 0.2;
    p.res_s.data()[0] = 0.1;
    Tensor f = Tensor::uniform({4, 2, 2}, rng, -2, 2, true);
    Rng wrng(25);
    std::vector<double> w1(16), w2(16);
    for (auto& v : w1) v = wrng.uniform(-1, 1);
    for (auto& v : w2) v = wrng.uniform(-1, 1);
    auto loss_fn = [&](const Tensor& x) {
        StreamOutputs out = alfr_forward(x, p, FlowMode::both);
        Tensor a = sum_all(mul(out.f_star_v, Tensor::from_data({4, 2, 2}, w1)));
        Tensor b = sum_all(mul(out.f_star_s, Tensor::from_data({4, 2, 2}, w2)));
        return add(a, b);
    };
    Tensor loss = loss_fn(f);
    loss.backward();
    Tensor fd = finite_difference_grad([&](const Tensor& x) { return loss_fn(x).item(); }, f, 1e-4);
    for (std::size_t i = 0; i < f.grad().size(); ++i) {
        const double a = f.grad()[i], e = fd.data()[i];
        const double diff = std::abs(a - e);
        if (diff >= 1e-6) CHECK(diff / std::max(std::abs(a), std::abs(e)) < 1e-4);
    }
}
