#include "dfr/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "dfr/alfr.hpp"
#include "dfr/dit.hpp"
#include "dfr/losses.hpp"
#include "dfr/tensor.hpp"

namespace dfr {

namespace {

constexpr double kStep = 1e-4;
constexpr double kRelTol = 1e-4;
constexpr double kAbsFloor = 1e-6;

// Scalar loss = sum of out * fixed random weights, so every output element
// contributes to the gradient.
Tensor weighted_loss(const Tensor& out, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(out.numel()));
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return sum_all(mul(out, Tensor::from_data(out.shape(), std::move(w))));
}

struct Instance {
    // Tracked inputs to differentiate against, with a graph builder that
    // works on both the tracked originals and untracked FD probes.
    std::vector<Tensor> inputs;
    std::function<Tensor(const std::vector<Tensor>&)> loss;
};

double check_instance(const Instance& inst, bool corrupt) {
    Tensor loss = inst.loss(inst.inputs);
    loss.backward();
    double worst = 0.0;
    for (std::size_t i = 0; i < inst.inputs.size(); ++i) {
        std::vector<double> analytic = inst.inputs[i].grad();
        if (corrupt && i == 0 && !analytic.empty()) analytic[0] += 0.5;
        Tensor fd = finite_difference_grad(
            [&](const Tensor& probe) {
                std::vector<Tensor> probed = inst.inputs;
                probed[i] = probe;
                return inst.loss(probed).item();
            },
            inst.inputs[i], kStep);
        const auto& est = fd.data();
        for (std::size_t j = 0; j < analytic.size(); ++j) {
            const double diff = std::abs(analytic[j] - est[j]);
            if (diff < kAbsFloor) continue;
            const double denom = std::max(std::abs(analytic[j]), std::abs(est[j]));
            worst = std::max(worst, diff / std::max(denom, kAbsFloor));
        }
    }
    return worst;
}

Tensor rand_t(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
    return Tensor::uniform(std::move(shape), rng, lo, hi, true);
}

// Keep samples away from non-differentiable points so the finite-difference
// probe stays on one branch.
Tensor rand_away_from(Rng& rng, Shape shape, double kink, double margin) {
    auto t = Tensor::uniform(std::move(shape), rng, -2.0, 2.0, true);
    for (auto& v : t.data()) {
        if (std::abs(v - kink) < margin) v += (v >= kink ? margin : -margin);
    }
    return t;
}

using CaseFn = std::function<Instance(Rng&)>;

struct Case {
    std::string name;
    CaseFn make;
};

std::vector<Case> build_cases() {
    std::vector<Case> cases;
    auto register_case = [&](std::string name, CaseFn fn) {
        cases.push_back({std::move(name), std::move(fn)});
    };

    register_case("matmul", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {3, 4}), rand_t(rng, {4, 2})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(matmul(in[0], in[1]), local);
        };
        return inst;
    });
    register_case("transpose", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {3, 5})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(transpose2d(in[0]), local);
        };
        return inst;
    });
    register_case("reshape", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {2, 6})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(reshape(in[0], {3, 4}), local);
        };
        return inst;
    });
    register_case("softmax", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {4, 5})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(softmax(in[0], 1), local);
        };
        return inst;
    });
    register_case("add", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {2, 3}), rand_t(rng, {2, 3})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(add(in[0], in[1]), local);
        };
        return inst;
    });
    register_case("sub", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {2, 3}), rand_t(rng, {2, 3})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(sub(in[0], in[1]), local);
        };
        return inst;
    });
    register_case("mul", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {2, 3}), rand_t(rng, {2, 3})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(mul(in[0], in[1]), local);
        };
        return inst;
    });
    register_case("scale_by", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {1}), rand_t(rng, {3, 3})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(scale_by(in[0], in[1]), local);
        };
        return inst;
    });
    register_case("sigmoid", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {7})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(sigmoid(in[0]), local);
        };
        return inst;
    });
    register_case("exp", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {7})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(exp_elem(in[0]), local);
        };
        return inst;
    });
    register_case("log", [](Rng& rng) {
        Instance inst;
        inst.inputs = {Tensor::uniform({7}, rng, 0.1, 3.0, true)};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(log_elem(in[0]), local);
        };
        return inst;
    });
    register_case("relu", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_away_from(rng, {9}, 0.0, 0.05)};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(relu(in[0]), local);
        };
        return inst;
    });
    register_case("conv2d_k1", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {3, 4, 4}), rand_t(rng, {2, 3, 1, 1}), rand_t(rng, {2})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(conv2d(in[0], in[1], in[2], Padding::same), local);
        };
        return inst;
    });
    register_case("conv2d_k3", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {2, 5, 5}), rand_t(rng, {3, 2, 3, 3}), rand_t(rng, {3})};
        const Padding pad = rng.below(2) == 0 ? Padding::same : Padding::valid;
        Rng wrng(rng.next_u64());
        inst.loss = [wrng, pad](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(conv2d(in[0], in[1], in[2], pad), local);
        };
        return inst;
    });
    register_case("global_avg_pool", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {3, 4, 5})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(global_avg_pool(in[0]), local);
        };
        return inst;
    });
    register_case("sum", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {3, 4})};
        inst.loss = [](const std::vector<Tensor>& in) { return sum_all(in[0]); };
        return inst;
    });
    register_case("slice", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {10})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(slice_flat(in[0], 2, 5), local);
        };
        return inst;
    });
    register_case("spatial_column", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {4, 3, 3})};
        const int row = static_cast<int>(rng.below(3));
        const int col = static_cast<int>(rng.below(3));
        Rng wrng(rng.next_u64());
        inst.loss = [wrng, row, col](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(spatial_column(in[0], row, col), local);
        };
        return inst;
    });
    register_case("add_row_bias", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {3, 4}), rand_t(rng, {3})};
        Rng wrng(rng.next_u64());
        inst.loss = [wrng](const std::vector<Tensor>& in) mutable {
            Rng local = wrng;
            return weighted_loss(add_row_bias(in[0], in[1]), local);
        };
        return inst;
    });
    register_case("alfr_forward", [](Rng& rng) {
        Instance inst;
        const int c = 4, r = 2, hw = 2;
        Rng prng(rng.next_u64());
        AlfrParams params = AlfrParams::init(c, r, prng);
        // A live residual path so gradients reach the value transforms.
        params.res_v.data()[0] = 0.1;
        params.res_s.data()[0] = 0.1;
        inst.inputs = {rand_t(rng, {c, hw, hw})};
        for (Tensor t : {params.sep_v.weight, params.proj_v1.weight, params.value_v.weight,
                         params.mix_v_raw, params.res_s}) {
            inst.inputs.push_back(t);
        }
        Rng wrng(rng.next_u64());
        inst.loss = [wrng, params](const std::vector<Tensor>& in) mutable {
            AlfrParams p = params;
            p.sep_v.weight = in[1];
            p.proj_v1.weight = in[2];
            p.value_v.weight = in[3];
            p.mix_v_raw = in[4];
            p.res_s = in[5];
            StreamOutputs out = alfr_forward(in[0], p, FlowMode::both);
            Rng local = wrng;
            return add(weighted_loss(out.f_star_v, local), weighted_loss(out.f_star_s, local));
        };
        return inst;
    });
    register_case("trading_score", [](Rng& rng) {
        Instance inst;
        const int c = 6;
        Rng prng(rng.next_u64());
        TradingHead head = TradingHead::init(c, 2, prng);
        inst.inputs = {rand_t(rng, {c, 3, 3}), head.fc1.weight, head.fc2.weight, head.fc2.bias};
        inst.loss = [head](const std::vector<Tensor>& in) mutable {
            TradingHead h = head;
            h.fc1.weight = in[1];
            h.fc2.weight = in[2];
            h.fc2.bias = in[3];
            return trading_score(in[0], h);
        };
        return inst;
    });
    register_case("trading_loss", [](Rng& rng) {
        Instance inst;
        // raw score params in a range that keeps sigmoid well conditioned
        inst.inputs = {Tensor::uniform({1}, rng, -1.5, 1.5, true),
                       Tensor::uniform({1}, rng, -1.5, 1.5, true),
                       Tensor::uniform({1}, rng, 0.2, 3.0, true),
                       Tensor::uniform({1}, rng, 0.2, 3.0, true)};
        inst.loss = [](const std::vector<Tensor>& in) {
            TradingScores scores{sigmoid(in[0]), sigmoid(in[1])};
            return trading_loss(in[2], in[3], scores);
        };
        return inst;
    });
    register_case("smooth_l1", [](Rng& rng) {
        Instance inst;
        // residuals kept away from the quadratic/linear transition
        Tensor pred = rand_t(rng, {5});
        std::vector<double> target(5);
        for (std::size_t i = 0; i < target.size(); ++i) {
            double d = rng.uniform(-1.8, 1.8);
            if (std::abs(std::abs(d) - 1.0) < 0.05) d *= 0.9;
            target[i] = pred.data()[i] - d;
        }
        inst.inputs = {pred};
        inst.loss = [target](const std::vector<Tensor>& in) { return smooth_l1(in[0], target); };
        return inst;
    });
    register_case("category_loss", [](Rng& rng) {
        Instance inst;
        inst.inputs = {rand_t(rng, {5})};
        const int target = static_cast<int>(rng.below(5));
        inst.loss = [target](const std::vector<Tensor>& in) {
            return category_loss(in[0], target);
        };
        return inst;
    });
    register_case("box2d_iou_loss", [](Rng& rng) {
        Instance inst;
        // overlapping boxes with coordinates clear of the min/max switches
        const std::array<double, 4> target = {2.0, 2.0, 8.0, 8.0};
        std::vector<double> pred = {2.0 + rng.uniform(-1.0, -0.3), 2.0 + rng.uniform(0.3, 1.0),
                                    8.0 + rng.uniform(0.3, 1.0), 8.0 + rng.uniform(-1.0, -0.3)};
        inst.inputs = {Tensor::from_data({4}, std::move(pred), true)};
        inst.loss = [target](const std::vector<Tensor>& in) {
            return box2d_iou_loss(in[0], target);
        };
        return inst;
    });
    register_case("grouped_losses", [](Rng& rng) {
        Instance inst;
        AppearanceTarget app;
        app.category = static_cast<int>(rng.below(4));
        app.rot = rng.uniform(-1.0, 1.0);
        app.dims = {1.0 + rng.uniform(0, 0.5), 1.5 + rng.uniform(0, 0.5), 3.5 + rng.uniform(0, 0.5)};
        LocalizationTarget loc;
        loc.box2d = {4.0, 4.0, 11.0, 11.0};
        loc.center3d = {rng.uniform(-2, 2), rng.uniform(-2, 2), 20.0};
        ClusteringConfig cc;
        cc.rot_stream = rng.below(2) ? Stream::appearance : Stream::localization;
        cc.whl_stream = rng.below(2) ? Stream::appearance : Stream::localization;

        Tensor logits = rand_t(rng, {4});
        Tensor rot = Tensor::from_data({1}, {app.rot + rng.uniform(-0.6, 0.6)}, true);
        std::vector<double> dims(3), xyz(3), box(4);
        for (int i = 0; i < 3; ++i) dims[i] = app.dims[i] + rng.uniform(-0.5, 0.5);
        for (int i = 0; i < 3; ++i) xyz[i] = loc.center3d[i] + rng.uniform(-0.5, 0.5);
        box = {4.0 + rng.uniform(-1.0, -0.3), 4.0 + rng.uniform(0.3, 1.0),
               11.0 + rng.uniform(0.3, 1.0), 11.0 + rng.uniform(-1.0, -0.3)};
        inst.inputs = {logits, rot, Tensor::from_data({3}, dims, true),
                       Tensor::from_data({4}, box, true), Tensor::from_data({3}, xyz, true)};
        inst.loss = [app, loc, cc](const std::vector<Tensor>& in) {
            Predictions preds{in[0], in[1], in[2], in[3], in[4]};
            GroupedLoss gl = grouped_losses(preds, app, loc, cc);
            return add(gl.l_v, gl.l_s);
        };
        return inst;
    });
    return cases;
}

}  // namespace

std::vector<std::string> gradcheck_op_names() {
    std::vector<std::string> names;
    for (const auto& c : build_cases()) names.push_back(c.name);
    return names;
}

GradcheckReport run_gradcheck(std::uint64_t seed, int trials_per_op,
                              const std::string& corrupt_op) {
    GradcheckReport report;
    Rng rng(seed);
    for (const auto& c : build_cases()) {
        OpCheckResult res;
        res.op = c.name;
        const bool corrupt = c.name == corrupt_op;
        for (int t = 0; t < trials_per_op; ++t) {
            Instance inst = c.make(rng);
            res.worst_err = std::max(res.worst_err, check_instance(inst, corrupt));
        }
        res.pass = res.worst_err < kRelTol;
        report.all_pass = report.all_pass && res.pass;
        report.ops.push_back(std::move(res));
    }
    return report;
}

}  // namespace dfr
