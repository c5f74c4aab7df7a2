#include "pipeline/gradcheck_suite.hpp"

#include <cstdio>
#include <sstream>

#include "loss/losses.hpp"
#include "pipeline/model.hpp"

namespace cdrn {

double gradcheck_default_tol() {
#ifdef CDRN_REAL64
    return 1e-6;
#else
    return 1e-3;
#endif
}

namespace {

Tensor rand_t(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (real& v : t.mut()) v = static_cast<real>(rng.uniform(lo, hi));
    return t;
}

// Values bounded away from zero so kinked ops keep usable probes.
Tensor rand_signed(Shape shape, Rng& rng, double lo = 0.2, double hi = 1.2) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (real& v : t.mut())
        v = static_cast<real>(rng.uniform(lo, hi) * (rng.uniform() < 0.5 ? -1.0 : 1.0));
    return t;
}

Tensor weighted_mean(const Tensor& out, const Tensor& probe) { return mean(mul(out, probe)); }

struct Check {
    std::string name;
    std::function<GradCheckReport(std::uint64_t seed, const GradCheckOptions&)> run;
};

GradCheckOptions make_opts(double tol, std::uint64_t seed, double step_mult, int max_probes) {
    GradCheckOptions o;
    o.tol = tol;
    o.seed = seed;
    o.step = default_fd_step() * step_mult;
    o.max_probes = max_probes;
    return o;
}

std::vector<Check> build_checks() {
    std::vector<Check> checks;
    auto add_check = [&](const std::string& name, auto fn) {
        checks.push_back({name, fn});
    };

    // ---- elementwise and shape operations ----
    add_check("op.add", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor a = rand_t({2, 3, 4}, rng), b = rand_t({2, 3, 4}, rng), p = rand_t({2, 3, 4}, rng, 0.5, 1.5);
        return grad_check("op.add", [&](const std::vector<Tensor>& in) {
            return weighted_mean(add(in[0], in[1]), p);
        }, {a, b}, o);
    });
    add_check("op.sub", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor a = rand_t({2, 3, 4}, rng), b = rand_t({2, 3, 4}, rng), p = rand_t({2, 3, 4}, rng, 0.5, 1.5);
        return grad_check("op.sub", [&](const std::vector<Tensor>& in) {
            return weighted_mean(sub(in[0], in[1]), p);
        }, {a, b}, o);
    });
    add_check("op.mul", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor a = rand_t({2, 3, 4}, rng), b = rand_t({2, 3, 4}, rng), p = rand_t({2, 3, 4}, rng, 0.5, 1.5);
        return grad_check("op.mul", [&](const std::vector<Tensor>& in) {
            return weighted_mean(mul(in[0], in[1]), p);
        }, {a, b}, o);
    });
    add_check("op.div", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor a = rand_t({3, 5}, rng), b = rand_t({3, 5}, rng, 0.5, 1.5), p = rand_t({3, 5}, rng, 0.5, 1.5);
        return grad_check("op.div", [&](const std::vector<Tensor>& in) {
            return weighted_mean(div(in[0], in[1]), p);
        }, {a, b}, o);
    });
    add_check("op.minimum", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor a = rand_signed({4, 6}, rng), b = rand_signed({4, 6}, rng), p = rand_t({4, 6}, rng, 0.5, 1.5);
        return grad_check("op.minimum", [&](const std::vector<Tensor>& in) {
            return weighted_mean(minimum(in[0], in[1]), p);
        }, {a, b}, o);
    });
    add_check("op.maximum", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor a = rand_signed({4, 6}, rng), b = rand_signed({4, 6}, rng), p = rand_t({4, 6}, rng, 0.5, 1.5);
        return grad_check("op.maximum", [&](const std::vector<Tensor>& in) {
            return weighted_mean(maximum(in[0], in[1]), p);
        }, {a, b}, o);
    });
    add_check("op.scale_affine", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({3, 4}, rng), p = rand_t({3, 4}, rng, 0.5, 1.5);
        return grad_check("op.scale_affine", [&](const std::vector<Tensor>& in) {
            return weighted_mean(add_scalar(scale(in[0], real(1.7)), real(-0.3)), p);
        }, {x}, o);
    });
    add_check("op.clamp", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({4, 8}, rng, -2.0, 2.0), p = rand_t({4, 8}, rng, 0.5, 1.5);
        return grad_check("op.clamp", [&](const std::vector<Tensor>& in) {
            return weighted_mean(clamp(in[0], -1, 1), p);
        }, {x}, o);
    });
    add_check("op.relu", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_signed({4, 8}, rng), p = rand_t({4, 8}, rng, 0.5, 1.5);
        return grad_check("op.relu", [&](const std::vector<Tensor>& in) {
            return weighted_mean(relu(in[0]), p);
        }, {x}, o);
    });
    add_check("op.leaky_relu", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_signed({4, 8}, rng), p = rand_t({4, 8}, rng, 0.5, 1.5);
        return grad_check("op.leaky_relu", [&](const std::vector<Tensor>& in) {
            return weighted_mean(leaky_relu(in[0]), p);
        }, {x}, o);
    });
    add_check("op.sigmoid", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({4, 8}, rng, -3.0, 3.0), p = rand_t({4, 8}, rng, 0.5, 1.5);
        return grad_check("op.sigmoid", [&](const std::vector<Tensor>& in) {
            return weighted_mean(sigmoid(in[0]), p);
        }, {x}, o);
    });
    add_check("op.softplus", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({4, 8}, rng, -3.0, 3.0), p = rand_t({4, 8}, rng, 0.5, 1.5);
        return grad_check("op.softplus", [&](const std::vector<Tensor>& in) {
            return weighted_mean(softplus(in[0]), p);
        }, {x}, o);
    });
    add_check("op.exp", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({4, 6}, rng, -1.0, 1.0), p = rand_t({4, 6}, rng, 0.5, 1.5);
        return grad_check("op.exp", [&](const std::vector<Tensor>& in) {
            return weighted_mean(exp_op(in[0]), p);
        }, {x}, o);
    });
    add_check("op.log", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({4, 6}, rng, 0.3, 2.0), p = rand_t({4, 6}, rng, 0.5, 1.5);
        return grad_check("op.log", [&](const std::vector<Tensor>& in) {
            return weighted_mean(log_op(in[0]), p);
        }, {x}, o);
    });
    add_check("op.sqrt", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({4, 6}, rng, 0.3, 2.0), p = rand_t({4, 6}, rng, 0.5, 1.5);
        return grad_check("op.sqrt", [&](const std::vector<Tensor>& in) {
            return weighted_mean(sqrt_op(in[0]), p);
        }, {x}, o);
    });
    add_check("op.pow", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({4, 6}, rng, 0.3, 1.5), p = rand_t({4, 6}, rng, 0.5, 1.5);
        return grad_check("op.pow", [&](const std::vector<Tensor>& in) {
            return weighted_mean(pow_scalar(in[0], real(1.7)), p);
        }, {x}, o);
    });
    add_check("op.softmax", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 4, 3}, rng, -2.0, 2.0), p = rand_t({1, 4, 3}, rng, 0.5, 1.5);
        return grad_check("op.softmax", [&](const std::vector<Tensor>& in) {
            return weighted_mean(softmax_axis(in[0], 1), p);
        }, {x}, o);
    });
    add_check("op.concat_split", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 6, 3, 3}, rng), p = rand_t({1, 6, 3, 3}, rng, 0.5, 1.5);
        return grad_check("op.concat_split", [&](const std::vector<Tensor>& in) {
            auto parts = split(in[0], 1, 3);
            return weighted_mean(concat({parts[2], parts[0], parts[1]}, 1), p);
        }, {x}, o);
    });
    add_check("op.reshape", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({2, 6}, rng), p = rand_t({3, 4}, rng, 0.5, 1.5);
        return grad_check("op.reshape", [&](const std::vector<Tensor>& in) {
            return weighted_mean(reshape(in[0], {3, 4}), p);
        }, {x}, o);
    });
    add_check("op.sum_mean_mse", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor a = rand_t({3, 4}, rng), b = rand_t({3, 4}, rng);
        return grad_check("op.sum_mean_mse", [&](const std::vector<Tensor>& in) {
            Tensor t = add(scale(sum(in[0]), real(0.01)), mean(in[0]));
            return add(t, mse(in[0], in[1]));
        }, {a, b}, o);
    });
    add_check("op.global_avg_pool", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({2, 3, 4, 4}, rng), p = rand_t({2, 3, 1, 1}, rng, 0.5, 1.5);
        return grad_check("op.global_avg_pool", [&](const std::vector<Tensor>& in) {
            return weighted_mean(global_avg_pool(in[0]), p);
        }, {x}, o);
    });
    add_check("op.upsample_nearest2", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 3, 3, 4}, rng), p = rand_t({1, 3, 6, 8}, rng, 0.5, 1.5);
        return grad_check("op.upsample_nearest2", [&](const std::vector<Tensor>& in) {
            return weighted_mean(upsample_nearest2(in[0]), p);
        }, {x}, o);
    });
    add_check("op.linear", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({3, 4}, rng), w = rand_t({5, 4}, rng), b = rand_t({5}, rng, -0.3, 0.3);
        Tensor p = rand_t({3, 5}, rng, 0.5, 1.5);
        return grad_check("op.linear", [&](const std::vector<Tensor>& in) {
            return weighted_mean(linear(in[0], in[1], in[2]), p);
        }, {x, w, b}, o);
    });
    add_check("op.scale_channels", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({2, 3, 3, 3}, rng), w = rand_t({2, 3}, rng, 0.3, 1.5);
        Tensor p = rand_t({2, 3, 3, 3}, rng, 0.5, 1.5);
        return grad_check("op.scale_channels", [&](const std::vector<Tensor>& in) {
            return weighted_mean(scale_channels(in[0], in[1]), p);
        }, {x, w}, o);
    });
    add_check("op.scale_by", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({2, 3, 3, 3}, rng), w = rand_t({1}, rng, 0.3, 1.5);
        Tensor p = rand_t({2, 3, 3, 3}, rng, 0.5, 1.5);
        return grad_check("op.scale_by", [&](const std::vector<Tensor>& in) {
            return weighted_mean(scale_by(in[0], in[1]), p);
        }, {x, w}, o);
    });
    add_check("op.filter2d_depthwise", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 2, 8, 8}, rng);
        Tensor k = gaussian_window(5, 1.2);
        Tensor p = rand_t({1, 2, 4, 4}, rng, 0.5, 1.5);
        return grad_check("op.filter2d_depthwise", [&](const std::vector<Tensor>& in) {
            return weighted_mean(filter2d_depthwise_valid(in[0], k), p);
        }, {x}, o);
    });
    add_check("op.conv2d", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 2, 5, 5}, rng), w = rand_t({3, 2, 3, 3}, rng, -0.5, 0.5);
        Tensor b = rand_t({3}, rng, -0.2, 0.2), p = rand_t({1, 3, 5, 5}, rng, 0.5, 1.5);
        return grad_check("op.conv2d", [&](const std::vector<Tensor>& in) {
            return weighted_mean(conv2d(in[0], in[1], in[2], 1, 1), p);
        }, {x, w, b}, o);
    });
    add_check("op.conv2d_strided", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 2, 6, 6}, rng), w = rand_t({3, 2, 3, 3}, rng, -0.5, 0.5);
        Tensor b = rand_t({3}, rng, -0.2, 0.2), p = rand_t({1, 3, 3, 3}, rng, 0.5, 1.5);
        return grad_check("op.conv2d_strided", [&](const std::vector<Tensor>& in) {
            return weighted_mean(conv2d(in[0], in[1], in[2], 2, 1), p);
        }, {x, w, b}, o);
    });
    add_check("op.conv_transpose2d", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 2, 3, 3}, rng), w = rand_t({2, 3, 2, 2}, rng, -0.5, 0.5);
        Tensor b = rand_t({3}, rng, -0.2, 0.2), p = rand_t({1, 3, 6, 6}, rng, 0.5, 1.5);
        return grad_check("op.conv_transpose2d", [&](const std::vector<Tensor>& in) {
            return weighted_mean(conv_transpose2d(in[0], in[1], in[2]), p);
        }, {x, w, b}, o);
    });
    add_check("op.instance_norm", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 2, 5, 5}, rng), g = rand_t({2}, rng, 0.5, 1.5);
        Tensor b = rand_t({2}, rng, -0.3, 0.3), p = rand_t({1, 2, 5, 5}, rng, 0.5, 1.5);
        return grad_check("op.instance_norm", [&](const std::vector<Tensor>& in) {
            return weighted_mean(instance_norm(in[0], in[1], in[2]), p);
        }, {x, g, b}, o);
    });

    // ---- network blocks ----
    add_check("block.hin", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        HinBlock blk(ps, "hin", 4, 4, rng);
        for (real& v : blk.conv2.w.mut()) v = static_cast<real>(rng.uniform(-0.3, 0.3));
        Tensor x = rand_t({1, 4, 5, 5}, rng);
        Tensor p = rand_t({1, 4, 5, 5}, rng, 0.5, 1.5);
        std::vector<Tensor> leaves{x};
        for (const auto& e : ps.entries()) leaves.push_back(e.tensor);
        return grad_check_inplace("block.hin", [&]() { return weighted_mean(blk.forward(x), p); },
                                  leaves, o);
    });
    add_check("block.sar", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        SarBlock blk(ps, "sar", SarConfig{8, 2, 2, 4}, rng);
        for (real& v : blk.pre.w.mut()) v = static_cast<real>(rng.uniform(-0.3, 0.3));
        Tensor x = rand_t({1, 8, 4, 4}, rng);
        Tensor p = rand_t({1, 8, 4, 4}, rng, 0.5, 1.5);
        std::vector<Tensor> leaves{x};
        for (const auto& e : ps.entries()) leaves.push_back(e.tensor);
        return grad_check_inplace("block.sar", [&]() { return weighted_mean(blk.forward(x), p); },
                                  leaves, o);
    });
    add_check("block.sam", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        Sam sam(ps, "sam", 4, rng);
        for (real& v : sam.to_image.w.mut()) v = static_cast<real>(rng.uniform(-0.3, 0.3));
        Tensor feat = rand_t({1, 4, 4, 4}, rng);
        Tensor img = rand_t({1, 3, 4, 4}, rng, 0.0, 1.0);
        Tensor p1 = rand_t({1, 3, 4, 4}, rng, 0.5, 1.5);
        Tensor p2 = rand_t({1, 4, 4, 4}, rng, 0.5, 1.5);
        std::vector<Tensor> leaves{feat, img};
        for (const auto& e : ps.entries()) leaves.push_back(e.tensor);
        return grad_check_inplace("block.sam", [&]() {
            auto [restored, gated] = sam.forward(feat, img);
            return add(weighted_mean(restored, p1), weighted_mean(gated, p2));
        }, leaves, o);
    });
    add_check("block.csff", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        Csff csff(ps, "csff", {4, 8}, rng);
        Tensor e0 = rand_t({1, 4, 4, 4}, rng), d0 = rand_t({1, 4, 4, 4}, rng);
        Tensor e1 = rand_t({1, 8, 2, 2}, rng), d1 = rand_t({1, 8, 2, 2}, rng);
        Tensor p0 = rand_t({1, 4, 4, 4}, rng, 0.5, 1.5), p1 = rand_t({1, 8, 2, 2}, rng, 0.5, 1.5);
        std::vector<Tensor> leaves{e0, d0, e1, d1};
        for (const auto& e : ps.entries()) leaves.push_back(e.tensor);
        return grad_check_inplace("block.csff", [&]() {
            auto fused = csff.forward({e0, e1}, {d0, d1});
            return add(weighted_mean(fused[0], p0), weighted_mean(fused[1], p1));
        }, leaves, o);
    });
    add_check("block.residual_stage", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        BackboneBlock blk(ps, "blk", 4, 8, 2, rng);
        Tensor x = rand_t({1, 4, 6, 6}, rng);
        Tensor p = rand_t({1, 8, 3, 3}, rng, 0.5, 1.5);
        std::vector<Tensor> leaves{x};
        for (const auto& e : ps.entries()) leaves.push_back(e.tensor);
        return grad_check_inplace("block.residual_stage", [&]() {
            return weighted_mean(blk.forward(x), p);
        }, leaves, o);
    });
    add_check("block.fpn", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        Fpn fpn(ps, "fpn", 4, 8, rng);
        Tensor c3 = rand_t({1, 4, 8, 8}, rng), c4 = rand_t({1, 8, 4, 4}, rng),
               c5 = rand_t({1, 16, 2, 2}, rng);
        std::vector<Tensor> probes;
        std::vector<Shape> pshapes = {{1, 8, 8, 8}, {1, 8, 4, 4}, {1, 8, 2, 2}, {1, 8, 1, 1}, {1, 8, 1, 1}};
        for (auto& sh : pshapes) probes.push_back(rand_t(sh, rng, 0.5, 1.5));
        std::vector<Tensor> leaves{c3, c4, c5};
        for (const auto& e : ps.entries()) leaves.push_back(e.tensor);
        return grad_check_inplace("block.fpn", [&]() {
            auto p = fpn.forward({c3, c4, c5});
            Tensor loss = weighted_mean(p[0], probes[0]);
            for (int l = 1; l < 5; ++l)
                loss = add(loss, weighted_mean(p[static_cast<std::size_t>(l)], probes[static_cast<std::size_t>(l)]));
            return loss;
        }, leaves, o);
    });
    add_check("block.head", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        DetectorConfig cfg;
        cfg.num_classes = 2;
        cfg.fpn_channels = 8;
        cfg.tower_depth = 2;
        Head head(ps, "head", cfg, rng);
        Tensor x = rand_t({1, 8, 3, 3}, rng);
        Tensor pc = rand_t({1, 2, 3, 3}, rng, 0.5, 1.5);
        Tensor pr = rand_t({1, 4, 3, 3}, rng, 0.5, 1.5);
        Tensor pt = rand_t({1, 1, 3, 3}, rng, 0.5, 1.5);
        std::vector<Tensor> leaves{x};
        for (const auto& e : ps.entries()) leaves.push_back(e.tensor);
        return grad_check_inplace("block.head", [&]() {
            HeadOutput out = head.forward(x, 0, 8);
            Tensor loss = weighted_mean(out.cls, pc);
            loss = add(loss, scale(weighted_mean(out.ltrb, pr), real(0.05)));
            return add(loss, weighted_mean(out.ctr, pt));
        }, leaves, o);
    });

    // ---- losses ----
    add_check("loss.ssim", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor x = rand_t({1, 1, 13, 13}, rng, 0.1, 0.9), y = rand_t({1, 1, 13, 13}, rng, 0.1, 0.9);
        return grad_check("loss.ssim", [](const std::vector<Tensor>& in) {
            return ssim_map(in[0], in[1]).mean_value;
        }, {x, y}, o);
    });
    add_check("loss.derain_stage2", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor clean = rand_t({1, 1, 12, 12}, rng, 0.1, 0.9);
        Tensor out1 = rand_t({1, 1, 12, 12}, rng, 0.1, 0.9);
        Tensor out2 = rand_t({1, 1, 12, 12}, rng, 0.1, 0.9);
        return grad_check("loss.derain_stage2", [&](const std::vector<Tensor>& in) {
            return l_derain(2, clean, {in[0], in[1]});
        }, {out1, out2}, o);
    });
    add_check("loss.derain_stage3", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor clean = rand_t({1, 1, 12, 12}, rng, 0.1, 0.9);
        Tensor out = rand_t({1, 1, 12, 12}, rng, 0.1, 0.9);
        return grad_check("loss.derain_stage3", [&](const std::vector<Tensor>& in) {
            return l_derain(3, clean, {in[0]});
        }, {out}, o);
    });
    add_check("loss.focal", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor logits = rand_t({1, 2, 3, 3}, rng, -2.0, 2.0);
        Tensor targets = Tensor::zeros({1, 2, 3, 3});
        int npos = 0;
        {
            auto t = targets.mut();
            for (std::size_t i = 0; i < t.size(); ++i)
                if (rng.uniform() < 0.25) {
                    t[i] = 1;
                    ++npos;
                }
        }
        return grad_check("loss.focal", [&](const std::vector<Tensor>& in) {
            return focal_loss({in[0]}, {targets}, std::max(1, npos));
        }, {logits}, o);
    });
    add_check("loss.giou", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor pred = rand_t({1, 4, 2, 2}, rng, 2.0, 9.0);
        Tensor target = rand_t({1, 4, 2, 2}, rng, 2.0, 9.0);
        Tensor w = rand_t({1, 1, 2, 2}, rng, 0.3, 1.0);
        Tensor m = Tensor::full({1, 1, 2, 2}, 1);
        return grad_check("loss.giou", [&](const std::vector<Tensor>& in) {
            return giou_loss({in[0]}, {target}, {w}, {m});
        }, {pred}, o);
    });
    add_check("loss.centerness", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        Tensor logits = rand_t({1, 1, 3, 3}, rng, -2.0, 2.0);
        Tensor targets = rand_t({1, 1, 3, 3}, rng, 0.0, 1.0);
        Tensor mask = Tensor::full({1, 1, 3, 3}, 1);
        return grad_check("loss.centerness", [&](const std::vector<Tensor>& in) {
            return centerness_loss({in[0]}, {targets}, {mask}, 9);
        }, {logits}, o);
    });
    add_check("loss.feature_map", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        ParamSet ps;
        Backbone bb(ps, "bb", 4, rng);
        ps.set_requires_grad(false);
        Tensor clean = rand_t({1, 3, 32, 32}, rng, 0.0, 1.0);
        Tensor derained = rand_t({1, 3, 32, 32}, rng, 0.0, 1.0);
        auto ref = bb.forward(clean);
        for (auto& t : ref) t = t.detached();
        return grad_check("loss.feature_map", [&](const std::vector<Tensor>& in) {
            return feature_map_loss(ref, bb.forward(in[0]));
        }, {derained}, o);
    });
    add_check("loss.downstream_suite", [](std::uint64_t s, const GradCheckOptions& o) {
        Rng rng(s);
        DetectorConfig cfg;
        cfg.num_classes = 2;
        std::vector<LevelGrid> grids = {{8, 2, 2}, {16, 1, 1}, {32, 1, 1}, {64, 1, 1}, {128, 1, 1}};
        std::vector<std::vector<Annotation>> gts = {{{0, Box{2, 2, 14, 14}}, {1, Box{2, 2, 28, 28}}}};
        AssignedBatch targets = assign_batch(gts, grids, cfg);
        std::vector<Tensor> leaves;
        DetectorOutput out;
        for (const auto& g : grids) {
            HeadOutput ho;
            ho.cls = rand_t({1, 2, g.h, g.w}, rng, -2.0, 2.0);
            ho.ltrb = rand_t({1, 4, g.h, g.w}, rng, 2.0, 12.0);
            ho.ctr = rand_t({1, 1, g.h, g.w}, rng, -2.0, 2.0);
            leaves.push_back(ho.cls);
            leaves.push_back(ho.ltrb);
            leaves.push_back(ho.ctr);
            out.levels.push_back(ho);
        }
        return grad_check_inplace("loss.downstream_suite", [&]() {
            return downstream_focal_suite(out, targets).total;
        }, leaves, o);
    });

    return checks;
}

struct StepPolicy {
    double mult;
    int probes;
    double kink_reject;
};

StepPolicy policy_for(const std::string& name, double tol) {
    // Deep f32 chains need a larger step to clear quantization noise and a
    // smaller probe budget to stay within the runtime envelope. Chains with
    // relu-family kinks additionally get a tight mismatch threshold so that
    // sub-window kink mass cannot hide below the default one; the two-scale
    // test keeps their smooth-curvature samples alive.
    const double tight = std::max(tol * 0.5, 1e-4);
    if (name == "block.hin" || name == "block.sar" || name == "block.residual_stage" ||
        name == "block.head")
        return {4.0, 12, tight};
    if (name.rfind("block.", 0) == 0) return {4.0, 12, 0.2};
    if (name == "loss.feature_map") return {4.0, 16, tight};
    if (name == "loss.downstream_suite") return {4.0, 10, 0.2};
    if (name == "loss.ssim" || name.rfind("loss.derain", 0) == 0) return {4.0, 12, 0.2};
    if (name == "loss.focal" || name == "loss.centerness") return {4.0, 16, 0.2};
    if (name == "op.sigmoid" || name == "op.softplus" || name == "op.softmax" || name == "op.exp")
        return {4.0, 20, 0.2};
    return {1.0, 20, 0.2};
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(const SuiteOptions& opts) {
    const double tol = opts.tol > 0 ? opts.tol : gradcheck_default_tol();
    std::vector<GradCheckReport> out;
    for (const Check& check : build_checks()) {
        const StepPolicy pol = policy_for(check.name, tol);
        GradCheckReport worst;
        worst.name = check.name;
        for (int s = 0; s < opts.seeds; ++s) {
            const std::uint64_t seed = derive_seed(opts.base_seed, check.name) + static_cast<std::uint64_t>(s);
            GradCheckOptions o = make_opts(tol, seed, pol.mult, pol.probes);
            o.kink_reject = pol.kink_reject;
            GradCheckReport rep = check.run(seed, o);
            worst.probes += rep.probes;
            worst.skipped += rep.skipped;
            if (rep.max_rel_err > worst.max_rel_err) worst.max_rel_err = rep.max_rel_err;
            if (rep.detail == "loss is not scalar" && worst.detail.empty()) worst.detail = rep.detail;
        }
        // A single seed may have every probe land on a kink; coverage is
        // judged over the whole seed sweep.
        worst.pass = worst.detail.empty() && worst.probes >= 12 && worst.max_rel_err < tol;
        if (worst.probes < 12 && worst.detail.empty()) worst.detail = "insufficient usable probes";
        out.push_back(std::move(worst));
    }
    return out;
}

bool gradcheck_suite_passed(const std::vector<GradCheckReport>& reports) {
    for (const auto& r : reports)
        if (!r.pass) return false;
    return !reports.empty();
}

std::string render_gradcheck_reports(const std::vector<GradCheckReport>& reports) {
    std::ostringstream os;
    for (const auto& r : reports) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-26s %s  max_rel_err=%.3e  probes=%d skipped=%d %s\n",
                      r.name.c_str(), r.pass ? "PASS" : "FAIL", r.max_rel_err, r.probes, r.skipped,
                      r.detail.c_str());
        os << buf;
    }
    return os.str();
}

}  // namespace cdrn
