#include "nn/derain_net.hpp"

namespace cdrn {

void DerainConfig::validate() const {
    if (depth < 2) fail("derain config: depth must be >= 2");
    if (base_channels < 2 || base_channels % 2 != 0)
        fail("derain config: base_channels must be even and positive");
    if (use_sar) {
        SarConfig sc{base_channels, sar_cardinal, sar_splits, sar_reduction};
        sc.validate();
    }
}

std::vector<int> DerainConfig::level_channels() const {
    std::vector<int> ch;
    for (int l = 0; l < depth; ++l) ch.push_back(base_channels << l);
    return ch;
}

UnetStage::UnetStage(ParamSet& ps, const std::string& name, const DerainConfig& cfg, Rng& rng) {
    const auto ch = cfg.level_channels();
    for (int l = 0; l < cfg.depth; ++l) {
        const std::string lvl = name + ".enc" + std::to_string(l);
        enc_block.emplace_back(ps, lvl, ch[static_cast<std::size_t>(l)],
                               ch[static_cast<std::size_t>(l)], rng);
        if (l + 1 < cfg.depth)
            down.emplace_back(ps, name + ".down" + std::to_string(l), ch[static_cast<std::size_t>(l)],
                              ch[static_cast<std::size_t>(l) + 1], 3, 2, 1, rng);
    }
    for (int l = 0; l < cfg.depth; ++l) {
        DecoderBlock blk;
        const std::string lvl = name + ".dec" + std::to_string(l);
        if (cfg.use_sar) {
            SarConfig sc{ch[static_cast<std::size_t>(l)], cfg.sar_cardinal, cfg.sar_splits,
                         cfg.sar_reduction};
            blk.sar.emplace(ps, lvl, sc, rng);
        } else {
            blk.plain.emplace(ps, lvl, ch[static_cast<std::size_t>(l)], rng);
        }
        dec_block.push_back(std::move(blk));
        if (l + 1 < cfg.depth) {
            up.emplace_back(ps, name + ".up" + std::to_string(l),
                            ch[static_cast<std::size_t>(l) + 1], ch[static_cast<std::size_t>(l)],
                            rng);
            fuse.emplace_back(ps, name + ".fuse" + std::to_string(l),
                              2 * ch[static_cast<std::size_t>(l)], ch[static_cast<std::size_t>(l)],
                              1, 1, 0, rng);
        }
    }
}

UnetStage::Features UnetStage::forward(const Tensor& input,
                                       const std::vector<Tensor>* injections) const {
    const int depth = static_cast<int>(enc_block.size());
    Features f;
    Tensor t = input;
    for (int l = 0; l < depth; ++l) {
        if (injections) t = add(t, (*injections)[static_cast<std::size_t>(l)]);
        Tensor e = enc_block[static_cast<std::size_t>(l)].forward(t);
        f.enc.push_back(e);
        if (l + 1 < depth) t = down[static_cast<std::size_t>(l)].forward(e);
    }
    f.dec.resize(static_cast<std::size_t>(depth));
    f.dec[static_cast<std::size_t>(depth - 1)] =
        dec_block[static_cast<std::size_t>(depth - 1)].forward(f.enc[static_cast<std::size_t>(depth - 1)]);
    for (int l = depth - 2; l >= 0; --l) {
        Tensor u = up[static_cast<std::size_t>(l)].forward(f.dec[static_cast<std::size_t>(l) + 1]);
        Tensor m = fuse[static_cast<std::size_t>(l)].forward(
            concat({u, f.enc[static_cast<std::size_t>(l)]}, 1));
        f.dec[static_cast<std::size_t>(l)] = dec_block[static_cast<std::size_t>(l)].forward(m);
    }
    return f;
}

DerainNet::DerainNet(const DerainConfig& cfg, ParamSet& ps, const std::string& prefix, Rng& rng)
    : cfg_(cfg) {
    cfg_.validate();
    const int ch0 = cfg_.base_channels;
    conv_in1_ = Conv2dLayer(ps, prefix + ".in1", 3, ch0, 3, 1, 1, rng);
    stage1_ = UnetStage(ps, prefix + ".s1", cfg_, rng);
    sam_ = Sam(ps, prefix + ".sam", ch0, rng);
    csff_ = Csff(ps, prefix + ".csff", cfg_.level_channels(), rng);
    conv_in2_ = Conv2dLayer(ps, prefix + ".in2", 3, ch0, 3, 1, 1, rng);
    fuse_in_ = Conv2dLayer(ps, prefix + ".fuse_in", 2 * ch0, ch0, 1, 1, 0, rng);
    stage2_ = UnetStage(ps, prefix + ".s2", cfg_, rng);
    out_proj_ = Conv2dLayer(ps, prefix + ".out", ch0, 3, 1, 1, 0, rng);
    // Zero projection: the cascade starts as the identity over the rainy input.
    for (real& v : out_proj_.w.mut()) v = 0;
}

void DerainNet::check_input(const Tensor& rainy) const {
    if (rainy.ndim() != 4 || rainy.dim(1) != 3)
        fail("derain_forward: expected [N,3,H,W] input, got " + shape_str(rainy.shape()));
    const int div = cfg_.spatial_divisor();
    if (rainy.dim(2) % div != 0 || rainy.dim(3) % div != 0)
        fail("derain_forward: H and W must be divisible by " + std::to_string(div) +
             " at depth " + std::to_string(cfg_.depth) + "; pad the input to " +
             shape_str(rainy.shape()) + " accordingly");
}

Stage1Result DerainNet::stage1_forward(const Tensor& rainy) const {
    check_input(rainy);
    UnetStage::Features f = stage1_.forward(conv_in1_.forward(rainy), nullptr);
    auto [restored, gated] = sam_.forward(f.dec[0], rainy);
    return {restored, gated, std::move(f.enc), std::move(f.dec)};
}

Tensor DerainNet::stage2_forward(const Tensor& rainy, const Tensor& gated,
                                 const std::vector<Tensor>& enc1,
                                 const std::vector<Tensor>& dec1) const {
    check_input(rainy);
    std::vector<Tensor> inj = csff_.forward(enc1, dec1);
    Tensor f2 = fuse_in_.forward(concat({conv_in2_.forward(rainy), gated}, 1));
    UnetStage::Features f = stage2_.forward(f2, &inj);
    return add(out_proj_.forward(f.dec[0]), rainy);
}

std::pair<Tensor, Tensor> DerainNet::forward(const Tensor& rainy, bool training) const {
    Stage1Result s1 = stage1_forward(rainy);
    Tensor out2 = stage2_forward(rainy, s1.gated, s1.enc, s1.dec);
    Tensor out1 = s1.restored;
    if (!training) {
        out1 = clamp(out1, 0, 1);
        out2 = clamp(out2, 0, 1);
    }
    return {out1, out2};
}

namespace {
std::size_t conv_count(int cin, int cout, int k, bool bias = true) {
    return static_cast<std::size_t>(cout) * cin * k * k + (bias ? static_cast<std::size_t>(cout) : 0);
}

std::size_t hin_count(int cin, int cout) {
    return conv_count(cin, cout, 3) + static_cast<std::size_t>(cout) /* norm gamma+beta on half */ +
           conv_count(cout, cout, 3) + conv_count(cin, cout, 1);
}

std::size_t sar_count(const SarConfig& sc) {
    const int c = sc.channels;
    const int cw = sc.split_width();
    const int hidden = sc.hidden_width();
    std::size_t n = conv_count(c, sc.splits * c, 3);
    n += static_cast<std::size_t>(sc.cardinal) *
         (static_cast<std::size_t>(hidden) * cw + hidden +
          static_cast<std::size_t>(sc.splits) * cw * hidden + static_cast<std::size_t>(sc.splits) * cw);
    n += conv_count(c, c, 1);
    return n;
}

std::size_t plain_count(int c) {
    return 2 * conv_count(c, c, 3) + conv_count(c, c, 1);
}

std::size_t stage_count(const DerainConfig& cfg) {
    const auto ch = cfg.level_channels();
    std::size_t n = 0;
    for (int l = 0; l < cfg.depth; ++l) {
        const int c = ch[static_cast<std::size_t>(l)];
        n += hin_count(c, c);
        if (cfg.use_sar) {
            n += sar_count(SarConfig{c, cfg.sar_cardinal, cfg.sar_splits, cfg.sar_reduction});
        } else {
            n += plain_count(c);
        }
        if (l + 1 < cfg.depth) {
            const int cn = ch[static_cast<std::size_t>(l) + 1];
            n += conv_count(c, cn, 3);                                   // down
            n += static_cast<std::size_t>(cn) * c * 4 + static_cast<std::size_t>(c);  // up
            n += conv_count(2 * c, c, 1);                                // fuse
        }
    }
    return n;
}
}  // namespace

std::size_t derain_expected_param_count(const DerainConfig& cfg) {
    const int ch0 = cfg.base_channels;
    std::size_t n = 0;
    n += 2 * conv_count(3, ch0, 3);  // both stage input convs
    n += 2 * stage_count(cfg);
    n += conv_count(ch0, 3, 1) + conv_count(3, ch0, 1);  // SAM image/mask convs
    for (int c : cfg.level_channels()) n += 2 * static_cast<std::size_t>(c) * c;  // CSFF, bias-free
    n += conv_count(2 * ch0, ch0, 1);  // stage-2 input fusion
    n += conv_count(ch0, 3, 1);        // final projection
    return n;
}

}  // namespace cdrn
