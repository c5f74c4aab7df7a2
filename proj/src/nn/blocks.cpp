#include "nn/blocks.hpp"

#include <algorithm>

namespace cdrn {

HinBlock::HinBlock(ParamSet& ps, const std::string& name, int cin, int cout, Rng& rng)
    : out_channels(cout) {
    if (cout % 2 != 0)
        fail("hin_block '" + name + "': output channels must be even, got " + std::to_string(cout));
    conv1 = Conv2dLayer(ps, name + ".conv1", cin, cout, 3, 1, 1, rng);
    norm = InstanceNormLayer(ps, name + ".norm", cout / 2);
    conv2 = Conv2dLayer(ps, name + ".conv2", cout, cout, 3, 1, 1, rng);
    res = Conv2dLayer(ps, name + ".res", cin, cout, 1, 1, 0, rng);
    // The branch starts at zero so stacked blocks do not compound variance;
    // without a norm after the add, depth would otherwise blow activations
    // up exponentially.
    for (real& v : conv2.w.mut()) v = 0;
}

Tensor HinBlock::forward(const Tensor& x, HinBlockTrace* trace) const {
    Tensor h = conv1.forward(x);
    auto halves = split(h, 1, 2);
    Tensor normed = norm.forward(halves[0]);
    Tensor merged = concat({normed, halves[1]}, 1);
    if (trace) {
        trace->normed_half = normed;
        trace->raw_half = halves[1];
        trace->merged = merged;
    }
    Tensor out = conv2.forward(leaky_relu(merged));
    return add(out, res.forward(x));
}

void SarConfig::validate() const {
    if (cardinal < 1 || splits < 1)
        fail("sar_block: cardinal and splits must be >= 1");
    if (channels <= 0 || channels % (cardinal * splits) != 0)
        fail("sar_block: channels " + std::to_string(channels) + " not divisible by k*r = " +
             std::to_string(cardinal * splits));
}

int SarConfig::hidden_width() const {
    return std::max(channels / (cardinal * reduction), 4);
}

SarBlock::SarBlock(ParamSet& ps, const std::string& name, SarConfig cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    const int c = cfg.channels;
    pre = Conv2dLayer(ps, name + ".pre", c, cfg.splits * c, 3, 1, 1, rng);
    const int cw = cfg.split_width();
    const int hidden = cfg.hidden_width();
    for (int g = 0; g < cfg.cardinal; ++g) {
        const std::string base = name + ".card" + std::to_string(g);
        fc1.emplace_back(ps, base + ".fc1", cw, hidden, rng);
        fc2.emplace_back(ps, base + ".fc2", hidden, cfg.splits * cw, rng);
    }
    res = Conv2dLayer(ps, name + ".res", c, c, 1, 1, 0, rng);
    for (real& v : pre.w.mut()) v = 0;  // branch starts at zero, as in HinBlock
}

Tensor SarBlock::forward(const Tensor& x, SarBlockTrace* trace) const {
    const int n = x.dim(0);
    if (x.dim(1) != cfg.channels)
        fail("sar_block: expected " + std::to_string(cfg.channels) + " channels, got " +
             std::to_string(x.dim(1)));
    const int cw = cfg.split_width();
    const int r = cfg.splits;
    Tensor h = leaky_relu(pre.forward(x));

    std::vector<Tensor> cardinal_out;
    for (int g = 0; g < cfg.cardinal; ++g) {
        std::vector<Tensor> parts;
        for (int j = 0; j < r; ++j) parts.push_back(narrow(h, 1, (g * r + j) * cw, cw));

        Tensor pooled_sum = parts[0];
        for (int j = 1; j < r; ++j) pooled_sum = add(pooled_sum, parts[j]);
        Tensor s = reshape(global_avg_pool(pooled_sum), {n, cw});
        Tensor z = relu(fc1[static_cast<std::size_t>(g)].forward(s));
        Tensor logits = fc2[static_cast<std::size_t>(g)].forward(z);

        Tensor weights;  // [n, r, cw]
        if (r >= 2) {
            weights = softmax_axis(reshape(logits, {n, r, cw}), 1);
        } else {
            weights = reshape(sigmoid(logits), {n, 1, cw});
        }
        if (trace) trace->attention.push_back(weights);

        Tensor acc;
        for (int j = 0; j < r; ++j) {
            Tensor wj = reshape(narrow(weights, 1, j, 1), {n, cw});
            Tensor term = scale_channels(parts[static_cast<std::size_t>(j)], wj);
            acc = acc.defined() ? add(acc, term) : term;
        }
        cardinal_out.push_back(acc);
    }

    Tensor merged = cfg.cardinal == 1 ? cardinal_out[0] : concat(cardinal_out, 1);
    return add(merged, res.forward(x));
}

PlainResBlock::PlainResBlock(ParamSet& ps, const std::string& name, int channels, Rng& rng) {
    conv1 = Conv2dLayer(ps, name + ".conv1", channels, channels, 3, 1, 1, rng);
    conv2 = Conv2dLayer(ps, name + ".conv2", channels, channels, 3, 1, 1, rng);
    res = Conv2dLayer(ps, name + ".res", channels, channels, 1, 1, 0, rng);
    for (real& v : conv2.w.mut()) v = 0;
}

Tensor PlainResBlock::forward(const Tensor& x) const {
    Tensor h = conv2.forward(leaky_relu(conv1.forward(x)));
    return add(h, res.forward(x));
}

Sam::Sam(ParamSet& ps, const std::string& name, int feature_channels, Rng& rng) {
    to_image = Conv2dLayer(ps, name + ".to_image", feature_channels, 3, 1, 1, 0, rng);
    to_mask = Conv2dLayer(ps, name + ".to_mask", 3, feature_channels, 1, 1, 0, rng);
    for (real& v : to_image.w.mut()) v = 0;
}

std::pair<Tensor, Tensor> Sam::forward(const Tensor& features, const Tensor& degraded) const {
    if (features.dim(2) != degraded.dim(2) || features.dim(3) != degraded.dim(3))
        fail("sam: spatial mismatch between features " + shape_str(features.shape()) +
             " and degraded input " + shape_str(degraded.shape()));
    Tensor restored = add(to_image.forward(features), degraded);
    Tensor mask = sigmoid(to_mask.forward(restored));
    Tensor gated = add(mul(features, mask), features);
    return {restored, gated};
}

Csff::Csff(ParamSet& ps, const std::string& name, const std::vector<int>& level_channels,
           Rng& rng) {
    for (std::size_t l = 0; l < level_channels.size(); ++l) {
        const std::string base = name + ".l" + std::to_string(l);
        enc_proj.emplace_back(ps, base + ".enc", level_channels[l], level_channels[l], 1, 1, 0, rng,
                              /*bias=*/false);
        dec_proj.emplace_back(ps, base + ".dec", level_channels[l], level_channels[l], 1, 1, 0, rng,
                              /*bias=*/false);
    }
}

std::vector<Tensor> Csff::forward(const std::vector<Tensor>& enc,
                                  const std::vector<Tensor>& dec) const {
    if (enc.size() != enc_proj.size() || dec.size() != dec_proj.size())
        fail("csff: expected " + std::to_string(enc_proj.size()) + " levels, got " +
             std::to_string(enc.size()) + " encoder and " + std::to_string(dec.size()) +
             " decoder feature maps");
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < enc.size(); ++l)
        out.push_back(add(enc_proj[l].forward(enc[l]), dec_proj[l].forward(dec[l])));
    return out;
}

}  // namespace cdrn
