#include "nn/layers.hpp"

namespace cdrn {

Conv2dLayer::Conv2dLayer(ParamSet& ps, const std::string& name, int cin, int cout, int k,
                         int stride_, int pad_, Rng& rng, bool bias)
    : stride(stride_), pad(pad_) {
    w = ps.add(name + ".w", kaiming_conv_weight(cout, cin, k, k, rng));
    if (bias) b = ps.add(name + ".b", Tensor::zeros({cout}));
}

ConvTranspose2dLayer::ConvTranspose2dLayer(ParamSet& ps, const std::string& name, int cin, int cout,
                                           Rng& rng) {
    w = ps.add(name + ".w", kaiming_conv_transpose_weight(cin, cout, 2, 2, rng));
    b = ps.add(name + ".b", Tensor::zeros({cout}));
}

LinearLayer::LinearLayer(ParamSet& ps, const std::string& name, int in_features, int out_features,
                         Rng& rng) {
    w = ps.add(name + ".w", kaiming_linear_weight(out_features, in_features, rng));
    b = ps.add(name + ".b", Tensor::zeros({out_features}));
}

InstanceNormLayer::InstanceNormLayer(ParamSet& ps, const std::string& name, int channels) {
    gamma = ps.add(name + ".gamma", Tensor::full({channels}, 1));
    beta = ps.add(name + ".beta", Tensor::zeros({channels}));
}

}  // namespace cdrn
