#pragma once

#include <string>

#include "core/ops.hpp"
#include "core/params.hpp"

namespace cdrn {

// Thin parameter-owning wrappers over the tensor ops. Construction registers
// every tensor into the given ParamSet under `name.` prefixed keys.

struct Conv2dLayer {
    Tensor w, b;
    int stride = 1;
    int pad = 1;

    Conv2dLayer() = default;
    Conv2dLayer(ParamSet& ps, const std::string& name, int cin, int cout, int k, int stride,
                int pad, Rng& rng, bool bias = true);
    Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
    bool defined() const { return w.defined(); }
};

struct ConvTranspose2dLayer {
    Tensor w, b;

    ConvTranspose2dLayer() = default;
    ConvTranspose2dLayer(ParamSet& ps, const std::string& name, int cin, int cout, Rng& rng);
    Tensor forward(const Tensor& x) const { return conv_transpose2d(x, w, b, 2); }
};

struct LinearLayer {
    Tensor w, b;

    LinearLayer() = default;
    LinearLayer(ParamSet& ps, const std::string& name, int in_features, int out_features, Rng& rng);
    Tensor forward(const Tensor& x) const { return linear(x, w, b); }
};

struct InstanceNormLayer {
    Tensor gamma, beta;
    real eps = real(1e-5);

    InstanceNormLayer() = default;
    InstanceNormLayer(ParamSet& ps, const std::string& name, int channels);
    Tensor forward(const Tensor& x) const { return instance_norm(x, gamma, beta, eps); }
};

}  // namespace cdrn
