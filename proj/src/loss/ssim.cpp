#include "loss/ssim.hpp"

#include <cmath>

namespace cdrn {

void SSIMParams::validate() const {
    if (window < 2 || window % 2 == 0) fail("ssim: window must be odd and >= 3");
    if (sigma <= 0 || k1 <= 0 || k2 <= 0 || dynamic_range <= 0)
        fail("ssim: window sigma, K1, K2 and L must be positive");
}

Tensor gaussian_window(int size, double sigma) {
    Tensor k = Tensor::zeros({size, size});
    auto v = k.mut();
    const double c = (size - 1) / 2.0;
    double total = 0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
            const double g = std::exp(-d2 / (2.0 * sigma * sigma));
            v[static_cast<std::size_t>(i) * size + j] = static_cast<real>(g);
            total += g;
        }
    for (real& x : k.mut()) x = static_cast<real>(static_cast<double>(x) / total);
    return k;
}

SsimResult ssim_map(const Tensor& x, const Tensor& y, const SSIMParams& p) {
    p.validate();
    if (!shape_eq(x.shape(), y.shape()))
        fail("ssim_map: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    if (x.ndim() != 4) fail("ssim_map: expected [N,C,H,W] images");
    if (x.dim(2) < p.window || x.dim(3) < p.window)
        fail("ssim_map: image smaller than the " + std::to_string(p.window) + "x" +
             std::to_string(p.window) + " window");

    const Tensor win = gaussian_window(p.window, p.sigma);
    const real c1 = static_cast<real>(p.k1 * p.dynamic_range * p.k1 * p.dynamic_range);
    const real c2 = static_cast<real>(p.k2 * p.dynamic_range * p.k2 * p.dynamic_range);
    const real c3 = c2 / 2;

    auto filt = [&](const Tensor& t) { return filter2d_depthwise_valid(t, win); };

    Tensor mu_x = filt(x);
    Tensor mu_y = filt(y);
    Tensor mu_xx = mul(mu_x, mu_x);
    Tensor mu_yy = mul(mu_y, mu_y);
    Tensor mu_xy = mul(mu_x, mu_y);
    Tensor var_x = sub(filt(mul(x, x)), mu_xx);
    Tensor var_y = sub(filt(mul(y, y)), mu_yy);
    Tensor cov = sub(filt(mul(x, y)), mu_xy);

    Tensor lum_num = add_scalar(scale(mu_xy, 2), c1);
    Tensor lum_den = add_scalar(add(mu_xx, mu_yy), c1);
    Tensor lum = div(lum_num, lum_den);

    Tensor map;
    const bool unit = p.exp_l == 1.0 && p.exp_c == 1.0 && p.exp_s == 1.0;
    if (unit && !p.force_factored) {
        // Collapsed classical form: cs = (2*cov + C2) / (var_x + var_y + C2).
        Tensor cs = div(add_scalar(scale(cov, 2), c2), add_scalar(add(var_x, var_y), c2));
        map = mul(lum, cs);
    } else {
        // Rounding can push a variance a hair below zero; the clamp plus a
        // vanishing offset keeps sqrt differentiable without moving values
        // at the scale of C2/C3.
        Tensor sd_x = sqrt_op(add_scalar(relu(var_x), real(1e-12)));
        Tensor sd_y = sqrt_op(add_scalar(relu(var_y), real(1e-12)));
        Tensor sxsy = mul(sd_x, sd_y);
        Tensor con = div(add_scalar(scale(sxsy, 2), c2), add_scalar(add(var_x, var_y), c2));
        Tensor str = div(add_scalar(cov, c3), add_scalar(sxsy, c3));
        Tensor a = p.exp_l == 1.0 ? lum : pow_scalar(lum, static_cast<real>(p.exp_l));
        Tensor b = p.exp_c == 1.0 ? con : pow_scalar(con, static_cast<real>(p.exp_c));
        Tensor c = p.exp_s == 1.0 ? str : pow_scalar(str, static_cast<real>(p.exp_s));
        map = mul(mul(a, b), c);
    }

    SsimResult out;
    out.map = map;
    out.mean_value = mean(map);
    return out;
}

}  // namespace cdrn
