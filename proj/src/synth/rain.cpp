#include "synth/rain.hpp"

#include <algorithm>
#include <cmath>

namespace cdrn {

RainParams RainParams::defaults() {
    RainParams p;
    p.long_streaks = {25, 40, 90, 1.0, 3.0, -30, 30, 0.1, 0.6};
    p.medium_streaks = {60, 15, 40, 1.0, 3.0, -30, 30, 0.1, 0.6};
    p.short_streaks = {120, 5, 15, 1.0, 3.0, -30, 30, 0.1, 0.6};
    return p;
}

namespace {
void check_category(const RainCategory& c, const char* name) {
    if (c.density < 0) fail(std::string("rain params: ") + name + " density must be >= 0");
    if (c.length_min < 0 || c.length_max < c.length_min || c.width_min < 0 ||
        c.width_max < c.width_min || c.intensity_min < 0 || c.intensity_max < c.intensity_min ||
        c.angle_max < c.angle_min)
        fail(std::string("rain params: ") + name + " has an empty or negative range");
}

void render_category(const RainCategory& cat, int w, int h, double scale, Rng& rng,
                     std::vector<float>& layer) {
    std::fill(layer.begin(), layer.end(), 0.0f);
    const double mean_count = cat.density * static_cast<double>(w) * h / 1e6;
    const unsigned count = rng.poisson(mean_count);
    for (unsigned s = 0; s < count; ++s) {
        const double cx = rng.uniform(0.0, w);
        const double cy = rng.uniform(0.0, h);
        const double len = std::max(1.0, rng.uniform(cat.length_min, cat.length_max) * scale);
        const double width = std::max(0.5, rng.uniform(cat.width_min, cat.width_max) * scale);
        const double angle = rng.uniform(cat.angle_min, cat.angle_max) * 3.14159265358979323846 / 180.0;
        const double intensity = rng.uniform(cat.intensity_min, cat.intensity_max);

        // Direction measured from vertical (screen y grows downward).
        const double dx = std::sin(angle), dy = std::cos(angle);
        const double x0 = cx - dx * len / 2, y0 = cy - dy * len / 2;
        const double x1 = cx + dx * len / 2, y1 = cy + dy * len / 2;
        const double sigma = width / 2.0;
        const double reach = 3.0 * sigma + 1.0;

        const int ymin = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - reach)));
        const int ymax = std::min(h - 1, static_cast<int>(std::ceil(std::max(y0, y1) + reach)));
        const int xmin = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - reach)));
        const int xmax = std::min(w - 1, static_cast<int>(std::ceil(std::max(x0, x1) + reach)));
        const double seg_dx = x1 - x0, seg_dy = y1 - y0;
        const double seg_len2 = seg_dx * seg_dx + seg_dy * seg_dy;
        for (int y = ymin; y <= ymax; ++y) {
            for (int x = xmin; x <= xmax; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double t = seg_len2 > 0
                               ? ((px - x0) * seg_dx + (py - y0) * seg_dy) / seg_len2
                               : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double qx = x0 + t * seg_dx, qy = y0 + t * seg_dy;
                const double d2 = (px - qx) * (px - qx) + (py - qy) * (py - qy);
                const double v = intensity * std::exp(-d2 / (2.0 * sigma * sigma));
                layer[static_cast<std::size_t>(y) * w + x] += static_cast<float>(v);
            }
        }
    }
}

void blur3(const std::vector<float>& src, std::vector<float>& dst, int w, int h) {
    // Separable binomial [1 2 1]/4 in each axis with clamped borders.
    std::vector<float> tmp(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
            tmp[static_cast<std::size_t>(y) * w + x] =
                0.25f * src[static_cast<std::size_t>(y) * w + xl] +
                0.5f * src[static_cast<std::size_t>(y) * w + x] +
                0.25f * src[static_cast<std::size_t>(y) * w + xr];
        }
    }
    for (int y = 0; y < h; ++y) {
        const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
        for (int x = 0; x < w; ++x) {
            dst[static_cast<std::size_t>(y) * w + x] =
                0.25f * tmp[static_cast<std::size_t>(yu) * w + x] +
                0.5f * tmp[static_cast<std::size_t>(y) * w + x] +
                0.25f * tmp[static_cast<std::size_t>(yd) * w + x];
        }
    }
}
}  // namespace

void RainParams::validate() const {
    check_category(long_streaks, "long");
    check_category(medium_streaks, "medium");
    check_category(short_streaks, "short");
    if (reference_diagonal <= 0) fail("rain params: reference diagonal must be positive");
}

Tensor gen_streak_layer(int w, int h, const RainParams& params, std::uint64_t seed) {
    if (w <= 0 || h <= 0) fail("gen_streak_layer: empty image");
    params.validate();
    Rng rng(seed);
    const double diag = std::sqrt(static_cast<double>(w) * w + static_cast<double>(h) * h);
    const double scale = diag / params.reference_diagonal;

    std::vector<float> category(static_cast<std::size_t>(w) * h);
    std::vector<float> blurred(category.size());
    std::vector<float> total(category.size(), 0.0f);
    for (const RainCategory* cat :
         {&params.long_streaks, &params.medium_streaks, &params.short_streaks}) {
        render_category(*cat, w, h, scale, rng, category);
        blur3(category, blurred, w, h);
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += blurred[i];
    }

    Tensor layer = Tensor::zeros({h, w});
    auto v = layer.mut();
    for (std::size_t i = 0; i < total.size(); ++i)
        v[i] = static_cast<real>(std::clamp(total[i], 0.0f, 1.0f));
    return layer;
}

Tensor composite(const Tensor& clean, const Tensor& layer) {
    if (clean.ndim() != 3 || clean.dim(0) != 3)
        fail("composite: expected [3,H,W] clean image, got " + shape_str(clean.shape()));
    if (layer.ndim() != 2 || layer.dim(0) != clean.dim(1) || layer.dim(1) != clean.dim(2))
        fail("composite: layer " + shape_str(layer.shape()) + " does not match image " +
             shape_str(clean.shape()));
    Tensor out = Tensor::zeros(clean.shape());
    auto cv = clean.values();
    auto lv = layer.values();
    auto ov = out.mut();
    const std::size_t hw = lv.size();
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < hw; ++i)
            ov[static_cast<std::size_t>(c) * hw + i] =
                std::clamp(cv[static_cast<std::size_t>(c) * hw + i] + lv[i], real(0), real(1));
    return out;
}

}  // namespace cdrn
