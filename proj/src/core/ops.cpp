#include "core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cdrn {

namespace {

std::span<const real> out_grad(const std::shared_ptr<TensorData>& d) {
    if (d->grad.empty()) return {};
    return {d->grad.data(), d->grad.size()};
}

std::span<real> ensure_grad(const std::shared_ptr<TensorData>& d) {
    if (d->grad.empty()) d->grad.assign(d->values.size(), real(0));
    return {d->grad.data(), d->grad.size()};
}

void check_finite(const Tensor& t, const char* op) {
    if (!finite_checks_enabled()) return;
    for (real v : t.values()) {
        if (!std::isfinite(v)) fail(std::string(op) + " produced a non-finite value");
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!shape_eq(a.shape(), b.shape()))
        fail(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
}

void check_nchw(const Tensor& x, const char* op) {
    if (x.ndim() != 4) fail(std::string(op) + ": expected NCHW tensor, got " + shape_str(x.shape()));
}

int checked_axis(const Tensor& x, int axis, const char* op) {
    if (axis < 0 || axis >= x.ndim())
        fail(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
             shape_str(x.shape()));
    return axis;
}

// C[M x N] += A[M x K] * B[K x N], all row-major.
void gemm_acc(const real* A, const real* B, real* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const real* a = A + static_cast<std::size_t>(i) * K;
        real* c = C + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const real av = a[k];
            const real* brow = B + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * brow[j];
        }
    }
}

// C[K x N] += A^T[K x M] * B[M x N] with A given as [M x K].
void gemm_tn_acc(const real* A, const real* B, real* C, int M, int K, int N) {
    for (int m = 0; m < M; ++m) {
        const real* a = A + static_cast<std::size_t>(m) * K;
        const real* brow = B + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            const real av = a[k];
            real* c = C + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * brow[j];
        }
    }
}

// C[M x K] += A[M x N] * B^T[N x K] with B given as [K x N].
void gemm_nt_acc(const real* A, const real* B, real* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const real* a = A + static_cast<std::size_t>(i) * N;
        real* c = C + static_cast<std::size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const real* b = B + static_cast<std::size_t>(k) * N;
            real acc = 0;
            for (int j = 0; j < N; ++j) acc += a[j] * b[j];
            c[k] += acc;
        }
    }
}

struct ConvDims {
    int n, cin, h, w, cout, kh, kw, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
    check_nchw(x, "conv2d");
    if (w.ndim() != 4) fail("conv2d: kernel must be [Cout,Cin,kh,kw], got " + shape_str(w.shape()));
    if (stride < 1) fail("conv2d: stride must be >= 1");
    if (pad < 0) fail("conv2d: pad must be >= 0");
    ConvDims d;
    d.n = x.dim(0);
    d.cin = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.cout = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    if (w.dim(1) != d.cin)
        fail("conv2d: input channel mismatch, x has " + std::to_string(d.cin) +
             " channels (axis 1) but kernel expects " + std::to_string(w.dim(1)));
    if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw)
        fail("conv2d: kernel " + std::to_string(d.kh) + "x" + std::to_string(d.kw) +
             " larger than padded input (axes 2,3 of " + shape_str(x.shape()) + ")");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    return d;
}

void im2col(const real* x, const ConvDims& d, int stride, int pad, real* cols) {
    const int hw = d.h * d.w;
    const int out_hw = d.ho * d.wo;
    for (int c = 0; c < d.cin; ++c) {
        for (int ki = 0; ki < d.kh; ++ki) {
            for (int kj = 0; kj < d.kw; ++kj) {
                real* row = cols + static_cast<std::size_t>((c * d.kh + ki) * d.kw + kj) * out_hw;
                for (int oh = 0; oh < d.ho; ++oh) {
                    const int ih = oh * stride - pad + ki;
                    real* dst = row + static_cast<std::size_t>(oh) * d.wo;
                    if (ih < 0 || ih >= d.h) {
                        std::fill(dst, dst + d.wo, real(0));
                        continue;
                    }
                    const real* src = x + static_cast<std::size_t>(c) * hw +
                                      static_cast<std::size_t>(ih) * d.w;
                    if (stride == 1) {
                        const int iw0 = -pad + kj;
                        for (int ow = 0; ow < d.wo; ++ow) {
                            const int iw = iw0 + ow;
                            dst[ow] = (iw >= 0 && iw < d.w) ? src[iw] : real(0);
                        }
                    } else {
                        for (int ow = 0; ow < d.wo; ++ow) {
                            const int iw = ow * stride - pad + kj;
                            dst[ow] = (iw >= 0 && iw < d.w) ? src[iw] : real(0);
                        }
                    }
                }
            }
        }
    }
}

void col2im_acc(const real* cols, const ConvDims& d, int stride, int pad, real* dx) {
    const int hw = d.h * d.w;
    const int out_hw = d.ho * d.wo;
    for (int c = 0; c < d.cin; ++c) {
        for (int ki = 0; ki < d.kh; ++ki) {
            for (int kj = 0; kj < d.kw; ++kj) {
                const real* row =
                    cols + static_cast<std::size_t>((c * d.kh + ki) * d.kw + kj) * out_hw;
                for (int oh = 0; oh < d.ho; ++oh) {
                    const int ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= d.h) continue;
                    real* dst = dx + static_cast<std::size_t>(c) * hw +
                                static_cast<std::size_t>(ih) * d.w;
                    const real* src = row + static_cast<std::size_t>(oh) * d.wo;
                    for (int ow = 0; ow < d.wo; ++ow) {
                        const int iw = ow * stride - pad + kj;
                        if (iw >= 0 && iw < d.w) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

using UnaryFwd = real (*)(real, real);
using UnaryBwd = real (*)(real /*x*/, real /*y*/, real /*p*/);

Tensor unary_op(const Tensor& x, real p, UnaryFwd fwd, UnaryBwd bwd, const char* name) {
    Tensor y = Tensor::zeros(x.shape());
    auto xs = x.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i], p);
    check_finite(y, name);
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        g->record(y, [xh, yh, p, bwd]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t i = 0; i < dx.size(); ++i)
                dx[i] += dy[i] * bwd(xh->values[i], yh->values[i], p);
        });
    }
    return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor y = Tensor::zeros(a.shape());
    auto av = a.values(), bv = b.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = av[i] + bv[i];
    Graph* g = Graph::current();
    if (g && (a.grad_needed() || b.grad_needed())) {
        auto ah = a.handle();
        auto bh = b.handle();
        auto yh = y.handle();
        const bool na = a.grad_needed(), nb = b.grad_needed();
        g->record(y, [ah, bh, yh, na, nb]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            if (na) {
                auto da = ensure_grad(ah);
                for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
            }
            if (nb) {
                auto db = ensure_grad(bh);
                for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
            }
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor y = Tensor::zeros(a.shape());
    auto av = a.values(), bv = b.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = av[i] - bv[i];
    Graph* g = Graph::current();
    if (g && (a.grad_needed() || b.grad_needed())) {
        auto ah = a.handle();
        auto bh = b.handle();
        auto yh = y.handle();
        const bool na = a.grad_needed(), nb = b.grad_needed();
        g->record(y, [ah, bh, yh, na, nb]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            if (na) {
                auto da = ensure_grad(ah);
                for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
            }
            if (nb) {
                auto db = ensure_grad(bh);
                for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
            }
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor y = Tensor::zeros(a.shape());
    auto av = a.values(), bv = b.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = av[i] * bv[i];
    check_finite(y, "mul");
    Graph* g = Graph::current();
    if (g && (a.grad_needed() || b.grad_needed())) {
        auto ah = a.handle();
        auto bh = b.handle();
        auto yh = y.handle();
        const bool na = a.grad_needed(), nb = b.grad_needed();
        g->record(y, [ah, bh, yh, na, nb]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            if (na) {
                auto da = ensure_grad(ah);
                for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bh->values[i];
            }
            if (nb) {
                auto db = ensure_grad(bh);
                for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * ah->values[i];
            }
        });
    }
    return y;
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    Tensor y = Tensor::zeros(a.shape());
    auto av = a.values(), bv = b.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = av[i] / bv[i];
    check_finite(y, "div");
    Graph* g = Graph::current();
    if (g && (a.grad_needed() || b.grad_needed())) {
        auto ah = a.handle();
        auto bh = b.handle();
        auto yh = y.handle();
        const bool na = a.grad_needed(), nb = b.grad_needed();
        g->record(y, [ah, bh, yh, na, nb]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            if (na) {
                auto da = ensure_grad(ah);
                for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] / bh->values[i];
            }
            if (nb) {
                auto db = ensure_grad(bh);
                for (std::size_t i = 0; i < dy.size(); ++i) {
                    const real bi = bh->values[i];
                    db[i] -= dy[i] * ah->values[i] / (bi * bi);
                }
            }
        });
    }
    return y;
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "minimum");
    Tensor y = Tensor::zeros(a.shape());
    auto av = a.values(), bv = b.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = std::min(av[i], bv[i]);
    Graph* g = Graph::current();
    if (g && (a.grad_needed() || b.grad_needed())) {
        auto ah = a.handle();
        auto bh = b.handle();
        auto yh = y.handle();
        const bool na = a.grad_needed(), nb = b.grad_needed();
        g->record(y, [ah, bh, yh, na, nb]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const real va = ah->values[i], vb = bh->values[i];
                const real wa = va < vb ? real(1) : (va > vb ? real(0) : real(0.5));
                if (na) ensure_grad(ah)[i] += dy[i] * wa;
                if (nb) ensure_grad(bh)[i] += dy[i] * (real(1) - wa);
            }
        });
    }
    return y;
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "maximum");
    Tensor y = Tensor::zeros(a.shape());
    auto av = a.values(), bv = b.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = std::max(av[i], bv[i]);
    Graph* g = Graph::current();
    if (g && (a.grad_needed() || b.grad_needed())) {
        auto ah = a.handle();
        auto bh = b.handle();
        auto yh = y.handle();
        const bool na = a.grad_needed(), nb = b.grad_needed();
        g->record(y, [ah, bh, yh, na, nb]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const real va = ah->values[i], vb = bh->values[i];
                const real wa = va > vb ? real(1) : (va < vb ? real(0) : real(0.5));
                if (na) ensure_grad(ah)[i] += dy[i] * wa;
                if (nb) ensure_grad(bh)[i] += dy[i] * (real(1) - wa);
            }
        });
    }
    return y;
}

Tensor scale(const Tensor& x, real c) {
    return unary_op(
        x, c, [](real v, real p) { return v * p; },
        [](real, real, real p) { return p; }, "scale");
}

Tensor add_scalar(const Tensor& x, real c) {
    return unary_op(
        x, c, [](real v, real p) { return v + p; }, [](real, real, real) { return real(1); },
        "add_scalar");
}

Tensor clamp(const Tensor& x, real lo, real hi) {
    if (lo > hi) fail("clamp: lo > hi");
    Tensor y = Tensor::zeros(x.shape());
    auto xs = x.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = std::clamp(xs[i], lo, hi);
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        g->record(y, [xh, yh, lo, hi]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const real v = xh->values[i];
                if (v >= lo && v <= hi) dx[i] += dy[i];
            }
        });
    }
    return y;
}

Tensor relu(const Tensor& x) {
    return unary_op(
        x, 0, [](real v, real) { return v > 0 ? v : real(0); },
        [](real v, real, real) { return v > 0 ? real(1) : real(0); }, "relu");
}

Tensor leaky_relu(const Tensor& x, real slope) {
    return unary_op(
        x, slope, [](real v, real s) { return v > 0 ? v : s * v; },
        [](real v, real, real s) { return v > 0 ? real(1) : s; }, "leaky_relu");
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, 0,
        [](real v, real) {
            if (v >= 0) return real(1) / (real(1) + std::exp(-v));
            const real e = std::exp(v);
            return e / (real(1) + e);
        },
        [](real, real y, real) { return y * (real(1) - y); }, "sigmoid");
}

Tensor softplus(const Tensor& x) {
    return unary_op(
        x, 0,
        [](real v, real) { return std::max(v, real(0)) + std::log1p(std::exp(-std::abs(v))); },
        [](real v, real, real) {
            if (v >= 0) return real(1) / (real(1) + std::exp(-v));
            const real e = std::exp(v);
            return e / (real(1) + e);
        },
        "softplus");
}

Tensor exp_op(const Tensor& x) {
    return unary_op(
        x, 0, [](real v, real) { return std::exp(v); }, [](real, real y, real) { return y; },
        "exp");
}

Tensor log_op(const Tensor& x) {
    return unary_op(
        x, 0, [](real v, real) { return std::log(v); },
        [](real v, real, real) { return real(1) / v; }, "log");
}

Tensor sqrt_op(const Tensor& x) {
    return unary_op(
        x, 0, [](real v, real) { return std::sqrt(v); },
        [](real, real y, real) { return real(0.5) / y; }, "sqrt");
}

Tensor pow_scalar(const Tensor& x, real p) {
    return unary_op(
        x, p, [](real v, real e) { return std::pow(v, e); },
        [](real v, real, real e) { return e * std::pow(v, e - real(1)); }, "pow");
}

Tensor softmax_axis(const Tensor& x, int axis) {
    checked_axis(x, axis, "softmax_axis");
    const Shape& s = x.shape();
    const int len = s[static_cast<std::size_t>(axis)];
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(s[static_cast<std::size_t>(i)]);
    for (int i = axis + 1; i < x.ndim(); ++i)
        inner *= static_cast<std::size_t>(s[static_cast<std::size_t>(i)]);
    Tensor y = Tensor::zeros(s);
    auto xs = x.values();
    auto ys = y.mut();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * static_cast<std::size_t>(len) * inner + in;
            real mx = xs[base];
            for (int j = 1; j < len; ++j)
                mx = std::max(mx, xs[base + static_cast<std::size_t>(j) * inner]);
            double denom = 0;
            for (int j = 0; j < len; ++j) {
                const real e = std::exp(xs[base + static_cast<std::size_t>(j) * inner] - mx);
                ys[base + static_cast<std::size_t>(j) * inner] = e;
                denom += static_cast<double>(e);
            }
            const real inv = static_cast<real>(1.0 / denom);
            for (int j = 0; j < len; ++j) ys[base + static_cast<std::size_t>(j) * inner] *= inv;
        }
    }
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        g->record(y, [xh, yh, len, outer, inner]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * static_cast<std::size_t>(len) * inner + in;
                    double dot = 0;
                    for (int j = 0; j < len; ++j) {
                        const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
                        dot += static_cast<double>(dy[idx]) * yh->values[idx];
                    }
                    for (int j = 0; j < len; ++j) {
                        const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
                        dx[idx] += yh->values[idx] * (dy[idx] - static_cast<real>(dot));
                    }
                }
            }
        });
    }
    return y;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) fail("concat: no inputs");
    const Tensor& first = parts.front();
    checked_axis(first, axis, "concat");
    Shape out_shape = first.shape();
    int total = 0;
    for (const Tensor& t : parts) {
        if (t.ndim() != first.ndim()) fail("concat: rank mismatch");
        for (int i = 0; i < first.ndim(); ++i) {
            if (i == axis) continue;
            if (t.dim(i) != first.dim(i))
                fail("concat: extent mismatch on axis " + std::to_string(i) + ": " +
                     shape_str(t.shape()) + " vs " + shape_str(first.shape()));
        }
        total += t.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = total;
    Tensor y = Tensor::zeros(out_shape);

    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(first.dim(i));
    for (int i = axis + 1; i < first.ndim(); ++i) inner *= static_cast<std::size_t>(first.dim(i));

    auto ys = y.mut();
    const std::size_t out_row = static_cast<std::size_t>(total) * inner;
    std::size_t offset = 0;
    for (const Tensor& t : parts) {
        auto ts = t.values();
        const std::size_t part_row = static_cast<std::size_t>(t.dim(axis)) * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::memcpy(ys.data() + o * out_row + offset, ts.data() + o * part_row,
                        part_row * sizeof(real));
        offset += part_row;
    }

    Graph* g = Graph::current();
    bool any = false;
    for (const Tensor& t : parts) any = any || t.grad_needed();
    if (g && any) {
        std::vector<std::shared_ptr<TensorData>> hs;
        std::vector<bool> needs;
        std::vector<std::size_t> rows;
        for (const Tensor& t : parts) {
            hs.push_back(t.handle());
            needs.push_back(t.grad_needed());
            rows.push_back(static_cast<std::size_t>(t.dim(axis)) * inner);
        }
        auto yh = y.handle();
        g->record(y, [hs, needs, rows, yh, outer, out_row]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            std::size_t off = 0;
            for (std::size_t p = 0; p < hs.size(); ++p) {
                if (needs[p]) {
                    auto dt = ensure_grad(hs[p]);
                    for (std::size_t o = 0; o < outer; ++o) {
                        const real* src = dy.data() + o * out_row + off;
                        real* dst = dt.data() + o * rows[p];
                        for (std::size_t i = 0; i < rows[p]; ++i) dst[i] += src[i];
                    }
                }
                off += rows[p];
            }
        });
    }
    return y;
}

Tensor narrow(const Tensor& x, int axis, int start, int length) {
    checked_axis(x, axis, "narrow");
    const int extent = x.dim(axis);
    if (start < 0 || length <= 0 || start + length > extent)
        fail("narrow: range [" + std::to_string(start) + "," + std::to_string(start + length) +
             ") out of bounds for extent " + std::to_string(extent));
    Shape out_shape = x.shape();
    out_shape[static_cast<std::size_t>(axis)] = length;
    Tensor y = Tensor::zeros(out_shape);

    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x.dim(i));
    for (int i = axis + 1; i < x.ndim(); ++i) inner *= static_cast<std::size_t>(x.dim(i));
    const std::size_t in_row = static_cast<std::size_t>(extent) * inner;
    const std::size_t out_row = static_cast<std::size_t>(length) * inner;
    const std::size_t off = static_cast<std::size_t>(start) * inner;

    auto xs = x.values();
    auto ys = y.mut();
    for (std::size_t o = 0; o < outer; ++o)
        std::memcpy(ys.data() + o * out_row, xs.data() + o * in_row + off, out_row * sizeof(real));

    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        g->record(y, [xh, yh, outer, in_row, out_row, off]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t o = 0; o < outer; ++o) {
                const real* src = dy.data() + o * out_row;
                real* dst = dx.data() + o * in_row + off;
                for (std::size_t i = 0; i < out_row; ++i) dst[i] += src[i];
            }
        });
    }
    return y;
}

std::vector<Tensor> split(const Tensor& x, int axis, int parts) {
    checked_axis(x, axis, "split");
    if (parts < 1) fail("split: parts must be >= 1");
    const int extent = x.dim(axis);
    if (extent % parts != 0)
        fail("split: axis " + std::to_string(axis) + " extent " + std::to_string(extent) +
             " not divisible into " + std::to_string(parts) + " parts");
    const int step = extent / parts;
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(parts));
    for (int p = 0; p < parts; ++p) out.push_back(narrow(x, axis, p * step, step));
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        fail("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    Tensor y = Tensor::from(std::move(shape), std::vector<real>(x.values().begin(), x.values().end()));
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        g->record(y, [xh, yh]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        });
    }
    return y;
}

Tensor sum(const Tensor& x) {
    double acc = 0;
    for (real v : x.values()) acc += static_cast<double>(v);
    Tensor y = Tensor::scalar(static_cast<real>(acc));
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        g->record(y, [xh, yh]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[0];
        });
    }
    return y;
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) fail("mean: empty tensor");
    double acc = 0;
    for (real v : x.values()) acc += static_cast<double>(v);
    const double inv_n = 1.0 / static_cast<double>(x.numel());
    Tensor y = Tensor::scalar(static_cast<real>(acc * inv_n));
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        const real w = static_cast<real>(inv_n);
        g->record(y, [xh, yh, w]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[0] * w;
        });
    }
    return y;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    if (a.numel() == 0) fail("mse: empty tensor");
    auto av = a.values(), bv = b.values();
    double acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
        acc += d * d;
    }
    const double inv_n = 1.0 / static_cast<double>(a.numel());
    Tensor y = Tensor::scalar(static_cast<real>(acc * inv_n));
    Graph* g = Graph::current();
    if (g && (a.grad_needed() || b.grad_needed())) {
        auto ah = a.handle();
        auto bh = b.handle();
        auto yh = y.handle();
        const bool na = a.grad_needed(), nb = b.grad_needed();
        const real w = static_cast<real>(2.0 * inv_n);
        g->record(y, [ah, bh, yh, na, nb, w]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            const real s = dy[0] * w;
            for (std::size_t i = 0; i < ah->values.size(); ++i) {
                const real d = ah->values[i] - bh->values[i];
                if (na) ensure_grad(ah)[i] += s * d;
                if (nb) ensure_grad(bh)[i] -= s * d;
            }
        });
    }
    return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const ConvDims d = conv_dims(x, w, stride, pad);
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != d.cout))
        fail("conv2d: bias shape " + shape_str(b.shape()) + " does not match Cout axis of " +
             shape_str(w.shape()));
    Tensor y = Tensor::zeros({d.n, d.cout, d.ho, d.wo});
    auto xs = x.values();
    auto ws = w.values();
    auto ys = y.mut();
    const int ckk = d.cin * d.kh * d.kw;
    const int out_hw = d.ho * d.wo;
    const std::size_t x_step = static_cast<std::size_t>(d.cin) * d.h * d.w;
    const std::size_t y_step = static_cast<std::size_t>(d.cout) * out_hw;
    const bool one_by_one = (d.kh == 1 && d.kw == 1 && stride == 1 && pad == 0);

    std::vector<real> cols;
    if (!one_by_one) cols.resize(static_cast<std::size_t>(ckk) * out_hw);
    for (int n = 0; n < d.n; ++n) {
        const real* xin = xs.data() + static_cast<std::size_t>(n) * x_step;
        const real* colp = xin;
        if (!one_by_one) {
            im2col(xin, d, stride, pad, cols.data());
            colp = cols.data();
        }
        gemm_acc(ws.data(), colp, ys.data() + static_cast<std::size_t>(n) * y_step, d.cout, ckk,
                 out_hw);
    }
    if (b.defined()) {
        auto bs = b.values();
        for (int n = 0; n < d.n; ++n) {
            for (int c = 0; c < d.cout; ++c) {
                real* dst = ys.data() + static_cast<std::size_t>(n) * y_step +
                            static_cast<std::size_t>(c) * out_hw;
                const real bv = bs[static_cast<std::size_t>(c)];
                for (int i = 0; i < out_hw; ++i) dst[i] += bv;
            }
        }
    }
    check_finite(y, "conv2d");

    Graph* g = Graph::current();
    if (g && (x.grad_needed() || w.grad_needed() || (b.defined() && b.grad_needed()))) {
        auto xh = x.handle();
        auto wh = w.handle();
        auto bh = b.defined() ? b.handle() : nullptr;
        auto yh = y.handle();
        const bool nx = x.grad_needed(), nw = w.grad_needed();
        const bool nb = b.defined() && b.grad_needed();
        g->record(y, [xh, wh, bh, yh, d, stride, pad, nx, nw, nb, ckk, out_hw, x_step, y_step,
                      one_by_one]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            std::vector<real> cols, dcols;
            if (!one_by_one && (nx || nw)) cols.resize(static_cast<std::size_t>(ckk) * out_hw);
            if (nx && !one_by_one) dcols.resize(static_cast<std::size_t>(ckk) * out_hw);
            std::span<real> dxs, dws, dbs;
            if (nx) dxs = ensure_grad(xh);
            if (nw) dws = ensure_grad(wh);
            if (nb) dbs = ensure_grad(bh);
            for (int n = 0; n < d.n; ++n) {
                const real* dyn = dy.data() + static_cast<std::size_t>(n) * y_step;
                const real* xin = xh->values.data() + static_cast<std::size_t>(n) * x_step;
                const real* colp = xin;
                if (!one_by_one && (nx || nw)) {
                    im2col(xin, d, stride, pad, cols.data());
                    colp = cols.data();
                }
                if (nw)
                    gemm_nt_acc(dyn, colp, dws.data(), d.cout, ckk, out_hw);
                if (nx) {
                    real* dxn = dxs.data() + static_cast<std::size_t>(n) * x_step;
                    if (one_by_one) {
                        gemm_tn_acc(wh->values.data(), dyn, dxn, d.cout, ckk, out_hw);
                    } else {
                        std::fill(dcols.begin(), dcols.end(), real(0));
                        gemm_tn_acc(wh->values.data(), dyn, dcols.data(), d.cout, ckk, out_hw);
                        col2im_acc(dcols.data(), d, stride, pad, dxn);
                    }
                }
                if (nb) {
                    for (int c = 0; c < d.cout; ++c) {
                        const real* src = dyn + static_cast<std::size_t>(c) * out_hw;
                        double acc = 0;
                        for (int i = 0; i < out_hw; ++i) acc += static_cast<double>(src[i]);
                        dbs[static_cast<std::size_t>(c)] += static_cast<real>(acc);
                    }
                }
            }
        });
    }
    return y;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
    check_nchw(x, "conv_transpose2d");
    if (stride != 2) fail("conv_transpose2d: only stride 2 is supported");
    if (w.ndim() != 4)
        fail("conv_transpose2d: kernel must be [Cin,Cout,kh,kw], got " + shape_str(w.shape()));
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    if (w.dim(0) != cin)
        fail("conv_transpose2d: input channel mismatch, x has " + std::to_string(cin) +
             " channels but kernel expects " + std::to_string(w.dim(0)));
    const int cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int ho = (h - 1) * stride + kh;
    const int wo = (wd - 1) * stride + kw;
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != cout))
        fail("conv_transpose2d: bias shape " + shape_str(b.shape()) + " does not match Cout");

    Tensor y = Tensor::zeros({n, cout, ho, wo});
    auto xs = x.values();
    auto ws = w.values();
    auto ys = y.mut();
    const std::size_t x_step = static_cast<std::size_t>(cin) * h * wd;
    const std::size_t y_step = static_cast<std::size_t>(cout) * ho * wo;
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < cin; ++ci) {
            const real* xin = xs.data() + static_cast<std::size_t>(ni) * x_step +
                              static_cast<std::size_t>(ci) * h * wd;
            for (int co = 0; co < cout; ++co) {
                const real* wk = ws.data() + (static_cast<std::size_t>(ci) * cout +
                                              static_cast<std::size_t>(co)) * kh * kw;
                real* yout = ys.data() + static_cast<std::size_t>(ni) * y_step +
                             static_cast<std::size_t>(co) * ho * wo;
                for (int ih = 0; ih < h; ++ih) {
                    for (int iw = 0; iw < wd; ++iw) {
                        const real v = xin[static_cast<std::size_t>(ih) * wd + iw];
                        for (int ki = 0; ki < kh; ++ki) {
                            real* row = yout + static_cast<std::size_t>(ih * stride + ki) * wo +
                                        static_cast<std::size_t>(iw) * stride;
                            for (int kj = 0; kj < kw; ++kj)
                                row[kj] += v * wk[static_cast<std::size_t>(ki) * kw + kj];
                        }
                    }
                }
            }
        }
    }
    if (b.defined()) {
        auto bs = b.values();
        for (int ni = 0; ni < n; ++ni)
            for (int co = 0; co < cout; ++co) {
                real* dst = ys.data() + static_cast<std::size_t>(ni) * y_step +
                            static_cast<std::size_t>(co) * ho * wo;
                for (int i = 0; i < ho * wo; ++i) dst[i] += bs[static_cast<std::size_t>(co)];
            }
    }
    check_finite(y, "conv_transpose2d");

    Graph* g = Graph::current();
    if (g && (x.grad_needed() || w.grad_needed() || (b.defined() && b.grad_needed()))) {
        auto xh = x.handle();
        auto wh = w.handle();
        auto bh = b.defined() ? b.handle() : nullptr;
        auto yh = y.handle();
        const bool nx = x.grad_needed(), nw = w.grad_needed();
        const bool nb = b.defined() && b.grad_needed();
        g->record(y, [xh, wh, bh, yh, n, cin, cout, h, wd, ho, wo, kh, kw, stride, nx, nw, nb,
                      x_step, y_step]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            std::span<real> dxs, dws, dbs;
            if (nx) dxs = ensure_grad(xh);
            if (nw) dws = ensure_grad(wh);
            if (nb) dbs = ensure_grad(bh);
            for (int ni = 0; ni < n; ++ni) {
                for (int ci = 0; ci < cin; ++ci) {
                    const real* xin = xh->values.data() + static_cast<std::size_t>(ni) * x_step +
                                      static_cast<std::size_t>(ci) * h * wd;
                    real* dxin = nx ? dxs.data() + static_cast<std::size_t>(ni) * x_step +
                                          static_cast<std::size_t>(ci) * h * wd
                                    : nullptr;
                    for (int co = 0; co < cout; ++co) {
                        const real* wk = wh->values.data() +
                                         (static_cast<std::size_t>(ci) * cout +
                                          static_cast<std::size_t>(co)) * kh * kw;
                        real* dwk = nw ? dws.data() + (static_cast<std::size_t>(ci) * cout +
                                                       static_cast<std::size_t>(co)) * kh * kw
                                       : nullptr;
                        const real* dyn = dy.data() + static_cast<std::size_t>(ni) * y_step +
                                          static_cast<std::size_t>(co) * ho * wo;
                        for (int ih = 0; ih < h; ++ih) {
                            for (int iw = 0; iw < wd; ++iw) {
                                const real v = xin[static_cast<std::size_t>(ih) * wd + iw];
                                real acc = 0;
                                for (int ki = 0; ki < kh; ++ki) {
                                    const real* row =
                                        dyn + static_cast<std::size_t>(ih * stride + ki) * wo +
                                        static_cast<std::size_t>(iw) * stride;
                                    for (int kj = 0; kj < kw; ++kj) {
                                        const real dv = row[kj];
                                        acc += dv * wk[static_cast<std::size_t>(ki) * kw + kj];
                                        if (nw) dwk[static_cast<std::size_t>(ki) * kw + kj] += dv * v;
                                    }
                                }
                                if (nx) dxin[static_cast<std::size_t>(ih) * wd + iw] += acc;
                            }
                        }
                    }
                }
                if (nb) {
                    const real* dyn = dy.data() + static_cast<std::size_t>(ni) * y_step;
                    for (int co = 0; co < cout; ++co) {
                        double acc = 0;
                        const real* src = dyn + static_cast<std::size_t>(co) * ho * wo;
                        for (int i = 0; i < ho * wo; ++i) acc += static_cast<double>(src[i]);
                        dbs[static_cast<std::size_t>(co)] += static_cast<real>(acc);
                    }
                }
            }
        });
    }
    return y;
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
    check_nchw(x, "instance_norm");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int hw = h * w;
    if (hw < 1) fail("instance_norm: empty spatial plane");
    const bool affine = gamma.defined();
    if (affine) {
        if (gamma.ndim() != 1 || gamma.dim(0) != c || !beta.defined() || beta.ndim() != 1 ||
            beta.dim(0) != c)
            fail("instance_norm: affine parameters must be per-channel vectors of length " +
                 std::to_string(c));
    }
    Tensor y = Tensor::zeros(x.shape());
    auto xs = x.values();
    auto ys = y.mut();
    std::vector<real> mu(static_cast<std::size_t>(n) * c), istd(static_cast<std::size_t>(n) * c);
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const std::size_t plane = (static_cast<std::size_t>(ni) * c + ci);
            const real* src = xs.data() + plane * hw;
            double m = 0;
            for (int i = 0; i < hw; ++i) m += static_cast<double>(src[i]);
            m /= hw;
            double var = 0;
            for (int i = 0; i < hw; ++i) {
                const double d = static_cast<double>(src[i]) - m;
                var += d * d;
            }
            var /= hw;
            const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
            mu[plane] = static_cast<real>(m);
            istd[plane] = static_cast<real>(is);
            real* dst = ys.data() + plane * hw;
            const real g_ = affine ? gamma.values()[static_cast<std::size_t>(ci)] : real(1);
            const real b_ = affine ? beta.values()[static_cast<std::size_t>(ci)] : real(0);
            for (int i = 0; i < hw; ++i)
                dst[i] = (src[i] - mu[plane]) * istd[plane] * g_ + b_;
        }
    }
    check_finite(y, "instance_norm");

    Graph* g = Graph::current();
    if (g && (x.grad_needed() || (affine && (gamma.grad_needed() || beta.grad_needed())))) {
        auto xh = x.handle();
        auto gh = affine ? gamma.handle() : nullptr;
        auto bh = affine ? beta.handle() : nullptr;
        auto yh = y.handle();
        const bool nx = x.grad_needed();
        const bool ng = affine && gamma.grad_needed();
        const bool nbt = affine && beta.grad_needed();
        g->record(y, [xh, gh, bh, yh, mu, istd, n, c, hw, affine, nx, ng, nbt]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            std::span<real> dxs, dgs, dbs;
            if (nx) dxs = ensure_grad(xh);
            if (ng) dgs = ensure_grad(gh);
            if (nbt) dbs = ensure_grad(bh);
            for (int ni = 0; ni < n; ++ni) {
                for (int ci = 0; ci < c; ++ci) {
                    const std::size_t plane = (static_cast<std::size_t>(ni) * c + ci);
                    const real* src = xh->values.data() + plane * hw;
                    const real* dyp = dy.data() + plane * hw;
                    const real m = mu[plane], is = istd[plane];
                    const real gv = affine ? gh->values[static_cast<std::size_t>(ci)] : real(1);
                    if (ng || nbt) {
                        double sg = 0, sb = 0;
                        for (int i = 0; i < hw; ++i) {
                            const real xn = (src[i] - m) * is;
                            sg += static_cast<double>(dyp[i]) * xn;
                            sb += static_cast<double>(dyp[i]);
                        }
                        if (ng) dgs[static_cast<std::size_t>(ci)] += static_cast<real>(sg);
                        if (nbt) dbs[static_cast<std::size_t>(ci)] += static_cast<real>(sb);
                    }
                    if (nx) {
                        double m1 = 0, m2 = 0;
                        for (int i = 0; i < hw; ++i) {
                            const real gd = dyp[i] * gv;
                            const real xn = (src[i] - m) * is;
                            m1 += static_cast<double>(gd);
                            m2 += static_cast<double>(gd) * xn;
                        }
                        m1 /= hw;
                        m2 /= hw;
                        real* dxp = dxs.data() + plane * hw;
                        for (int i = 0; i < hw; ++i) {
                            const real gd = dyp[i] * gv;
                            const real xn = (src[i] - m) * is;
                            dxp[i] += is * (gd - static_cast<real>(m1) - xn * static_cast<real>(m2));
                        }
                    }
                }
            }
        });
    }
    return y;
}

Tensor global_avg_pool(const Tensor& x) {
    check_nchw(x, "global_avg_pool");
    const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y = Tensor::zeros({n, c, 1, 1});
    auto xs = x.values();
    auto ys = y.mut();
    for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
        double acc = 0;
        const real* src = xs.data() + p * static_cast<std::size_t>(hw);
        for (int i = 0; i < hw; ++i) acc += static_cast<double>(src[i]);
        ys[p] = static_cast<real>(acc / hw);
    }
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        const real inv = real(1) / static_cast<real>(hw);
        g->record(y, [xh, yh, hw, inv]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t p = 0; p < dy.size(); ++p) {
                real* dst = dx.data() + p * static_cast<std::size_t>(hw);
                const real v = dy[p] * inv;
                for (int i = 0; i < hw; ++i) dst[i] += v;
            }
        });
    }
    return y;
}

Tensor upsample_nearest2(const Tensor& x) {
    check_nchw(x, "upsample_nearest2");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y = Tensor::zeros({n, c, 2 * h, 2 * w});
    auto xs = x.values();
    auto ys = y.mut();
    for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
        const real* src = xs.data() + p * static_cast<std::size_t>(h) * w;
        real* dst = ys.data() + p * static_cast<std::size_t>(4 * h) * w;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const real v = src[static_cast<std::size_t>(i) * w + j];
                real* base = dst + static_cast<std::size_t>(2 * i) * (2 * w) + 2 * j;
                base[0] = v;
                base[1] = v;
                base[2 * w] = v;
                base[2 * w + 1] = v;
            }
        }
    }
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto yh = y.handle();
        g->record(y, [xh, yh, n, c, h, w]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
                real* dst = dx.data() + p * static_cast<std::size_t>(h) * w;
                const real* src = dy.data() + p * static_cast<std::size_t>(4 * h) * w;
                for (int i = 0; i < h; ++i) {
                    for (int j = 0; j < w; ++j) {
                        const real* base = src + static_cast<std::size_t>(2 * i) * (2 * w) + 2 * j;
                        dst[static_cast<std::size_t>(i) * w + j] +=
                            base[0] + base[1] + base[2 * w] + base[2 * w + 1];
                    }
                }
            }
        });
    }
    return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2)
        fail("linear: expected x[N,K] and w[M,K], got " + shape_str(x.shape()) + " and " +
             shape_str(w.shape()));
    const int n = x.dim(0), k = x.dim(1), m = w.dim(0);
    if (w.dim(1) != k)
        fail("linear: inner extent mismatch, x axis 1 is " + std::to_string(k) + " but w axis 1 is " +
             std::to_string(w.dim(1)));
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != m))
        fail("linear: bias shape " + shape_str(b.shape()) + " does not match output width " +
             std::to_string(m));
    Tensor y = Tensor::zeros({n, m});
    auto xs = x.values();
    auto ws = w.values();
    auto ys = y.mut();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const real* xr = xs.data() + static_cast<std::size_t>(i) * k;
            const real* wr = ws.data() + static_cast<std::size_t>(j) * k;
            double acc = 0;
            for (int t = 0; t < k; ++t) acc += static_cast<double>(xr[t]) * wr[t];
            if (b.defined()) acc += static_cast<double>(b.values()[static_cast<std::size_t>(j)]);
            ys[static_cast<std::size_t>(i) * m + j] = static_cast<real>(acc);
        }
    }
    check_finite(y, "linear");
    Graph* g = Graph::current();
    if (g && (x.grad_needed() || w.grad_needed() || (b.defined() && b.grad_needed()))) {
        auto xh = x.handle();
        auto wh = w.handle();
        auto bh = b.defined() ? b.handle() : nullptr;
        auto yh = y.handle();
        const bool nx = x.grad_needed(), nw = w.grad_needed();
        const bool nb = b.defined() && b.grad_needed();
        g->record(y, [xh, wh, bh, yh, n, m, k, nx, nw, nb]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            if (nx) {
                auto dx = ensure_grad(xh);
                gemm_acc(dy.data(), wh->values.data(), dx.data(), n, m, k);
            }
            if (nw) {
                auto dw = ensure_grad(wh);
                gemm_tn_acc(dy.data(), xh->values.data(), dw.data(), n, m, k);
            }
            if (nb) {
                auto db = ensure_grad(bh);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j)
                        db[static_cast<std::size_t>(j)] += dy[static_cast<std::size_t>(i) * m + j];
            }
        });
    }
    return y;
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
    check_nchw(x, "scale_channels");
    const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (s.ndim() != 2 || s.dim(0) != n || s.dim(1) != c)
        fail("scale_channels: scale must be [N,C] = [" + std::to_string(n) + "," +
             std::to_string(c) + "], got " + shape_str(s.shape()));
    Tensor y = Tensor::zeros(x.shape());
    auto xs = x.values();
    auto ss = s.values();
    auto ys = y.mut();
    for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
        const real sv = ss[p];
        const real* src = xs.data() + p * static_cast<std::size_t>(hw);
        real* dst = ys.data() + p * static_cast<std::size_t>(hw);
        for (int i = 0; i < hw; ++i) dst[i] = src[i] * sv;
    }
    Graph* g = Graph::current();
    if (g && (x.grad_needed() || s.grad_needed())) {
        auto xh = x.handle();
        auto sh = s.handle();
        auto yh = y.handle();
        const bool nx = x.grad_needed(), ns = s.grad_needed();
        g->record(y, [xh, sh, yh, n, c, hw, nx, ns]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            std::span<real> dxs, dss;
            if (nx) dxs = ensure_grad(xh);
            if (ns) dss = ensure_grad(sh);
            for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
                const real* dyp = dy.data() + p * static_cast<std::size_t>(hw);
                if (nx) {
                    const real sv = sh->values[p];
                    real* dst = dxs.data() + p * static_cast<std::size_t>(hw);
                    for (int i = 0; i < hw; ++i) dst[i] += dyp[i] * sv;
                }
                if (ns) {
                    const real* src = xh->values.data() + p * static_cast<std::size_t>(hw);
                    double acc = 0;
                    for (int i = 0; i < hw; ++i) acc += static_cast<double>(dyp[i]) * src[i];
                    dss[p] += static_cast<real>(acc);
                }
            }
        });
    }
    return y;
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    if (s.numel() != 1) fail("scale_by: scale must be a single-element tensor");
    const real sv = s.values()[0];
    Tensor y = Tensor::zeros(x.shape());
    auto xs = x.values();
    auto ys = y.mut();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] * sv;
    Graph* g = Graph::current();
    if (g && (x.grad_needed() || s.grad_needed())) {
        auto xh = x.handle();
        auto sh = s.handle();
        auto yh = y.handle();
        const bool nx = x.grad_needed(), ns = s.grad_needed();
        g->record(y, [xh, sh, yh, nx, ns]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            if (nx) {
                auto dx = ensure_grad(xh);
                const real sv2 = sh->values[0];
                for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * sv2;
            }
            if (ns) {
                double acc = 0;
                for (std::size_t i = 0; i < dy.size(); ++i)
                    acc += static_cast<double>(dy[i]) * xh->values[i];
                ensure_grad(sh)[0] += static_cast<real>(acc);
            }
        });
    }
    return y;
}

Tensor filter2d_depthwise_valid(const Tensor& x, const Tensor& kernel) {
    check_nchw(x, "filter2d_depthwise_valid");
    if (kernel.ndim() != 2) fail("filter2d_depthwise_valid: kernel must be 2-D");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int kh = kernel.dim(0), kw = kernel.dim(1);
    if (h < kh || w < kw)
        fail("filter2d_depthwise_valid: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
             " larger than input plane " + std::to_string(h) + "x" + std::to_string(w));
    const int ho = h - kh + 1, wo = w - kw + 1;
    Tensor y = Tensor::zeros({n, c, ho, wo});
    auto xs = x.values();
    auto ks = kernel.values();
    auto ys = y.mut();
    for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
        const real* src = xs.data() + p * static_cast<std::size_t>(h) * w;
        real* dst = ys.data() + p * static_cast<std::size_t>(ho) * wo;
        for (int oh = 0; oh < ho; ++oh) {
            for (int ow = 0; ow < wo; ++ow) {
                double acc = 0;
                for (int ki = 0; ki < kh; ++ki) {
                    const real* row = src + static_cast<std::size_t>(oh + ki) * w + ow;
                    const real* kr = ks.data() + static_cast<std::size_t>(ki) * kw;
                    for (int kj = 0; kj < kw; ++kj) acc += static_cast<double>(row[kj]) * kr[kj];
                }
                dst[static_cast<std::size_t>(oh) * wo + ow] = static_cast<real>(acc);
            }
        }
    }
    Graph* g = Graph::current();
    if (g && x.grad_needed()) {
        auto xh = x.handle();
        auto kh_ = kernel.handle();
        auto yh = y.handle();
        g->record(y, [xh, kh_, yh, n, c, h, w, kh, kw, ho, wo]() {
            auto dy = out_grad(yh);
            if (dy.empty()) return;
            auto dx = ensure_grad(xh);
            for (std::size_t p = 0; p < static_cast<std::size_t>(n) * c; ++p) {
                real* dst = dx.data() + p * static_cast<std::size_t>(h) * w;
                const real* src = dy.data() + p * static_cast<std::size_t>(ho) * wo;
                for (int oh = 0; oh < ho; ++oh) {
                    for (int ow = 0; ow < wo; ++ow) {
                        const real dv = src[static_cast<std::size_t>(oh) * wo + ow];
                        for (int ki = 0; ki < kh; ++ki) {
                            real* row = dst + static_cast<std::size_t>(oh + ki) * w + ow;
                            const real* kr = kh_->values.data() + static_cast<std::size_t>(ki) * kw;
                            for (int kj = 0; kj < kw; ++kj) row[kj] += dv * kr[kj];
                        }
                    }
                }
            }
        });
    }
    return y;
}

}  // namespace cdrn
