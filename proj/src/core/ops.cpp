#include "core/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dasfft {

namespace {

void check3d(const Tensor& x, const char* where) {
    require(x.ndim() == 3, std::string(where) + ": expected a [C,H,W] tensor, got " + shape_str(x.shape));
}

struct ConvDims {
    int ci, h, w, co, kh, kw, ph, pw, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& k, Padding pad, int stride) {
    check3d(x, "conv2d input");
    require(k.ndim() == 4, "conv2d kernel must be [Co,Ci,kh,kw], got " + shape_str(k.shape));
    require(stride >= 1, "conv2d stride must be >= 1");
    ConvDims d{};
    d.ci = x.dim(0);
    d.h = x.dim(1);
    d.w = x.dim(2);
    d.co = k.dim(0);
    d.kh = k.dim(2);
    d.kw = k.dim(3);
    require(k.dim(1) == d.ci, "conv2d: kernel expects " + std::to_string(k.dim(1)) +
                                  " input channels, input has " + std::to_string(d.ci) +
                                  " (input " + shape_str(x.shape) + ", kernel " + shape_str(k.shape) + ")");
    if (pad == Padding::Same) {
        require(d.kh % 2 == 1 && d.kw % 2 == 1, "conv2d: same padding needs odd kernel extents, got " +
                                                    shape_str(k.shape));
        d.ph = (d.kh - 1) / 2;
        d.pw = (d.kw - 1) / 2;
    } else {
        d.ph = d.pw = 0;
        require(d.h >= d.kh && d.w >= d.kw,
                "conv2d: valid padding needs input >= kernel, input " + shape_str(x.shape) +
                    ", kernel " + shape_str(k.shape));
    }
    d.oh = (d.h + 2 * d.ph - d.kh) / stride + 1;
    d.ow = (d.w + 2 * d.pw - d.kw) / stride + 1;
    return d;
}

// Patch matrix of Q = ci*kh*kw rows by P = oh*ow columns; row q holds the
// input values the kernel tap q sees at each output position (zero padded).
// Turns the convolution into a matrix product with long contiguous rows,
// which matters at the small spatial sizes of the upper generator scales.
void im2col(const Tensor& x, const ConvDims& d, int stride, std::vector<double>& col) {
    const int P = d.oh * d.ow;
    col.assign(static_cast<std::size_t>(d.ci) * d.kh * d.kw * P, 0.0);
    std::size_t q = 0;
    for (int c = 0; c < d.ci; ++c) {
        for (int i = 0; i < d.kh; ++i) {
            for (int j = 0; j < d.kw; ++j, ++q) {
                double* dst = col.data() + q * P;
                for (int y = 0; y < d.oh; ++y) {
                    int yy = y * stride - d.ph + i;
                    if (yy < 0 || yy >= d.h) continue;
                    const double* irow = &x.at3(c, yy, 0);
                    if (stride == 1) {
                        int xlo = std::max(0, d.pw - j);
                        int xhi = std::min(d.ow, d.w + d.pw - j);
                        for (int x2 = xlo; x2 < xhi; ++x2)
                            dst[y * d.ow + x2] = irow[x2 - d.pw + j];
                    } else {
                        for (int x2 = 0; x2 < d.ow; ++x2) {
                            int xx = x2 * stride - d.pw + j;
                            if (xx >= 0 && xx < d.w) dst[y * d.ow + x2] = irow[xx];
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add patch-matrix gradients back to the input.
void col2im_add(const std::vector<double>& gcol, const ConvDims& d, int stride, Tensor& gx) {
    const int P = d.oh * d.ow;
    std::size_t q = 0;
    for (int c = 0; c < d.ci; ++c) {
        for (int i = 0; i < d.kh; ++i) {
            for (int j = 0; j < d.kw; ++j, ++q) {
                const double* src = gcol.data() + q * P;
                for (int y = 0; y < d.oh; ++y) {
                    int yy = y * stride - d.ph + i;
                    if (yy < 0 || yy >= d.h) continue;
                    double* grow = &gx.at3(c, yy, 0);
                    if (stride == 1) {
                        int xlo = std::max(0, d.pw - j);
                        int xhi = std::min(d.ow, d.w + d.pw - j);
                        for (int x2 = xlo; x2 < xhi; ++x2)
                            grow[x2 - d.pw + j] += src[y * d.ow + x2];
                    } else {
                        for (int x2 = 0; x2 < d.ow; ++x2) {
                            int xx = x2 * stride - d.pw + j;
                            if (xx >= 0 && xx < d.w) grow[xx] += src[y * d.ow + x2];
                        }
                    }
                }
            }
        }
    }
}

// Patch-matrix budget: large kernels on large inputs (the degradation blur
// path) stay on the direct per-row loops instead.
bool use_im2col(const ConvDims& d) {
    return static_cast<std::int64_t>(d.ci) * d.kh * d.kw * d.oh * d.ow <= (1 << 21);
}

Tensor conv2d_direct(const Tensor& x, const Tensor& k, const Tensor* bias, const ConvDims& d,
                     int stride) {
    Tensor out({d.co, d.oh, d.ow});
    for (int o = 0; o < d.co; ++o) {
        double b = bias ? bias->data[static_cast<std::size_t>(o)] : 0.0;
        for (int y = 0; y < d.oh; ++y) {
            double* orow = &out.at3(o, y, 0);
            for (int x2 = 0; x2 < d.ow; ++x2) orow[x2] = b;
            for (int c = 0; c < d.ci; ++c) {
                for (int i = 0; i < d.kh; ++i) {
                    int yy = y * stride - d.ph + i;
                    if (yy < 0 || yy >= d.h) continue;
                    const double* irow = &x.at3(c, yy, 0);
                    for (int j = 0; j < d.kw; ++j) {
                        double wv = k.data[((static_cast<std::size_t>(o) * d.ci + c) * d.kh + i) * d.kw + j];
                        if (wv == 0.0) continue;
                        // xx = x2*stride - pw + j must lie in [0, w)
                        if (stride == 1) {
                            int xlo = std::max(0, d.pw - j);
                            int xhi = std::min(d.ow, d.w + d.pw - j);
                            const double* src = irow + (xlo - d.pw + j);
                            for (int x2 = xlo; x2 < xhi; ++x2) orow[x2] += wv * src[x2 - xlo];
                        } else {
                            for (int x2 = 0; x2 < d.ow; ++x2) {
                                int xx = x2 * stride - d.pw + j;
                                if (xx >= 0 && xx < d.w) orow[x2] += wv * irow[xx];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

Tensor conv2d_fwd(const Tensor& x, const Tensor& k, const Tensor* bias, Padding pad, int stride) {
    ConvDims d = conv_dims(x, k, pad, stride);
    if (bias) require(bias->size() == d.co, "conv2d: bias length != output channels");
    if (!use_im2col(d)) return conv2d_direct(x, k, bias, d, stride);
    const int P = d.oh * d.ow;
    const int Q = d.ci * d.kh * d.kw;
    std::vector<double> col;
    im2col(x, d, stride, col);
    Tensor out({d.co, d.oh, d.ow});
    for (int o = 0; o < d.co; ++o) {
        double* orow = out.data.data() + static_cast<std::size_t>(o) * P;
        double b = bias ? bias->data[static_cast<std::size_t>(o)] : 0.0;
        for (int p = 0; p < P; ++p) orow[p] = b;
    }
    // q-major so each patch row streams through once and the co output rows
    // stay cache resident
    for (int q = 0; q < Q; ++q) {
        const double* __restrict crow = col.data() + static_cast<std::size_t>(q) * P;
        for (int o = 0; o < d.co; ++o) {
            double wv = k.data[static_cast<std::size_t>(o) * Q + q];
            if (wv == 0.0) continue;
            double* __restrict orow = out.data.data() + static_cast<std::size_t>(o) * P;
            for (int p = 0; p < P; ++p) orow[p] += wv * crow[p];
        }
    }
    return out;
}

Var conv2d(Tape& t, Var x, Var k, Var bias, Padding pad, int stride) {
    const Tensor* bp = bias >= 0 ? &t.val(bias) : nullptr;
    Tensor out = conv2d_fwd(t.val(x), t.val(k), bp, pad, stride);
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& xv = tp.val(x);
        const Tensor& kv = tp.val(k);
        ConvDims d = conv_dims(xv, kv, pad, stride);
        const Tensor& g = tp.grad(id);
        Tensor& gx = tp.grad(x);
        Tensor& gk = tp.grad(k);
        if (use_im2col(d)) {
            const int P = d.oh * d.ow;
            const int Q = d.ci * d.kh * d.kw;
            std::vector<double> col;
            im2col(xv, d, stride, col);
            std::vector<double> gcol(static_cast<std::size_t>(Q) * P, 0.0);
            for (int q = 0; q < Q; ++q) {
                const double* __restrict crow = col.data() + static_cast<std::size_t>(q) * P;
                double* __restrict gcrow = gcol.data() + static_cast<std::size_t>(q) * P;
                for (int o = 0; o < d.co; ++o) {
                    const double* __restrict grow = g.data.data() + static_cast<std::size_t>(o) * P;
                    double wv = kv.data[static_cast<std::size_t>(o) * Q + q];
                    if (wv != 0.0)
                        for (int p = 0; p < P; ++p) gcrow[p] += wv * grow[p];
                    double acc = 0.0;
                    for (int p = 0; p < P; ++p) acc += grow[p] * crow[p];
                    gk.data[static_cast<std::size_t>(o) * Q + q] += acc;
                }
            }
            col2im_add(gcol, d, stride, gx);
        } else {
            for (int o = 0; o < d.co; ++o) {
                for (int y = 0; y < d.oh; ++y) {
                    const double* grow = &g.at3(o, y, 0);
                    for (int c = 0; c < d.ci; ++c) {
                        for (int i = 0; i < d.kh; ++i) {
                            int yy = y * stride - d.ph + i;
                            if (yy < 0 || yy >= d.h) continue;
                            const double* irow = &xv.at3(c, yy, 0);
                            double* gxrow = &gx.at3(c, yy, 0);
                            for (int j = 0; j < d.kw; ++j) {
                                std::size_t kidx =
                                    ((static_cast<std::size_t>(o) * d.ci + c) * d.kh + i) * d.kw + j;
                                double wv = kv.data[kidx];
                                double gkacc = 0.0;
                                for (int x2 = 0; x2 < d.ow; ++x2) {
                                    int xx = x2 * stride - d.pw + j;
                                    if (xx < 0 || xx >= d.w) continue;
                                    gxrow[xx] += grow[x2] * wv;
                                    gkacc += grow[x2] * irow[xx];
                                }
                                gk.data[kidx] += gkacc;
                            }
                        }
                    }
                }
            }
        }
        if (bias >= 0) {
            Tensor& gb = tp.grad(bias);
            for (int o = 0; o < d.co; ++o) {
                double acc = 0.0;
                for (int y = 0; y < d.oh; ++y)
                    for (int x2 = 0; x2 < d.ow; ++x2) acc += g.at3(o, y, x2);
                gb.data[static_cast<std::size_t>(o)] += acc;
            }
        }
    });
    return id;
}

Var add(Tape& t, Var a, Var b) {
    require_same_shape(t.val(a), t.val(b), "add");
    Tensor out = t.val(a);
    const Tensor& bv = t.val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i];
            gb.data[i] += g.data[i];
        }
    });
    return id;
}

Var sub(Tape& t, Var a, Var b) {
    require_same_shape(t.val(a), t.val(b), "sub");
    Tensor out = t.val(a);
    const Tensor& bv = t.val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i];
            gb.data[i] -= g.data[i];
        }
    });
    return id;
}

Var mul(Tape& t, Var a, Var b) {
    require_same_shape(t.val(a), t.val(b), "mul");
    Tensor out = t.val(a);
    const Tensor& bv = t.val(b);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& av = tp.val(a);
        const Tensor& bv2 = tp.val(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i] * bv2.data[i];
            gb.data[i] += g.data[i] * av.data[i];
        }
    });
    return id;
}

Var affine(Tape& t, Var a, double m, double c) {
    Tensor out = t.val(a);
    for (double& v : out.data) v = m * v + c;
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += m * g.data[i];
    });
    return id;
}

Var scale(Tape& t, Var a, double m) { return affine(t, a, m, 0.0); }

Var pointwise(Tape& t, Var a, Pointwise fn) {
    Tensor out = t.val(a);
    if (fn == Pointwise::Relu) {
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    } else {
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    }
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& y = tp.val(id);
        Tensor& ga = tp.grad(a);
        if (fn == Pointwise::Relu) {
            const Tensor& xv = tp.val(a);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (xv.data[i] > 0.0) ga.data[i] += g.data[i];
        } else {
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
        }
    });
    return id;
}

Var linear(Tape& t, Var x, Var W, Var bias) {
    const Tensor& xv = t.val(x);
    const Tensor& wv = t.val(W);
    require(wv.ndim() == 2, "linear: weight must be [m,n]");
    require(xv.size() == wv.dim(1), "linear: weight " + shape_str(wv.shape) + " vs input length " +
                                        std::to_string(xv.size()));
    int m = wv.dim(0), n = wv.dim(1);
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = bias >= 0 ? t.val(bias).data[static_cast<std::size_t>(i)] : 0.0;
        const double* row = &wv.data[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) acc += row[j] * xv.data[static_cast<std::size_t>(j)];
        out.data[static_cast<std::size_t>(i)] = acc;
    }
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv2 = tp.val(x);
        const Tensor& wv2 = tp.val(W);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(W);
        for (int i = 0; i < m; ++i) {
            double gi = g.data[static_cast<std::size_t>(i)];
            const double* row = &wv2.data[static_cast<std::size_t>(i) * n];
            double* grow = &gw.data[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                gx.data[static_cast<std::size_t>(j)] += gi * row[j];
                grow[j] += gi * xv2.data[static_cast<std::size_t>(j)];
            }
        }
        if (bias >= 0) {
            Tensor& gb = tp.grad(bias);
            for (int i = 0; i < m; ++i) gb.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)];
        }
    });
    return id;
}

Var global_avg_pool(Tape& t, Var x) {
    const Tensor& xv = t.val(x);
    check3d(xv, "global_avg_pool");
    int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const double* p = &xv.data[static_cast<std::size_t>(ch) * hw];
        for (int i = 0; i < hw; ++i) acc += p[i];
        out.data[static_cast<std::size_t>(ch)] = acc / hw;
    }
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& gx = tp.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            double gi = g.data[static_cast<std::size_t>(ch)] / hw;
            double* p = &gx.data[static_cast<std::size_t>(ch) * hw];
            for (int i = 0; i < hw; ++i) p[i] += gi;
        }
    });
    return id;
}

namespace {

// align-corners-false source coordinate with edge clamping
struct LerpIdx {
    int i0, i1;
    double f;  // weight of i1
};

LerpIdx lerp_idx(int out_i, int out_n, int in_n) {
    double src = (out_i + 0.5) * (static_cast<double>(in_n) / out_n) - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > in_n - 1) src = in_n - 1;
    int i0 = static_cast<int>(std::floor(src));
    int i1 = std::min(i0 + 1, in_n - 1);
    return {i0, i1, src - i0};
}

}  // namespace

Tensor resize_bilinear_fwd(const Tensor& x, int out_h, int out_w) {
    check3d(x, "resize_bilinear");
    require(out_h >= 1 && out_w >= 1, "resize_bilinear: output extents must be positive");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, out_h, out_w});
    for (int y = 0; y < out_h; ++y) {
        LerpIdx ly = lerp_idx(y, out_h, h);
        for (int xx = 0; xx < out_w; ++xx) {
            LerpIdx lx = lerp_idx(xx, out_w, w);
            for (int ch = 0; ch < c; ++ch) {
                double v00 = x.at3(ch, ly.i0, lx.i0), v01 = x.at3(ch, ly.i0, lx.i1);
                double v10 = x.at3(ch, ly.i1, lx.i0), v11 = x.at3(ch, ly.i1, lx.i1);
                double top = v00 + (v01 - v00) * lx.f;
                double bot = v10 + (v11 - v10) * lx.f;
                out.at3(ch, y, xx) = top + (bot - top) * ly.f;
            }
        }
    }
    return out;
}

Var resize_bilinear(Tape& t, Var x, int out_h, int out_w) {
    Tensor out = resize_bilinear_fwd(t.val(x), out_h, out_w);
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& xv = tp.val(x);
        int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
        const Tensor& g = tp.grad(id);
        Tensor& gx = tp.grad(x);
        for (int y = 0; y < out_h; ++y) {
            LerpIdx ly = lerp_idx(y, out_h, h);
            for (int xx = 0; xx < out_w; ++xx) {
                LerpIdx lx = lerp_idx(xx, out_w, w);
                for (int ch = 0; ch < c; ++ch) {
                    double gi = g.at3(ch, y, xx);
                    gx.at3(ch, ly.i0, lx.i0) += gi * (1 - ly.f) * (1 - lx.f);
                    gx.at3(ch, ly.i0, lx.i1) += gi * (1 - ly.f) * lx.f;
                    gx.at3(ch, ly.i1, lx.i0) += gi * ly.f * (1 - lx.f);
                    gx.at3(ch, ly.i1, lx.i1) += gi * ly.f * lx.f;
                }
            }
        }
    });
    return id;
}

Tensor upsample_fwd(const Tensor& x, int factor, Resample mode) {
    check3d(x, "upsample");
    require(factor >= 1, "upsample factor must be >= 1");
    if (factor == 1) return x;
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (mode == Resample::Bilinear) return resize_bilinear_fwd(x, h * factor, w * factor);
    Tensor out({c, h * factor, w * factor});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h * factor; ++y)
            for (int xx = 0; xx < w * factor; ++xx) out.at3(ch, y, xx) = x.at3(ch, y / factor, xx / factor);
    return out;
}

Var upsample(Tape& t, Var x, int factor, Resample mode) {
    require(factor >= 1, "upsample factor must be >= 1");
    const Tensor& xv = t.val(x);
    check3d(xv, "upsample");
    if (mode == Resample::Bilinear && factor > 1)
        return resize_bilinear(t, x, xv.dim(1) * factor, xv.dim(2) * factor);
    Tensor out = upsample_fwd(xv, factor, mode);
    int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& gx = tp.grad(x);
        if (factor == 1) {
            for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
            return;
        }
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h * factor; ++y)
                for (int xx = 0; xx < w * factor; ++xx)
                    gx.at3(ch, y / factor, xx / factor) += g.at3(ch, y, xx);
    });
    return id;
}

Var concat_channels(Tape& t, const std::vector<Var>& xs) {
    require(!xs.empty(), "concat_channels: empty input list");
    const Tensor& first = t.val(xs[0]);
    check3d(first, "concat_channels");
    int h = first.dim(1), w = first.dim(2), ctot = 0;
    for (Var v : xs) {
        const Tensor& xv = t.val(v);
        check3d(xv, "concat_channels");
        require(xv.dim(1) == h && xv.dim(2) == w,
                "concat_channels: spatial mismatch " + shape_str(xv.shape) + " vs " + shape_str(first.shape));
        ctot += xv.dim(0);
    }
    Tensor out({ctot, h, w});
    std::size_t off = 0;
    for (Var v : xs) {
        const Tensor& xv = t.val(v);
        std::copy(xv.data.begin(), xv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += xv.data.size();
    }
    std::vector<Var> parents = xs;
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        std::size_t o = 0;
        for (Var v : parents) {
            Tensor& gx = tp.grad(v);
            for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[o + i];
            o += gx.data.size();
        }
    });
    return id;
}

Var slice0(Tape& t, Var x, int lo, int hi) {
    const Tensor& xv = t.val(x);
    require(lo >= 0 && hi > lo && hi <= xv.dim(0), "slice0: bad range");
    std::vector<int> oshape = xv.shape;
    oshape[0] = hi - lo;
    std::size_t inner = static_cast<std::size_t>(shape_numel(xv.shape)) / xv.dim(0);
    Tensor out(oshape);
    std::copy(xv.data.begin() + static_cast<std::ptrdiff_t>(lo * inner),
              xv.data.begin() + static_cast<std::ptrdiff_t>(hi * inner), out.data.begin());
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& gx = tp.grad(x);
        for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[lo * inner + i] += g.data[i];
    });
    return id;
}

void channel_stats_fwd(const Tensor& x, std::vector<double>& mu, std::vector<double>& sigma) {
    check3d(x, "channel_stats");
    int c = x.dim(0), hw = x.dim(1) * x.dim(2);
    mu.assign(static_cast<std::size_t>(c), 0.0);
    sigma.assign(static_cast<std::size_t>(c), 0.0);
    for (int ch = 0; ch < c; ++ch) {
        const double* p = &x.data[static_cast<std::size_t>(ch) * hw];
        double s = 0.0;
        for (int i = 0; i < hw; ++i) s += p[i];
        double m = s / hw;
        double ss = 0.0;
        for (int i = 0; i < hw; ++i) {
            double d = p[i] - m;
            ss += d * d;
        }
        mu[static_cast<std::size_t>(ch)] = m;
        sigma[static_cast<std::size_t>(ch)] = std::sqrt(ss / hw);
    }
}

Var channel_mean(Tape& t, Var x) {
    std::vector<double> mu, sig;
    channel_stats_fwd(t.val(x), mu, sig);
    int c = t.val(x).dim(0), hw = t.val(x).dim(1) * t.val(x).dim(2);
    Var id = t.push(Tensor::from_vector(mu));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& gx = tp.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            double gi = g.data[static_cast<std::size_t>(ch)] / hw;
            double* p = &gx.data[static_cast<std::size_t>(ch) * hw];
            for (int i = 0; i < hw; ++i) p[i] += gi;
        }
    });
    return id;
}

Var channel_std(Tape& t, Var x) {
    std::vector<double> mu, sig;
    channel_stats_fwd(t.val(x), mu, sig);
    int c = t.val(x).dim(0), hw = t.val(x).dim(1) * t.val(x).dim(2);
    std::vector<double> mu_copy = mu, sig_copy = sig;
    Var id = t.push(Tensor::from_vector(sig));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv = tp.val(x);
        Tensor& gx = tp.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            double s = sig_copy[static_cast<std::size_t>(ch)];
            if (s <= 0.0) continue;  // subgradient 0 at the constant-channel point
            double gi = g.data[static_cast<std::size_t>(ch)] / (hw * s);
            const double* p = &xv.data[static_cast<std::size_t>(ch) * hw];
            double* gp = &gx.data[static_cast<std::size_t>(ch) * hw];
            double m = mu_copy[static_cast<std::size_t>(ch)];
            for (int i = 0; i < hw; ++i) gp[i] += gi * (p[i] - m);
        }
    });
    return id;
}

Var renorm(Tape& t, Var x, Var s, Var b, double eps) {
    const Tensor& xv = t.val(x);
    check3d(xv, "renorm");
    int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    require(t.val(s).size() == c && t.val(b).size() == c,
            "renorm: scale/bias length must equal channel count " + std::to_string(c));
    std::vector<double> mu, sig;
    channel_stats_fwd(xv, mu, sig);
    Tensor out(xv.shape);
    for (int ch = 0; ch < c; ++ch) {
        double d = sig[static_cast<std::size_t>(ch)] + eps;
        double sc = t.val(s).data[static_cast<std::size_t>(ch)];
        double bi = t.val(b).data[static_cast<std::size_t>(ch)];
        double m = mu[static_cast<std::size_t>(ch)];
        const double* p = &xv.data[static_cast<std::size_t>(ch) * hw];
        double* q = &out.data[static_cast<std::size_t>(ch) * hw];
        for (int i = 0; i < hw; ++i) q[i] = sc * (p[i] - m) / d + bi;
    }
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv2 = tp.val(x);
        const Tensor& sv = tp.val(s);
        Tensor& gx = tp.grad(x);
        Tensor& gs = tp.grad(s);
        Tensor& gb = tp.grad(b);
        std::vector<double> mu2, sig2;
        channel_stats_fwd(xv2, mu2, sig2);
        for (int ch = 0; ch < c; ++ch) {
            double sg = sig2[static_cast<std::size_t>(ch)];
            double d = sg + eps;
            double m = mu2[static_cast<std::size_t>(ch)];
            double sc = sv.data[static_cast<std::size_t>(ch)];
            const double* p = &xv2.data[static_cast<std::size_t>(ch) * hw];
            const double* gp = &g.data[static_cast<std::size_t>(ch) * hw];
            double* gxp = &gx.data[static_cast<std::size_t>(ch) * hw];
            double gsum = 0.0, gxhat = 0.0;
            for (int i = 0; i < hw; ++i) {
                gsum += gp[i];
                gxhat += gp[i] * (p[i] - m) / d;
            }
            gs.data[static_cast<std::size_t>(ch)] += gxhat;
            gb.data[static_cast<std::size_t>(ch)] += gsum;
            double gmean = gsum / hw;
            for (int i = 0; i < hw; ++i) {
                double v = (sc / d) * (gp[i] - gmean);
                if (sg > 0.0) v -= sc * (p[i] - m) * gxhat / (hw * sg * d);
                gxp[i] += v;
            }
        }
    });
    return id;
}

Var mul_broadcast_map(Tape& t, Var x, Var w) {
    const Tensor& xv = t.val(x);
    const Tensor& wv = t.val(w);
    check3d(xv, "mul_broadcast_map");
    require(wv.ndim() == 3 && wv.dim(0) == 1 && wv.dim(1) == xv.dim(1) && wv.dim(2) == xv.dim(2),
            "mul_broadcast_map: weight map must be [1,H,W] matching " + shape_str(xv.shape));
    int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    Tensor out(xv.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i)
            out.data[static_cast<std::size_t>(ch) * hw + i] =
                xv.data[static_cast<std::size_t>(ch) * hw + i] * wv.data[static_cast<std::size_t>(i)];
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& xv2 = tp.val(x);
        const Tensor& wv2 = tp.val(w);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(w);
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < hw; ++i) {
                std::size_t xi = static_cast<std::size_t>(ch) * hw + i;
                gx.data[xi] += g.data[xi] * wv2.data[static_cast<std::size_t>(i)];
                gw.data[static_cast<std::size_t>(i)] += g.data[xi] * xv2.data[xi];
            }
    });
    return id;
}

Var reshape(Tape& t, Var x, std::vector<int> shape) {
    require(shape_numel(shape) == t.val(x).size(),
            "reshape: element count mismatch " + shape_str(t.val(x).shape) + " -> " + shape_str(shape));
    Tensor out;
    out.shape = shape;
    out.data = t.val(x).data;
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        Tensor& gx = tp.grad(x);
        for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
    });
    return id;
}

Var sum(Tape& t, Var x) {
    double acc = 0.0;
    for (double v : t.val(x).data) acc += v;
    Var id = t.push(Tensor::scalar(acc));
    t.set_back(id, [=](Tape& tp) {
        double g = tp.grad(id).data[0];
        Tensor& gx = tp.grad(x);
        for (double& v : gx.data) v += g;
    });
    return id;
}

Var mse(Tape& t, Var a, Var b) {
    require_same_shape(t.val(a), t.val(b), "mse");
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < av.data.size(); ++i) {
        double d = av.data[i] - bv.data[i];
        acc += d * d;
    }
    double n = static_cast<double>(av.data.size());
    Var id = t.push(Tensor::scalar(acc / n));
    t.set_back(id, [=](Tape& tp) {
        double g = tp.grad(id).data[0];
        const Tensor& av2 = tp.val(a);
        const Tensor& bv2 = tp.val(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        double c2 = 2.0 * g / n;
        for (std::size_t i = 0; i < av2.data.size(); ++i) {
            double d = c2 * (av2.data[i] - bv2.data[i]);
            ga.data[i] += d;
            gb.data[i] -= d;
        }
    });
    return id;
}

Var masked_gram(Tape& t, Var feat, const Tensor& mask) {
    const Tensor& fv = t.val(feat);
    check3d(fv, "masked_gram");
    require(mask.ndim() == 3 && mask.dim(0) == 1 && mask.dim(1) == fv.dim(1) && mask.dim(2) == fv.dim(2),
            "masked_gram: mask must be [1,H,W] matching " + shape_str(fv.shape));
    int c = fv.dim(0), hw = fv.dim(1) * fv.dim(2);
    double msum = 0.0;
    for (double v : mask.data) msum += v;
    double norm = std::max(1.0, msum);
    // masked feature rows
    Tensor fm(fv.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i)
            fm.data[static_cast<std::size_t>(ch) * hw + i] =
                fv.data[static_cast<std::size_t>(ch) * hw + i] * mask.data[static_cast<std::size_t>(i)];
    Tensor out({c, c});
    for (int a = 0; a < c; ++a) {
        const double* pa = &fm.data[static_cast<std::size_t>(a) * hw];
        for (int b = a; b < c; ++b) {
            const double* pb = &fm.data[static_cast<std::size_t>(b) * hw];
            double acc = 0.0;
            for (int i = 0; i < hw; ++i) acc += pa[i] * pb[i];
            out.at2(a, b) = acc / norm;
            out.at2(b, a) = acc / norm;
        }
    }
    Tensor mask_copy = mask;
    Var id = t.push(std::move(out));
    t.set_back(id, [=](Tape& tp) {
        const Tensor& g = tp.grad(id);
        const Tensor& fv2 = tp.val(feat);
        Tensor& gf = tp.grad(feat);
        // d/dF[a,p] = mask[p]/norm * sum_b (g[a,b] + g[b,a]) * mask[p]*F[b,p]
        for (int a = 0; a < c; ++a) {
            double* gp = &gf.data[static_cast<std::size_t>(a) * hw];
            for (int b = 0; b < c; ++b) {
                double gw = (g.at2(a, b) + g.at2(b, a)) / norm;
                if (gw == 0.0) continue;
                const double* pb = &fv2.data[static_cast<std::size_t>(b) * hw];
                for (int i = 0; i < hw; ++i) {
                    double m = mask_copy.data[static_cast<std::size_t>(i)];
                    gp[i] += gw * m * m * pb[i];
                }
            }
        }
    });
    return id;
}

}  // namespace dasfft
