#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>

#include "core/fdgrad.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "harness/harness.hpp"
#include "losses/losses.hpp"
#include "sfft/sfft.hpp"

namespace dasfft {

namespace {

constexpr double kTol = 1e-4;

struct Checker {
    std::ostream& os;
    int failures = 0;

    void report(const std::string& name, double err) {
        bool ok = std::isfinite(err) && err < kTol;
        if (!ok) ++failures;
        os << (ok ? "pass" : "FAIL") << "  " << name << "  rel_err=" << std::setprecision(3)
           << std::scientific << err << std::defaultfloat << "\n";
    }
};

Tensor randt(Rng rng, std::vector<int> shape, double lo, double hi) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Values with magnitude bounded away from 0 (safe for relu kinks under FD).
Tensor randt_signed(Rng rng, std::vector<int> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    return t;
}

Var proj_sum(Tape& t, Var y, const Tensor& proj) { return sum(t, mul(t, y, t.leaf(proj))); }

// Scalar function of one varying leaf; everything else is closed over.
void check_input(Checker& gc, const std::string& name, const Tensor& x0,
                 const std::function<Var(Tape&, Var)>& fwd) {
    auto f = [&](const Tensor& x) {
        Tape t;
        Var xi = t.leaf(x);
        return t.val(fwd(t, xi)).data[0];
    };
    Tape t;
    Var xi = t.leaf(x0);
    Var y = fwd(t, xi);
    t.backward(y);
    gc.report(name, grad_rel_err(t.grad(xi), finite_diff_grad(f, x0)));
}

// Scalar function of one named store parameter.
void check_param(Checker& gc, const std::string& name, const ParamStore& store,
                 const std::string& pname, const std::function<Var(FwdCtx&)>& fwd) {
    auto f = [&](const Tensor& x) {
        ParamStore s = store;
        s.value(pname) = x;
        Tape t;
        FwdCtx ctx(t, s);
        return t.val(fwd(ctx)).data[0];
    };
    ParamStore s = store;
    Tape t;
    FwdCtx ctx(t, s);
    Var y = fwd(ctx);
    t.backward(y);
    require(ctx.used.count(pname) != 0, "gradcheck: parameter unused: " + pname);
    Tensor analytic = t.grad(ctx.used.at(pname));
    gc.report(name, grad_rel_err(analytic, finite_diff_grad(f, store.at(pname).value)));
}

std::vector<int> toy_parsing(int res) {
    std::vector<int> p(static_cast<std::size_t>(res * res));
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) p[static_cast<std::size_t>(y * res + x)] = (x + y) % 5;
    return p;
}

}  // namespace

int run_gradcheck(std::ostream& os) {
    Checker gc{os};
    Rng rng(20240817);

    // elementwise algebra
    {
        Tensor x0 = randt(rng.sub("ew"), {2, 3, 3}, -1, 1);
        Tensor c = randt(rng.sub("ewc"), {2, 3, 3}, -1, 1);
        check_input(gc, "elementwise add/sub/mul/affine/scale", x0, [&](Tape& t, Var x) {
            Var v = affine(t, add(t, x, t.leaf(c)), 1.7, 0.3);
            v = mul(t, v, sub(t, x, t.leaf(c)));
            return sum(t, scale(t, v, 0.5));
        });
    }
    {
        Tensor x0 = randt_signed(rng.sub("relu"), {3, 4, 4});
        Tensor pr = randt(rng.sub("relup"), {3, 4, 4}, -1, 1);
        check_input(gc, "relu", x0,
                    [&](Tape& t, Var x) { return proj_sum(t, pointwise(t, x, Pointwise::Relu), pr); });
        check_input(gc, "sigmoid", x0, [&](Tape& t, Var x) {
            return proj_sum(t, pointwise(t, x, Pointwise::Sigmoid), pr);
        });
    }

    // convolution
    {
        Tensor x0 = randt(rng.sub("cx"), {2, 6, 6}, -1, 1);
        Tensor k0 = randt(rng.sub("ck"), {3, 2, 3, 3}, -0.5, 0.5);
        Tensor b0 = randt(rng.sub("cb"), {3}, -0.5, 0.5);
        Tensor pr = randt(rng.sub("cp"), {3, 6, 6}, -1, 1);
        Tensor prs = randt(rng.sub("cps"), {3, 3, 3}, -1, 1);
        Tensor prv = randt(rng.sub("cpv"), {3, 4, 4}, -1, 1);
        check_input(gc, "conv2d same: input", x0, [&](Tape& t, Var x) {
            return proj_sum(t, conv2d(t, x, t.leaf(k0), t.leaf(b0), Padding::Same), pr);
        });
        check_input(gc, "conv2d same: kernel", k0, [&](Tape& t, Var k) {
            return proj_sum(t, conv2d(t, t.leaf(x0), k, t.leaf(b0), Padding::Same), pr);
        });
        check_input(gc, "conv2d same: bias", b0, [&](Tape& t, Var b) {
            return proj_sum(t, conv2d(t, t.leaf(x0), t.leaf(k0), b, Padding::Same), pr);
        });
        check_input(gc, "conv2d same stride 2: input", x0, [&](Tape& t, Var x) {
            return proj_sum(t, conv2d(t, x, t.leaf(k0), t.leaf(b0), Padding::Same, 2), prs);
        });
        check_input(gc, "conv2d valid: input", x0, [&](Tape& t, Var x) {
            return proj_sum(t, conv2d(t, x, t.leaf(k0), t.leaf(b0), Padding::Valid), prv);
        });
    }

    // linear
    {
        Tensor x0 = randt(rng.sub("lx"), {5}, -1, 1);
        Tensor w0 = randt(rng.sub("lw"), {3, 5}, -1, 1);
        Tensor b0 = randt(rng.sub("lb"), {3}, -1, 1);
        Tensor pr = randt(rng.sub("lp"), {3}, -1, 1);
        check_input(gc, "linear: input", x0, [&](Tape& t, Var x) {
            return proj_sum(t, linear(t, x, t.leaf(w0), t.leaf(b0)), pr);
        });
        check_input(gc, "linear: weight", w0, [&](Tape& t, Var w) {
            return proj_sum(t, linear(t, t.leaf(x0), w, t.leaf(b0)), pr);
        });
        check_input(gc, "linear: bias", b0, [&](Tape& t, Var b) {
            return proj_sum(t, linear(t, t.leaf(x0), t.leaf(w0), b), pr);
        });
    }

    // pooling / resampling / shaping
    {
        Tensor x0 = randt(rng.sub("gap"), {3, 4, 4}, -1, 1);
        Tensor pr = randt(rng.sub("gapp"), {3}, -1, 1);
        check_input(gc, "global_avg_pool", x0,
                    [&](Tape& t, Var x) { return proj_sum(t, global_avg_pool(t, x), pr); });
    }
    {
        Tensor x0 = randt(rng.sub("up"), {2, 3, 3}, -1, 1);
        Tensor pr = randt(rng.sub("upp"), {2, 6, 6}, -1, 1);
        check_input(gc, "upsample bilinear x2", x0, [&](Tape& t, Var x) {
            return proj_sum(t, upsample(t, x, 2, Resample::Bilinear), pr);
        });
        check_input(gc, "upsample nearest x2", x0, [&](Tape& t, Var x) {
            return proj_sum(t, upsample(t, x, 2, Resample::Nearest), pr);
        });
        Tensor pr2 = randt(rng.sub("rsp"), {2, 5, 4}, -1, 1);
        check_input(gc, "resize_bilinear 3x3 -> 5x4", x0, [&](Tape& t, Var x) {
            return proj_sum(t, resize_bilinear(t, x, 5, 4), pr2);
        });
    }
    {
        Tensor x0 = randt(rng.sub("cc"), {2, 3, 3}, -1, 1);
        Tensor c = randt(rng.sub("ccc"), {2, 3, 3}, -1, 1);
        Tensor pr = randt(rng.sub("ccp"), {3, 3, 3}, -1, 1);
        check_input(gc, "concat_channels + slice0", x0, [&](Tape& t, Var x) {
            Var cat = concat_channels(t, {x, t.leaf(c)});
            return proj_sum(t, slice0(t, cat, 1, 4), pr);
        });
    }

    // statistics and the feature transform core
    {
        Tensor x0 = randt(rng.sub("st"), {3, 4, 4}, -1, 1);
        Tensor pr = randt(rng.sub("stp"), {3}, -1, 1);
        check_input(gc, "channel_mean", x0,
                    [&](Tape& t, Var x) { return proj_sum(t, channel_mean(t, x), pr); });
        check_input(gc, "channel_std", x0,
                    [&](Tape& t, Var x) { return proj_sum(t, channel_std(t, x), pr); });
        Tensor s0 = randt(rng.sub("sts"), {3}, 0.5, 1.5);
        Tensor b0 = randt(rng.sub("stb"), {3}, -0.5, 0.5);
        Tensor prm = randt(rng.sub("stpm"), {3, 4, 4}, -1, 1);
        check_input(gc, "feature renorm: input", x0, [&](Tape& t, Var x) {
            return proj_sum(t, renorm(t, x, t.leaf(s0), t.leaf(b0), kSftEps), prm);
        });
        check_input(gc, "feature renorm: scale", s0, [&](Tape& t, Var s) {
            return proj_sum(t, renorm(t, t.leaf(x0), s, t.leaf(b0), kSftEps), prm);
        });
        check_input(gc, "feature renorm: bias", b0, [&](Tape& t, Var b) {
            return proj_sum(t, renorm(t, t.leaf(x0), t.leaf(s0), b, kSftEps), prm);
        });
    }
    {
        Tensor x0 = randt(rng.sub("bm"), {3, 4, 4}, -1, 1);
        Tensor w0 = randt(rng.sub("bmw"), {1, 4, 4}, -1, 1);
        Tensor pr = randt(rng.sub("bmp"), {3, 4, 4}, -1, 1);
        check_input(gc, "mul_broadcast_map: input", x0, [&](Tape& t, Var x) {
            return proj_sum(t, mul_broadcast_map(t, x, t.leaf(w0)), pr);
        });
        check_input(gc, "mul_broadcast_map: map", w0, [&](Tape& t, Var w) {
            return proj_sum(t, mul_broadcast_map(t, t.leaf(x0), w), pr);
        });
    }
    {
        Tensor a0 = randt(rng.sub("mse"), {2, 3, 3}, -1, 1);
        Tensor b = randt(rng.sub("mseb"), {2, 3, 3}, -1, 1);
        check_input(gc, "mse", a0, [&](Tape& t, Var a) { return mse(t, a, t.leaf(b)); });
    }
    {
        Tensor f0 = randt(rng.sub("gram"), {3, 4, 4}, -1, 1);
        Tensor mask = Tensor::zeros({1, 4, 4});
        for (int i = 0; i < 16; ++i) mask.data[static_cast<std::size_t>(i)] = (i % 2 == 0) ? 1.0 : 0.0;
        Tensor pr = randt(rng.sub("gramp"), {3, 3}, -1, 1);
        check_input(gc, "masked_gram: feature", f0, [&](Tape& t, Var f) {
            return proj_sum(t, masked_gram(t, f, mask), pr);
        });
    }

    // SFFT stacks
    const int c = 4;
    {
        ParamStore store;
        init_sff_stack(store, "psff", 4, c, 7);
        ComponentCrop crop{1, randt(rng.sub("crop"), {3, 5, 5}, 0, 1),
                           randt(rng.sub("cropm"), {1, 5, 5}, 0, 1)};
        Tensor pr = randt(rng.sub("psffp"), {c}, -1, 1);
        for (const std::string& pn : {std::string("psff/conv0.w"), std::string("psff/conv3.w")}) {
            check_param(gc, "component feature stack: " + pn, store, pn, [&](FwdCtx& ctx) {
                auto [ys, yb] = sff_extract(ctx, crop, "psff", c);
                return add(ctx.tape, proj_sum(ctx.tape, ys, pr), proj_sum(ctx.tape, yb, pr));
            });
        }
    }
    {
        ParamStore store;
        init_attention_stack(store, "att", 2 * c, 2, 7);
        init_sff_stack(store, "fuse", c, c, 9);
        Tensor m0 = randt(rng.sub("am0"), {c, 4, 4}, -1, 1);
        Tensor m1 = randt(rng.sub("am1"), {c, 4, 4}, -1, 1);
        Tensor pr = randt(rng.sub("ap"), {c}, -1, 1);
        auto fwd = [&](FwdCtx& ctx, Var a, Var b) {
            std::vector<Var> att = facial_attention(ctx, {a, b}, "att");
            auto [ys, yb] = fuse_sff(ctx, {a, b}, att, "fuse", c);
            return add(ctx.tape, proj_sum(ctx.tape, ys, pr), proj_sum(ctx.tape, yb, pr));
        };
        std::string apn = store.names_with_prefix("att/").front();
        check_param(gc, "attention + fusion: " + apn, store, apn, [&](FwdCtx& ctx) {
            return fwd(ctx, ctx.tape.leaf(m0), ctx.tape.leaf(m1));
        });
        {
            ParamStore s2 = store;
            auto f = [&](const Tensor& x) {
                Tape t;
                FwdCtx ctx(t, s2);
                return t.val(fwd(ctx, t.leaf(x), t.leaf(m1))).data[0];
            };
            Tape t;
            FwdCtx ctx(t, s2);
            Var a = t.leaf(m0);
            Var y = fwd(ctx, a, t.leaf(m1));
            t.backward(y);
            gc.report("attention + fusion: input map", grad_rel_err(t.grad(a), finite_diff_grad(f, m0)));
        }
    }
    {
        ParamStore store;
        store.create("enh/conv.w", {c, c, 3, 3}, 11, c * 9);
        store.create("enh/conv.b", {c}, 11, 0);
        Tensor f0 = randt(rng.sub("ef"), {c, 3, 3}, -1, 1);
        Tensor ys = randt(rng.sub("eys"), {c}, 0.5, 1.5);
        Tensor yb = randt(rng.sub("eyb"), {c}, -0.5, 0.5);
        Tensor pr = randt(rng.sub("ep"), {c, 6, 6}, -1, 1);
        check_param(gc, "scale enhancement: conv weight", store, "enh/conv.w", [&](FwdCtx& ctx) {
            Tape& t = ctx.tape;
            Var out = sfft_enhance(ctx, t.leaf(f0), {t.leaf(ys), t.leaf(yb)}, {-1, -1}, 2, "enh/conv", c);
            return proj_sum(t, out, pr);
        });
        {
            auto f = [&](const Tensor& x) {
                ParamStore s = store;
                Tape t;
                FwdCtx ctx(t, s);
                Var out = sfft_enhance(ctx, t.leaf(x), {t.leaf(ys), t.leaf(yb)}, {-1, -1}, 2, "enh/conv", c);
                return t.val(proj_sum(t, out, pr)).data[0];
            };
            ParamStore s = store;
            Tape t;
            FwdCtx ctx(t, s);
            Var fv = t.leaf(f0);
            Var y = proj_sum(t, sfft_enhance(ctx, fv, {t.leaf(ys), t.leaf(yb)}, {-1, -1}, 2, "enh/conv", c), pr);
            t.backward(y);
            gc.report("scale enhancement: input feature", grad_rel_err(t.grad(fv), finite_diff_grad(f, f0)));
        }
    }

    // small end-to-end configuration: R=8, two scales, four channels
    GeneratorConfig small;
    small.scales = 2;
    small.resolution = 8;
    small.channels = {c, c};
    small.embedding_width = 8;
    small.fc_hidden = 8;
    small.init_seed = 21;

    {
        ParamStore store;
        init_fc_heads(store, small);
        Tensor emb = randt(rng.sub("fce"), {8}, -1, 1);
        Tensor pr = randt(rng.sub("fcp"), {c}, -1, 1);
        check_param(gc, "embedding fc head: l0 weight", store, "fc/s1/l0.w", [&](FwdCtx& ctx) {
            auto [ws, wb] = fc_head(ctx, small, ctx.tape.leaf(emb), 1);
            return add(ctx.tape, proj_sum(ctx.tape, ws, pr), proj_sum(ctx.tape, wb, pr));
        });
    }
    {
        ParamStore store;
        init_encoder(store, small, "enc", 5);
        Tensor img = randt(rng.sub("enci"), {3, 8, 8}, 0.05, 0.95);
        Tensor pr = randt(rng.sub("encp"), {8}, -1, 1);
        auto f = [&](const Tensor& x) {
            ParamStore s = store;
            Tape t;
            FwdCtx ctx(t, s);
            return t.val(proj_sum(t, encoder_forward(ctx, t.leaf(x), "enc", nullptr), pr)).data[0];
        };
        ParamStore s = store;
        Tape t;
        FwdCtx ctx(t, s);
        Var xi = t.leaf(img);
        Var y = proj_sum(t, encoder_forward(ctx, xi, "enc", nullptr), pr);
        t.backward(y);
        gc.report("encoder: input image", grad_rel_err(t.grad(xi), finite_diff_grad(f, img)));
        check_param(gc, "encoder: head weight", store, "enc/head.w", [&](FwdCtx& ctx2) {
            return proj_sum(ctx2.tape, encoder_forward(ctx2, ctx2.tape.leaf(img), "enc", nullptr), pr);
        });
    }
    {
        ParamStore store;
        init_discriminators(store, small);
        Tensor img = randt(rng.sub("di"), {3, 8, 8}, 0.05, 0.95);
        auto f = [&](const Tensor& x) {
            ParamStore s = store;
            Tape t;
            FwdCtx ctx(t, s);
            return t.val(discriminator_forward(ctx, t.leaf(x), 0).score).data[0];
        };
        ParamStore s = store;
        Tape t;
        FwdCtx ctx(t, s);
        Var xi = t.leaf(img);
        t.backward(discriminator_forward(ctx, xi, 0).score);
        gc.report("discriminator: input image", grad_rel_err(t.grad(xi), finite_diff_grad(f, img)));
    }
    {
        ParamStore store;
        init_encoder(store, small, "ehq", 1);
        init_decoder(store, small);
        Tensor emb = randt(rng.sub("dce"), {8}, -1, 1);
        Tensor pr = randt(rng.sub("dcp"), {3, 8, 8}, -1, 1);
        check_param(gc, "decoder: fc weight", store, "dec/fc.w", [&](FwdCtx& ctx) {
            return proj_sum(ctx.tape, decoder_forward(ctx, small, ctx.tape.leaf(emb)), pr);
        });
    }

    // loss surfaces
    std::vector<int> parsing8 = toy_parsing(8);
    {
        ParamStore store;
        init_discriminators(store, small);
        init_encoder(store, small, "ehq", 1);
        Tensor hq = randt(rng.sub("rlh"), {3, 8, 8}, 0.05, 0.95);
        Tensor hh0 = randt(rng.sub("rlg"), {3, 8, 8}, 0.05, 0.95);
        {
            auto f = [&](const Tensor& x) {
                ParamStore s = store;
                Tape t;
                FwdCtx ctx(t, s);
                return t.val(reconstruction_loss(ctx, t.leaf(hq), t.leaf(x))).data[0];
            };
            ParamStore s = store;
            Tape t;
            FwdCtx ctx(t, s);
            Var xi = t.leaf(hh0);
            t.backward(reconstruction_loss(ctx, t.leaf(hq), xi));
            gc.report("reconstruction loss: restored image",
                      grad_rel_err(t.grad(xi), finite_diff_grad(f, hh0)));
        }
        {
            auto f = [&](const Tensor& x) {
                ParamStore s = store;
                Tape t;
                FwdCtx ctx(t, s);
                return t.val(style_loss(ctx, small, t.leaf(hq), t.leaf(x), parsing8)).data[0];
            };
            ParamStore s = store;
            Tape t;
            FwdCtx ctx(t, s);
            Var xi = t.leaf(hh0);
            t.backward(style_loss(ctx, small, t.leaf(hq), xi, parsing8));
            gc.report("style loss: restored image", grad_rel_err(t.grad(xi), finite_diff_grad(f, hh0)));
        }
    }
    {
        Tensor sc = randt(rng.sub("hs"), {3}, -0.7, 0.7);  // away from the hinge kinks at +-1
        check_input(gc, "hinge loss (generator)", sc, [&](Tape& t, Var s) {
            std::vector<Var> scores;
            for (int i = 0; i < 3; ++i) scores.push_back(slice0(t, s, i, i + 1));
            return hinge_gen_loss(t, scores);
        });
        Tensor rf = randt(rng.sub("hd"), {6}, -0.7, 0.7);
        check_input(gc, "hinge loss (discriminator)", rf, [&](Tape& t, Var s) {
            std::vector<Var> rs, fs;
            for (int i = 0; i < 3; ++i) {
                rs.push_back(slice0(t, s, i, i + 1));
                fs.push_back(slice0(t, s, 3 + i, 4 + i));
            }
            return hinge_disc_loss(t, rs, fs);
        });
    }
    {
        Tensor va = randt(rng.sub("da"), {8}, -1, 1);
        Tensor vb = randt(rng.sub("db"), {8}, -1, 1);
        check_input(gc, "embedding alignment loss", va,
                    [&](Tape& t, Var v) { return dafe_alignment_loss(t, t.leaf(vb), v); });
    }
    {
        Tensor terms = randt(rng.sub("tot"), {3}, 0.1, 1.0);
        check_input(gc, "weighted total loss", terms, [&](Tape& t, Var v) {
            LossWeights w;
            return total_gen_loss(t, slice0(t, v, 0, 1), slice0(t, v, 1, 2), slice0(t, v, 2, 3), w);
        });
    }

    // full two-scale generator, with and without the embedding branch
    {
        ParamStore store;
        init_generator(store, small);
        init_fc_heads(store, small);
        Tensor lq = randt(rng.sub("glq"), {3, 8, 8}, 0.05, 0.95);
        Tensor emb = randt(rng.sub("gemb"), {8}, -0.5, 0.5);
        Tensor pr = randt(rng.sub("gpr"), {3, 8, 8}, -1, 1);
        auto gen_scalar = [&](FwdCtx& ctx, Var embedding) {
            Var out = generator_forward(ctx, small, lq, parsing8, embedding);
            return proj_sum(ctx.tape, out, pr);
        };
        for (const std::string& pn :
             {std::string("gen/s2/enh/conv.w"), std::string("gen/s1/fuse/psff/conv0.w"),
              std::string("gen/torgb.w"), std::string("fc/s2/l1.w")}) {
            check_param(gc, "full generator: " + pn, store, pn,
                        [&](FwdCtx& ctx) { return gen_scalar(ctx, ctx.tape.leaf(emb)); });
        }
        {
            auto f = [&](const Tensor& x) {
                ParamStore s = store;
                Tape t;
                FwdCtx ctx(t, s);
                return t.val(gen_scalar(ctx, t.leaf(x))).data[0];
            };
            ParamStore s = store;
            Tape t;
            FwdCtx ctx(t, s);
            Var e = t.leaf(emb);
            t.backward(gen_scalar(ctx, e));
            gc.report("full generator: embedding input", grad_rel_err(t.grad(e), finite_diff_grad(f, emb)));
        }
        check_param(gc, "full generator (no embedding): gen/s1/enh/conv.w", store,
                    "gen/s1/enh/conv.w", [&](FwdCtx& ctx) { return gen_scalar(ctx, -1); });
    }

    os << (gc.failures == 0 ? "gradcheck OK" : "gradcheck FAILED") << " (" << gc.failures
       << " failures)\n";
    return gc.failures;
}

}  // namespace dasfft
