#include "losses/losses.hpp"

#include <algorithm>

#include "facegen/facegen.hpp"
#include "sfft/sfft.hpp"

namespace dasfft {

Var reconstruction_loss(FwdCtx& ctx, Var hq, Var hq_hat) {
    Tape& t = ctx.tape;
    require_same_shape(t.val(hq), t.val(hq_hat), "reconstruction_loss");
    Var loss = mse(t, hq, hq_hat);
    int res = t.val(hq).dim(1);
    for (int s = 0; s < 3; ++s) {
        int r = res >> s;
        Var hs = s == 0 ? hq : resize_bilinear(t, hq, r, r);
        Var hhs = s == 0 ? hq_hat : resize_bilinear(t, hq_hat, r, r);
        DiscOut real = discriminator_forward(ctx, hs, s);
        DiscOut fake = discriminator_forward(ctx, hhs, s);
        for (std::size_t k = 0; k < real.feats.size(); ++k)
            loss = add(t, loss, mse(t, real.feats[k], fake.feats[k]));
    }
    return loss;
}

Var hinge_gen_loss(Tape& tape, const std::vector<Var>& scores) {
    require(!scores.empty(), "hinge_gen_loss: no scores");
    Var acc = scale(tape, scores[0], -1.0);
    for (std::size_t i = 1; i < scores.size(); ++i)
        acc = add(tape, acc, scale(tape, scores[i], -1.0));
    return acc;
}

Var hinge_disc_loss(Tape& tape, const std::vector<Var>& real_scores,
                    const std::vector<Var>& fake_scores) {
    require(real_scores.size() == fake_scores.size() && !real_scores.empty(),
            "hinge_disc_loss: paired per-scale scores required");
    Var acc = -1;
    for (std::size_t i = 0; i < real_scores.size(); ++i) {
        Var r = pointwise(tape, affine(tape, real_scores[i], -1.0, 1.0), Pointwise::Relu);
        Var f = pointwise(tape, affine(tape, fake_scores[i], 1.0, 1.0), Pointwise::Relu);
        Var term = add(tape, r, f);
        acc = acc < 0 ? term : add(tape, acc, term);
    }
    return acc;
}

Tensor parsing_class_mask(const std::vector<int>& parsing, int from_res, int label, int h, int w) {
    Tensor mask({1, h, w});
    for (int y = 0; y < h; ++y) {
        int sy = std::min(from_res - 1, static_cast<int>((y + 0.5) * from_res / h));
        for (int x = 0; x < w; ++x) {
            int sx = std::min(from_res - 1, static_cast<int>((x + 0.5) * from_res / w));
            mask.at3(0, y, x) =
                parsing[static_cast<std::size_t>(sy) * from_res + sx] == label ? 1.0 : 0.0;
        }
    }
    return mask;
}

Var style_loss(FwdCtx& ctx, const GeneratorConfig& cfg, Var hq, Var hq_hat,
               const std::vector<int>& parsing) {
    Tape& t = ctx.tape;
    require(ctx.store.has("ehq/block0.w"), "style_loss: missing pretrained HQ encoder");
    std::vector<Var> feats_h, feats_hh;
    (void)encoder_forward(ctx, hq, "ehq", nullptr, &feats_h);
    (void)encoder_forward(ctx, hq_hat, "ehq", nullptr, &feats_hh);
    Var loss = -1;
    // encoder blocks 2..4 stand in for the mid/deep texture layers
    for (std::size_t layer = 1; layer < feats_h.size(); ++layer) {
        const Tensor& fv = t.val(feats_h[layer]);
        int h = fv.dim(1), w = fv.dim(2);
        for (int label = 0; label < kNumComponents; ++label) {
            Tensor mask = parsing_class_mask(parsing, cfg.resolution, label, h, w);
            Var ga = masked_gram(t, feats_hh[layer], mask);
            Var gb = masked_gram(t, feats_h[layer], mask);
            Var d = sub(t, ga, gb);
            Var term = sum(t, mul(t, d, d));
            loss = loss < 0 ? term : add(t, loss, term);
        }
    }
    return loss;
}

Var total_gen_loss(Tape& tape, Var l_s, Var l_rec, Var l_g, const LossWeights& w) {
    require(w.lambda_s >= 0 && w.lambda_rec >= 0 && w.lambda_g >= 0,
            "total_gen_loss: loss weights must be nonnegative");
    Var acc = scale(tape, l_s, w.lambda_s);
    acc = add(tape, acc, scale(tape, l_rec, w.lambda_rec));
    return add(tape, acc, scale(tape, l_g, w.lambda_g));
}

Var dafe_alignment_loss(Tape& tape, Var v_hq, Var v_lq) {
    require(tape.val(v_hq).size() == tape.val(v_lq).size(),
            "dafe_alignment_loss: embedding width mismatch");
    return mse(tape, v_hq, v_lq);
}

}  // namespace dasfft
