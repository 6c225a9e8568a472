#pragma once

#include <vector>

#include "nets/networks.hpp"

namespace dasfft {

struct LossWeights {
    double lambda_s = 1.0;
    double lambda_rec = 10.0;
    double lambda_g = 0.1;
};

struct LossReport {
    double l_s = 0.0;
    double l_rec = 0.0;
    double l_g = 0.0;
    double total = 0.0;
    double l_d = 0.0;
};

// Pixel MSE plus discriminator feature-matching MSE over the three
// multiscale discriminators (4 taps each). `hq` is a tape constant.
Var reconstruction_loss(FwdCtx& ctx, Var hq, Var hq_hat);

// sum_s -score_s
Var hinge_gen_loss(Tape& tape, const std::vector<Var>& scores);

// sum_s [ max(0, 1 - real_s) + max(0, 1 + fake_s) ]
Var hinge_disc_loss(Tape& tape, const std::vector<Var>& real_scores,
                    const std::vector<Var>& fake_scores);

// Multi-layer masked Gram matching over the frozen HQ-encoder features,
// summed over the five parsing classes.
Var style_loss(FwdCtx& ctx, const GeneratorConfig& cfg, Var hq, Var hq_hat,
               const std::vector<int>& parsing);

// total = lambda_s*L_s + lambda_rec*L_rec + lambda_g*L_G
Var total_gen_loss(Tape& tape, Var l_s, Var l_rec, Var l_g, const LossWeights& w);

// Mean squared difference between the two encoder embeddings.
Var dafe_alignment_loss(Tape& tape, Var v_hq, Var v_lq);

// One-hot mask of a parsing class, nearest-resampled to the given grid.
Tensor parsing_class_mask(const std::vector<int>& parsing, int from_res, int label, int h, int w);

}  // namespace dasfft
