#include "harness/harness.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "core/ops.hpp"
#include "core/rng.hpp"
#include "losses/losses.hpp"

namespace dasfft {

namespace {

constexpr std::uint64_t kHqEncoderSalt = 1;
constexpr std::uint64_t kLqEncoderSalt = 2;
constexpr std::uint64_t kFreshEncoderSalt = 3;

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
    return std::filesystem::path(cfg.out_dir) / name;
}

// Pixel MSE + discriminator feature matching, sharing the discriminator
// passes with the adversarial term (fake scores out).
Var recon_with_scores(FwdCtx& ctx, const Tensor& hq, Var hq_hat, std::vector<Var>* fake_scores) {
    Tape& t = ctx.tape;
    int res = hq.dim(1);
    Var h = t.leaf(hq);
    Var loss = mse(t, hq_hat, h);
    for (int s = 0; s < 3; ++s) {
        int r = res >> s;
        Var hs = s == 0 ? h : t.leaf(resize_bilinear_fwd(hq, r, r));
        Var hhs = s == 0 ? hq_hat : resize_bilinear(t, hq_hat, r, r);
        DiscOut dr = discriminator_forward(ctx, hs, s);
        DiscOut df = discriminator_forward(ctx, hhs, s);
        if (fake_scores) fake_scores->push_back(df.score);
        for (std::size_t k = 0; k < dr.feats.size(); ++k)
            loss = add(t, loss, mse(t, df.feats[k], dr.feats[k]));
    }
    return loss;
}

}  // namespace

Corpus Corpus::synth(std::uint64_t seed, const std::string& stream, int count, int resolution,
                     int m_min, int m_max) {
    Corpus c;
    Rng base = Rng(seed).sub(stream);
    Rng faces = base.sub("face");
    Rng deg = base.sub("degrade");
    for (int i = 0; i < count; ++i) {
        std::uint64_t fs = faces.sub(static_cast<std::uint64_t>(i)).next_u64();
        std::uint64_t ds = deg.sub(static_cast<std::uint64_t>(i)).next_u64();
        FaceSample f = generate_face(fs, resolution);
        DegradationParams p = sample_params(ds, m_min, m_max);
        c.lq.push_back(degrade(f.image, f.depth, p));
        c.faces.push_back(std::move(f));
        c.degparams.push_back(std::move(p));
    }
    return c;
}

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), gcfg_(cfg_.gen_config()) {
    cfg_.validate();
    if (!cfg_.out_dir.empty()) std::filesystem::create_directories(cfg_.out_dir);
}

const Corpus& Pipeline::train_corpus() {
    if (!train_)
        train_ = Corpus::synth(cfg_.master_seed, "train", cfg_.train_count, cfg_.resolution,
                               cfg_.m_min, cfg_.m_max);
    return *train_;
}

const Corpus& Pipeline::test_corpus() {
    if (!test_)
        test_ = Corpus::synth(cfg_.master_seed, "test", cfg_.test_count, cfg_.resolution,
                              cfg_.m_min, cfg_.m_max);
    return *test_;
}

void Pipeline::apply_grads(const std::map<std::string, Tensor>& grads,
                           const std::vector<std::string>& prefixes, double lr) {
    AdamHyper hp;
    hp.lr = lr;
    for (const auto& [name, g] : grads) {
        bool wanted = false;
        for (const std::string& p : prefixes)
            if (name.compare(0, p.size(), p) == 0) wanted = true;
        if (!wanted) continue;
        Param& param = store_.at(name);
        if (!param.trainable) continue;
        param.opt.ensure_shape(param.value);
        adam_step(param.opt, hp, param.value, g);
    }
}

void Pipeline::pretrain_encoder() {
    init_encoder(store_, gcfg_, "ehq", kHqEncoderSalt);
    init_decoder(store_, gcfg_);
    const Corpus& tr = train_corpus();
    Rng batches = Rng(cfg_.master_seed).sub("pretrain");
    for (int step = 0; step < cfg_.pretrain_steps; ++step) {
        Rng r = batches.sub(static_cast<std::uint64_t>(step));
        std::map<std::string, Tensor> acc;
        for (int b = 0; b < cfg_.batch; ++b) {
            int i = static_cast<int>(r.uniform_int(0, tr.size() - 1));
            Tape tape;
            FwdCtx ctx(tape, store_);
            Var img = tape.leaf(tr.faces[static_cast<std::size_t>(i)].image);
            Var v = encoder_forward(ctx, img, "ehq", nullptr);
            Var rec = decoder_forward(ctx, gcfg_, v);
            Var loss = mse(tape, rec, img);
            tape.backward(loss);
            ctx.collect_grads(acc, 1.0 / cfg_.batch);
        }
        apply_grads(acc, {"ehq/", "dec/"}, cfg_.lr_pretrain);
    }
    // freeze: later stages must never move these
    for (const std::string& n : store_.names_with_prefix("ehq/")) store_.at(n).trainable = false;
    for (const std::string& n : store_.names_with_prefix("dec/")) store_.at(n).trainable = false;
}

double Pipeline::heldout_alignment_mse(const std::string& lq_prefix) {
    const Corpus& te = test_corpus();
    double total = 0.0;
    for (int i = 0; i < te.size(); ++i) {
        Tape tape;
        FwdCtx ctx(tape, store_);
        Var v_hq = encoder_forward(ctx, tape.leaf(te.faces[static_cast<std::size_t>(i)].image),
                                   "ehq", nullptr);
        Var v_lq =
            encoder_forward(ctx, tape.leaf(te.lq[static_cast<std::size_t>(i)]), lq_prefix, nullptr);
        Var loss = dafe_alignment_loss(tape, v_hq, v_lq);
        total += tape.val(loss).data[0];
    }
    return total / te.size();
}

AlignReport Pipeline::align_dafe() {
    require(store_.has("ehq/block0.w"), "align_dafe: run encoder pretraining first");
    init_encoder(store_, gcfg_, "elq", kLqEncoderSalt);
    const Corpus& tr = train_corpus();

    AlignReport rep;
    rep.initial_mse = heldout_alignment_mse("elq");

    Rng batches = Rng(cfg_.master_seed).sub("align");
    for (int step = 0; step < cfg_.align_steps; ++step) {
        Rng r = batches.sub(static_cast<std::uint64_t>(step));
        std::map<std::string, Tensor> acc;
        for (int b = 0; b < cfg_.batch; ++b) {
            int i = static_cast<int>(r.uniform_int(0, tr.size() - 1));
            Tape tape;
            FwdCtx ctx(tape, store_);
            Var v_hq = encoder_forward(ctx, tape.leaf(tr.faces[static_cast<std::size_t>(i)].image),
                                       "ehq", nullptr);
            Var v_lq = encoder_forward(ctx, tape.leaf(tr.lq[static_cast<std::size_t>(i)]), "elq",
                                       nullptr);
            Var loss = dafe_alignment_loss(tape, v_hq, v_lq);
            tape.backward(loss);
            ctx.collect_grads(acc, 1.0 / cfg_.batch);
        }
        apply_grads(acc, {"elq/"}, cfg_.lr_align);
    }
    rep.final_mse = heldout_alignment_mse("elq");

    std::ofstream os(out_path(cfg_, "align_report.txt"));
    os << "heldout_mse_initial = " << rep.initial_mse << "\n";
    os << "heldout_mse_final = " << rep.final_mse << "\n";
    return rep;
}

double Pipeline::train_recon_loss(int limit) {
    const Corpus& tr = train_corpus();
    int n = std::min(limit, tr.size());
    require(n > 0 && store_.has("gen/start") && store_.has("disc/s0/block0.w"),
            "train_recon_loss: networks not initialized");
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        Tape tape;
        FwdCtx ctx(tape, store_);
        Var emb = -1;
        if (cfg_.ablation == Ablation::SfftDafe)
            emb = encoder_forward(ctx, tape.leaf(tr.faces[static_cast<std::size_t>(i)].image),
                                  "ehq", nullptr);
        Var hhat = generator_forward(ctx, gcfg_, tr.lq[static_cast<std::size_t>(i)],
                                     tr.faces[static_cast<std::size_t>(i)].parsing, emb);
        Var l_rec = recon_with_scores(ctx, tr.faces[static_cast<std::size_t>(i)].image, hhat, nullptr);
        total += tape.val(l_rec).data[0];
    }
    return total / n;
}

TrainResult Pipeline::train_gan(std::ostream* log_csv) {
    init_generator(store_, gcfg_);
    init_discriminators(store_, gcfg_);
    if (cfg_.ablation == Ablation::SfftDafe) {
        require(store_.has("ehq/block0.w"), "train_gan: sfft_dafe needs the pretrained HQ encoder");
        init_fc_heads(store_, gcfg_);
    }
    if (cfg_.weights.lambda_s > 0.0)
        require(store_.has("ehq/block0.w"), "train_gan: style loss needs the pretrained HQ encoder");

    // bit-exact freeze guard over both encoders
    std::map<std::string, Tensor> frozen;
    for (const std::string& p : {std::string("ehq/"), std::string("elq/")})
        for (const std::string& n : store_.names_with_prefix(p)) frozen[n] = store_.value(n);

    const Corpus& tr = train_corpus();
    const int rec_probe = std::min(16, tr.size());
    TrainResult res;
    res.initial_rec = train_recon_loss(rec_probe);

    std::vector<std::string> gen_prefixes = {"gen/"};
    if (cfg_.ablation == Ablation::SfftDafe) gen_prefixes.push_back("fc/");

    if (log_csv) *log_csv << "step, L_s, L_rec, L_G, total, L_D\n";

    Rng batches = Rng(cfg_.master_seed).sub("gan");
    for (int step = 0; step < cfg_.gan_steps; ++step) {
        Rng r = batches.sub(static_cast<std::uint64_t>(step));
        std::vector<int> idx;
        for (int b = 0; b < cfg_.batch; ++b)
            idx.push_back(static_cast<int>(r.uniform_int(0, tr.size() - 1)));

        // generator forwards (shared by the discriminator step, which sees the
        // outputs as constants, and by the generator step afterwards)
        std::vector<std::unique_ptr<Tape>> tapes;
        std::vector<std::unique_ptr<FwdCtx>> ctxs;
        std::vector<Var> hhats;
        std::vector<Tensor> hhat_vals;
        for (int b = 0; b < cfg_.batch; ++b) {
            const std::size_t i = static_cast<std::size_t>(idx[static_cast<std::size_t>(b)]);
            tapes.push_back(std::make_unique<Tape>());
            ctxs.push_back(std::make_unique<FwdCtx>(*tapes.back(), store_));
            FwdCtx& ctx = *ctxs.back();
            Var emb = -1;
            if (cfg_.ablation == Ablation::SfftDafe)
                emb = encoder_forward(ctx, ctx.tape.leaf(tr.faces[i].image), "ehq", nullptr);
            Var hhat = generator_forward(ctx, gcfg_, tr.lq[i], tr.faces[i].parsing, emb);
            hhats.push_back(hhat);
            hhat_vals.push_back(ctx.tape.val(hhat));
        }

        // Discriminator update. With a zero adversarial weight the generator
        // never plays against the discriminators, so they are left at their
        // random initialization and serve as fixed feature extractors for the
        // reconstruction loss; updating them would turn that loss into a
        // moving target.
        double ld_log = 0.0;
        if (cfg_.weights.lambda_g > 0.0) {
            Tape td;
            FwdCtx dctx(td, store_);
            Var total = -1;
            for (int b = 0; b < cfg_.batch; ++b) {
                const std::size_t i = static_cast<std::size_t>(idx[static_cast<std::size_t>(b)]);
                std::vector<Var> rs, fs;
                for (int s = 0; s < 3; ++s) {
                    int rr = cfg_.resolution >> s;
                    Tensor real = s == 0 ? tr.faces[i].image
                                         : resize_bilinear_fwd(tr.faces[i].image, rr, rr);
                    Tensor fake = s == 0 ? hhat_vals[static_cast<std::size_t>(b)]
                                         : resize_bilinear_fwd(
                                               hhat_vals[static_cast<std::size_t>(b)], rr, rr);
                    rs.push_back(discriminator_forward(dctx, td.leaf(real), s).score);
                    fs.push_back(discriminator_forward(dctx, td.leaf(fake), s).score);
                }
                Var l = hinge_disc_loss(td, rs, fs);
                total = total < 0 ? l : add(td, total, l);
            }
            total = scale(td, total, 1.0 / cfg_.batch);
            ld_log = td.val(total).data[0];
            td.backward(total);
            std::map<std::string, Tensor> dacc;
            dctx.collect_grads(dacc);
            apply_grads(dacc, {"disc/"}, cfg_.lr_disc);
        }

        // generator update against the refreshed discriminators
        double ls_log = 0.0, lrec_log = 0.0, lg_log = 0.0, ltot_log = 0.0;
        std::map<std::string, Tensor> gacc;
        for (int b = 0; b < cfg_.batch; ++b) {
            const std::size_t i = static_cast<std::size_t>(idx[static_cast<std::size_t>(b)]);
            FwdCtx& ctx = *ctxs[static_cast<std::size_t>(b)];
            Tape& t = ctx.tape;
            std::vector<Var> fake_scores;
            Var l_rec = recon_with_scores(ctx, tr.faces[i].image,
                                          hhats[static_cast<std::size_t>(b)], &fake_scores);
            Var l_g = hinge_gen_loss(t, fake_scores);
            Var l_s = cfg_.weights.lambda_s > 0.0
                          ? style_loss(ctx, gcfg_, t.leaf(tr.faces[i].image),
                                       hhats[static_cast<std::size_t>(b)], tr.faces[i].parsing)
                          : t.leaf(Tensor::zeros({1}));
            Var total = total_gen_loss(t, l_s, l_rec, l_g, cfg_.weights);
            ls_log += t.val(l_s).data[0] / cfg_.batch;
            lrec_log += t.val(l_rec).data[0] / cfg_.batch;
            lg_log += t.val(l_g).data[0] / cfg_.batch;
            ltot_log += t.val(total).data[0] / cfg_.batch;
            t.backward(total);
            ctx.collect_grads(gacc, 1.0 / cfg_.batch);
        }
        apply_grads(gacc, gen_prefixes, cfg_.lr_gen);

        if (log_csv)
            *log_csv << step << ", " << ls_log << ", " << lrec_log << ", " << lg_log << ", "
                     << ltot_log << ", " << ld_log << "\n";
    }

    for (const auto& [name, snap] : frozen) {
        const Tensor& now = store_.value(name);
        bool same = now.shape == snap.shape &&
                    std::memcmp(now.data.data(), snap.data.data(),
                                snap.data.size() * sizeof(double)) == 0;
        require(same, "train_gan: frozen encoder parameter moved: " + name);
    }

    res.final_rec = train_recon_loss(rec_probe);
    std::ofstream os(out_path(cfg_, "train_report.txt"));
    os << "train_rec_initial = " << res.initial_rec << "\n";
    os << "train_rec_final = " << res.final_rec << "\n";
    return res;
}

Tensor Pipeline::restore(const Tensor& lq, const std::vector<int>& parsing, CallTrace* trace) {
    require(store_.has("gen/start"), "restore: untrained model");
    Tape tape;
    FwdCtx ctx(tape, store_);
    Var emb = -1;
    if (cfg_.ablation == Ablation::SfftDafe) {
        require(store_.has("elq/block0.w"), "restore: sfft_dafe needs the aligned LQ encoder");
        emb = encoder_forward(ctx, tape.leaf(lq), "elq", trace);
    }
    Var hhat = generator_forward(ctx, gcfg_, lq, parsing, emb);
    return tape.val(hhat);
}

EvalResult Pipeline::evaluate() {
    const Corpus& te = test_corpus();
    EvalResult res;
    for (int i = 0; i < te.size(); ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        Tensor rest = restore(te.lq[u], te.faces[u].parsing, nullptr);
        std::string name = "test" + std::to_string(i);
        res.restored.rows.push_back({name, psnr(rest, te.faces[u].image), ssim(rest, te.faces[u].image)});
        res.lq_baseline.rows.push_back(
            {name, psnr(te.lq[u], te.faces[u].image), ssim(te.lq[u], te.faces[u].image)});
    }

    // aligned vs freshly initialized LQ encoder, measured against E_HQ(H)
    int better = 0;
    if (store_.has("elq/block0.w") && store_.has("ehq/block0.w")) {
        ParamStore fresh = store_;
        fresh.erase_prefix("elq/");
        init_encoder(fresh, gcfg_, "elq", kFreshEncoderSalt);
        for (int i = 0; i < te.size(); ++i) {
            const std::size_t u = static_cast<std::size_t>(i);
            Tape tape;
            FwdCtx ctx(tape, store_);
            FwdCtx fctx(tape, fresh);
            Var v_hq = encoder_forward(ctx, tape.leaf(te.faces[u].image), "ehq", nullptr);
            Var v_al = encoder_forward(ctx, tape.leaf(te.lq[u]), "elq", nullptr);
            Var v_un = encoder_forward(fctx, tape.leaf(te.lq[u]), "elq", nullptr);
            double da = tape.val(dafe_alignment_loss(tape, v_hq, v_al)).data[0];
            double du = tape.val(dafe_alignment_loss(tape, v_hq, v_un)).data[0];
            res.aligned_dist_mean += da / te.size();
            res.unaligned_dist_mean += du / te.size();
            if (da < du) ++better;
        }
        res.aligned_better_frac = static_cast<double>(better) / te.size();
    }

    write_metric_csv(res.restored, out_path(cfg_, "eval.csv").string());
    write_metric_csv(res.lq_baseline, out_path(cfg_, "eval_baseline.csv").string());
    std::ofstream os(out_path(cfg_, "eval_report.txt"));
    os << "mean_psnr_restored = " << res.restored.mean_psnr() << "\n";
    os << "mean_ssim_restored = " << res.restored.mean_ssim() << "\n";
    os << "mean_psnr_lq = " << res.lq_baseline.mean_psnr() << "\n";
    os << "mean_ssim_lq = " << res.lq_baseline.mean_ssim() << "\n";
    os << "embedding_dist_aligned = " << res.aligned_dist_mean << "\n";
    os << "embedding_dist_unaligned = " << res.unaligned_dist_mean << "\n";
    os << "embedding_aligned_better_frac = " << res.aligned_better_frac << "\n";
    return res;
}

void write_ablation_report(const std::string& path, double rec_sfft_only, double rec_sfft_dafe) {
    std::ofstream os(path);
    os << "final_rec sfft_only = " << rec_sfft_only << "\n";
    os << "final_rec sfft_dafe = " << rec_sfft_dafe << "\n";
    os << "status = " << (rec_sfft_dafe <= rec_sfft_only ? "ok" : "inversion") << "\n";
}

}  // namespace dasfft
