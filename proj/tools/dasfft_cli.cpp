// Command-line front end; talks to the library through the C API only.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dasfft.h"

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;  // key=value overrides
    std::string model_in;
    std::string model_out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "configuration file (key = value lines)");
    cmd->add_option("--set", c.sets, "single configuration override, key=value")
        ->take_all();
    cmd->add_option("--model", c.model_in, "model file to load before running");
    cmd->add_option("--save-model", c.model_out, "model file to write after running");
}

bool check(dasfft_session* s, dasfft_status st, const char* what) {
    if (st == DASFFT_OK) return true;
    std::fprintf(stderr, "error: %s: %s\n", what, dasfft_last_error(s));
    return false;
}

bool apply_common_pre(dasfft_session* s, const Common& c) {
    if (!c.config.empty() && !check(s, dasfft_config_load(s, c.config.c_str()), "config")) return false;
    for (const std::string& kv : c.sets) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return false;
        }
        std::string key = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        while (!value.empty() && value.front() == ' ') value.erase(value.begin());
        if (!check(s, dasfft_config_set(s, key.c_str(), value.c_str()), "config")) return false;
    }
    if (!c.model_in.empty() && !check(s, dasfft_model_load(s, c.model_in.c_str()), "model load"))
        return false;
    return true;
}

bool apply_common_post(dasfft_session* s, const Common& c) {
    if (!c.model_out.empty() && !check(s, dasfft_model_save(s, c.model_out.c_str()), "model save"))
        return false;
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DA-SFFT blind face restoration under heavy-rain degradations"};
    app.require_subcommand(1);

    Common c_facegen, c_degrade, c_pretrain, c_align, c_train, c_restore, c_eval, c_grad;

    std::uint64_t fg_seed = 1;
    std::string fg_out = "face";
    CLI::App* facegen = app.add_subcommand("facegen", "synthesize one HQ face triple");
    facegen->add_option("--seed", fg_seed, "face seed");
    facegen->add_option("--out", fg_out, "output prefix (.ppm, _parsing.pgm, _depth.tens)");
    add_common(facegen, c_facegen);

    std::string dg_in, dg_depth, dg_out = "lq";
    std::uint64_t dg_seed = 1;
    CLI::App* deg = app.add_subcommand("degrade", "apply one sampled blind degradation");
    deg->add_option("--in", dg_in, "HQ image (.ppm)")->required();
    deg->add_option("--depth", dg_depth, "depth map (.tens)")->required();
    deg->add_option("--seed", dg_seed, "degradation seed");
    deg->add_option("--out", dg_out, "output prefix (.ppm, _params.txt)");
    add_common(deg, c_degrade);

    CLI::App* pre = app.add_subcommand("pretrain-encoder", "stage 1: HQ-encoder pretraining");
    add_common(pre, c_pretrain);

    CLI::App* align = app.add_subcommand("align-dafe", "stage 2: LQ-encoder alignment");
    add_common(align, c_align);

    CLI::App* train = app.add_subcommand("train", "stage 3: adversarial generator training");
    add_common(train, c_train);

    std::string rs_in, rs_parsing, rs_out = "restored.ppm";
    CLI::App* restore = app.add_subcommand("restore", "restore one degraded image");
    restore->add_option("--in", rs_in, "degraded image (.ppm)")->required();
    restore->add_option("--parsing", rs_parsing, "parsing map (.pgm)")->required();
    restore->add_option("--out", rs_out, "restored image (.ppm)");
    add_common(restore, c_restore);

    CLI::App* eval = app.add_subcommand("eval", "test-corpus metrics");
    add_common(eval, c_eval);

    std::string gc_report;
    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad->add_option("--report", gc_report, "write the per-check report to this file");
    add_common(grad, c_grad);

    CLI11_PARSE(app, argc, argv);

    dasfft_session* s = dasfft_open();
    int rc = 1;
    do {
        if (facegen->parsed()) {
            if (!apply_common_pre(s, c_facegen)) break;
            if (!check(s, dasfft_facegen(s, fg_seed, fg_out.c_str()), "facegen")) break;
            if (!apply_common_post(s, c_facegen)) break;
            std::printf("wrote %s.ppm\n", fg_out.c_str());
        } else if (deg->parsed()) {
            if (!apply_common_pre(s, c_degrade)) break;
            if (!check(s, dasfft_degrade(s, dg_in.c_str(), dg_depth.c_str(), dg_seed, dg_out.c_str()),
                       "degrade"))
                break;
            if (!apply_common_post(s, c_degrade)) break;
            std::printf("wrote %s.ppm\n", dg_out.c_str());
        } else if (pre->parsed()) {
            if (!apply_common_pre(s, c_pretrain)) break;
            if (!check(s, dasfft_pretrain_encoder(s), "pretrain-encoder")) break;
            if (!apply_common_post(s, c_pretrain)) break;
            std::printf("encoder pretraining done\n");
        } else if (align->parsed()) {
            if (!apply_common_pre(s, c_align)) break;
            double m0 = 0, m1 = 0;
            if (!check(s, dasfft_align_dafe(s, &m0, &m1), "align-dafe")) break;
            if (!apply_common_post(s, c_align)) break;
            std::printf("heldout embedding mse: %.6g -> %.6g\n", m0, m1);
        } else if (train->parsed()) {
            if (!apply_common_pre(s, c_train)) break;
            double r0 = 0, r1 = 0;
            if (!check(s, dasfft_train(s, &r0, &r1), "train")) break;
            if (!apply_common_post(s, c_train)) break;
            std::printf("train reconstruction loss: %.6g -> %.6g\n", r0, r1);
        } else if (restore->parsed()) {
            if (!apply_common_pre(s, c_restore)) break;
            if (!check(s, dasfft_restore(s, rs_in.c_str(), rs_parsing.c_str(), rs_out.c_str()),
                       "restore"))
                break;
            if (!apply_common_post(s, c_restore)) break;
            std::printf("wrote %s\n", rs_out.c_str());
        } else if (eval->parsed()) {
            if (!apply_common_pre(s, c_eval)) break;
            double p = 0, ss = 0;
            if (!check(s, dasfft_eval(s, &p, &ss), "eval")) break;
            if (!apply_common_post(s, c_eval)) break;
            std::printf("mean psnr %.4f dB, mean ssim %.4f\n", p, ss);
        } else if (grad->parsed()) {
            if (!apply_common_pre(s, c_grad)) break;
            int failures = 0;
            const char* rp = gc_report.empty() ? nullptr : gc_report.c_str();
            if (!check(s, dasfft_gradcheck(s, rp, &failures), "gradcheck")) break;
            if (failures != 0) {
                std::fprintf(stderr, "gradcheck: %d failing checks\n", failures);
                break;
            }
            std::printf("gradcheck: all checks passed\n");
        }
        rc = 0;
    } while (false);
    dasfft_close(s);
    return rc;
}
