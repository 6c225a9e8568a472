#include "dasfft.h"

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "degrade/degrade.hpp"
#include "facegen/facegen.hpp"
#include "facegen/imageio.hpp"
#include "harness/harness.hpp"

using namespace dasfft;

struct dasfft_session {
    RunConfig cfg;
    std::optional<Pipeline> pipe;
    std::string last_error;

    Pipeline& pipeline() {
        if (!pipe) pipe.emplace(cfg);
        return *pipe;
    }
    // Configuration changes rebuild the pipeline but keep trained parameters.
    void reconfigure() {
        if (!pipe) return;
        ParamStore keep = pipe->state();
        pipe.emplace(cfg);
        pipe->state() = std::move(keep);
    }
};

namespace {

dasfft_status fail(dasfft_session* s, dasfft_status code, const std::string& msg) {
    if (s) s->last_error = msg;
    return code;
}

template <typename Fn>
dasfft_status guarded(dasfft_session* s, Fn&& fn) {
    if (!s) return DASFFT_ERR_INVALID_ARGUMENT;
    try {
        return fn();
    } catch (const std::exception& e) {
        return fail(s, DASFFT_ERR_INTERNAL, e.what());
    }
}

}  // namespace

extern "C" {

dasfft_session* dasfft_open(void) {
    auto* s = new dasfft_session();
    s->cfg.apply_env_overrides();
    return s;
}

void dasfft_close(dasfft_session* s) { delete s; }

const char* dasfft_last_error(const dasfft_session* s) {
    return s ? s->last_error.c_str() : "null session";
}

dasfft_status dasfft_config_load(dasfft_session* s, const char* path) {
    return guarded(s, [&]() {
        if (!path) return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "config path is null");
        if (!std::filesystem::exists(path))
            return fail(s, DASFFT_ERR_IO, std::string("config file not found: ") + path);
        RunConfig cfg = RunConfig::from_file(path);
        cfg.apply_env_overrides();
        s->cfg = cfg;
        s->reconfigure();
        return DASFFT_OK;
    });
}

dasfft_status dasfft_config_set(dasfft_session* s, const char* key, const char* value) {
    return guarded(s, [&]() {
        if (!key || !value) return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "null config key/value");
        try {
            s->cfg.apply(key, value);
        } catch (const std::exception& e) {
            return fail(s, DASFFT_ERR_INVALID_ARGUMENT, e.what());
        }
        s->reconfigure();
        return DASFFT_OK;
    });
}

dasfft_status dasfft_model_load(dasfft_session* s, const char* path) {
    return guarded(s, [&]() {
        if (!path) return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "model path is null");
        if (!std::filesystem::exists(path))
            return fail(s, DASFFT_ERR_IO, std::string("model file not found: ") + path);
        s->pipeline().load_state(path);
        return DASFFT_OK;
    });
}

dasfft_status dasfft_model_save(dasfft_session* s, const char* path) {
    return guarded(s, [&]() {
        if (!path) return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "model path is null");
        s->pipeline().save_state(path);
        return DASFFT_OK;
    });
}

dasfft_status dasfft_facegen(dasfft_session* s, uint64_t seed, const char* out_prefix) {
    return guarded(s, [&]() {
        if (!out_prefix) return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "output prefix is null");
        FaceSample f = generate_face(seed, s->cfg.resolution);
        std::string prefix(out_prefix);
        save_ppm(f.image, prefix + ".ppm");
        save_pgm(f.parsing, f.resolution, f.resolution, prefix + "_parsing.pgm");
        save_tensor(f.depth, prefix + "_depth.tens");
        return DASFFT_OK;
    });
}

dasfft_status dasfft_degrade(dasfft_session* s, const char* hq_ppm, const char* depth_tens,
                             uint64_t seed, const char* out_prefix) {
    return guarded(s, [&]() {
        if (!hq_ppm || !depth_tens || !out_prefix)
            return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "null path argument");
        if (!std::filesystem::exists(hq_ppm) || !std::filesystem::exists(depth_tens))
            return fail(s, DASFFT_ERR_IO, "degrade: input file not found");
        Tensor hq = load_ppm(hq_ppm);
        Tensor depth = load_tensor(depth_tens);
        DegradationParams p = sample_params(seed, s->cfg.m_min, s->cfg.m_max);
        Tensor lq = degrade(hq, depth, p);
        std::string prefix(out_prefix);
        save_ppm(lq, prefix + ".ppm");
        std::ofstream os(prefix + "_params.txt");
        os << params_to_text(p);
        return DASFFT_OK;
    });
}

dasfft_status dasfft_pretrain_encoder(dasfft_session* s) {
    return guarded(s, [&]() {
        s->pipeline().pretrain_encoder();
        return DASFFT_OK;
    });
}

dasfft_status dasfft_align_dafe(dasfft_session* s, double* initial_mse, double* final_mse) {
    return guarded(s, [&]() {
        AlignReport rep = s->pipeline().align_dafe();
        if (initial_mse) *initial_mse = rep.initial_mse;
        if (final_mse) *final_mse = rep.final_mse;
        return DASFFT_OK;
    });
}

dasfft_status dasfft_train(dasfft_session* s, double* initial_rec, double* final_rec) {
    return guarded(s, [&]() {
        std::ofstream log(std::filesystem::path(s->cfg.out_dir) / "train_log.csv");
        TrainResult res = s->pipeline().train_gan(&log);
        if (initial_rec) *initial_rec = res.initial_rec;
        if (final_rec) *final_rec = res.final_rec;
        return DASFFT_OK;
    });
}

dasfft_status dasfft_restore(dasfft_session* s, const char* lq_ppm, const char* parsing_pgm,
                             const char* out_ppm) {
    return guarded(s, [&]() {
        if (!lq_ppm || !parsing_pgm || !out_ppm)
            return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "null path argument");
        if (!std::filesystem::exists(lq_ppm) || !std::filesystem::exists(parsing_pgm))
            return fail(s, DASFFT_ERR_IO, "restore: input file not found");
        Tensor lq = load_ppm(lq_ppm);
        int h = 0, w = 0;
        std::vector<int> parsing = load_pgm(parsing_pgm, h, w);
        if (h != lq.dim(1) || w != lq.dim(2))
            return fail(s, DASFFT_ERR_INVALID_ARGUMENT, "restore: parsing/image size mismatch");
        Tensor out = s->pipeline().restore(lq, parsing, nullptr);
        save_ppm(out, out_ppm);
        return DASFFT_OK;
    });
}

dasfft_status dasfft_eval(dasfft_session* s, double* mean_psnr, double* mean_ssim) {
    return guarded(s, [&]() {
        EvalResult res = s->pipeline().evaluate();
        if (mean_psnr) *mean_psnr = res.restored.mean_psnr();
        if (mean_ssim) *mean_ssim = res.restored.mean_ssim();
        return DASFFT_OK;
    });
}

dasfft_status dasfft_gradcheck(dasfft_session* s, const char* report_path, int* failures) {
    return guarded(s, [&]() {
        int n = 0;
        if (report_path) {
            std::ofstream os(report_path);
            if (!os) return fail(s, DASFFT_ERR_IO, "gradcheck: cannot open report file");
            n = run_gradcheck(os);
        } else {
            n = run_gradcheck(std::cout);
        }
        if (failures) *failures = n;
        return DASFFT_OK;
    });
}

}  // extern "C"
