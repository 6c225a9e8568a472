#pragma once

#include <cstdint>
#include <string>

#include "losses/losses.hpp"
#include "nets/networks.hpp"

namespace dasfft {

enum class Ablation { SfftOnly, SfftDafe };

struct RunConfig {
    std::uint64_t master_seed = 1234;
    int resolution = 64;
    int train_count = 200;
    int test_count = 50;
    int pretrain_steps = 1000;
    int align_steps = 2000;
    int gan_steps = 2000;
    double lr_gen = 0.0001;
    double lr_disc = 0.0004;
    double lr_align = 0.001;
    double lr_pretrain = 0.001;
    int batch = 4;
    LossWeights weights;
    int m_min = 1;
    int m_max = 3;
    Ablation ablation = Ablation::SfftDafe;
    std::string out_dir = ".";

    GeneratorConfig gen_config() const;
    void validate() const;

    // `key = value` text; unknown keys are rejected.
    void apply(const std::string& key, const std::string& value);
    static RunConfig from_file(const std::string& path);
    // DASFFT_SEED, when set, overrides the master seed.
    void apply_env_overrides();
};

}  // namespace dasfft
