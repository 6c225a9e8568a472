#include "harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dasfft {

GeneratorConfig RunConfig::gen_config() const {
    GeneratorConfig g;
    g.resolution = resolution;
    g.scales = 1;
    while ((4 << (g.scales - 1)) < resolution) ++g.scales;
    static const int kSchedule[] = {64, 64, 32, 16, 8};
    g.channels.assign(static_cast<std::size_t>(g.scales), 8);
    for (int i = 0; i < g.scales; ++i) g.channels[static_cast<std::size_t>(i)] = kSchedule[std::min(i, 4)];
    g.init_seed = master_seed ^ 0xda5f0001ull;
    return g;
}

void RunConfig::validate() const {
    require(resolution >= 16 && (resolution & (resolution - 1)) == 0,
            "config: resolution must be a power of two >= 16");
    require(train_count > 0 && test_count > 0 && batch > 0, "config: counts must be positive");
    require(pretrain_steps >= 0 && align_steps >= 0 && gan_steps >= 0, "config: negative step count");
    require(m_min >= 0 && m_max >= m_min, "config: bad rain-layer range");
    require(lr_gen > 0 && lr_disc > 0 && lr_align > 0 && lr_pretrain > 0, "config: learning rates must be positive");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "master_seed") master_seed = std::stoull(value);
    else if (key == "resolution") resolution = std::stoi(value);
    else if (key == "train_count") train_count = std::stoi(value);
    else if (key == "test_count") test_count = std::stoi(value);
    else if (key == "pretrain_steps") pretrain_steps = std::stoi(value);
    else if (key == "align_steps") align_steps = std::stoi(value);
    else if (key == "gan_steps") gan_steps = std::stoi(value);
    else if (key == "lr_gen") lr_gen = std::stod(value);
    else if (key == "lr_disc") lr_disc = std::stod(value);
    else if (key == "lr_align") lr_align = std::stod(value);
    else if (key == "lr_pretrain") lr_pretrain = std::stod(value);
    else if (key == "batch") batch = std::stoi(value);
    else if (key == "lambda_s") weights.lambda_s = std::stod(value);
    else if (key == "lambda_rec") weights.lambda_rec = std::stod(value);
    else if (key == "lambda_g") weights.lambda_g = std::stod(value);
    else if (key == "m_min") m_min = std::stoi(value);
    else if (key == "m_max") m_max = std::stoi(value);
    else if (key == "out_dir") out_dir = value;
    else if (key == "ablation") {
        if (value == "sfft_only") ablation = Ablation::SfftOnly;
        else if (value == "sfft_dafe") ablation = Ablation::SfftDafe;
        else throw std::invalid_argument("config: ablation must be sfft_only or sfft_dafe, got '" + value + "'");
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config " + path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        cfg.apply(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::apply_env_overrides() {
    if (const char* env = std::getenv("DASFFT_SEED")) master_seed = std::stoull(env);
}

}  // namespace dasfft
