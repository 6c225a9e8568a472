#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace dasfft {

// One rain streak layer: seeded Gaussian noise clamped to [0,1], then a
// normalized motion-line filter.
struct RainLayerParams {
    double noise_mean = -1.0;   // U(-1, -0.8)
    double noise_std = 0.85;    // U(0.7, 1.0)
    int motion_length = 45;     // fixed
    double motion_angle = 90;   // degrees, from {55, 80, 90, 110, 125}
    std::uint64_t layer_seed = 0;
};

struct DegradationParams {
    double blur_sigma = 0.0;    // U(0, 2.5)
    int down_target = 64;       // shorter-side target in pixels, U{32..256}
    std::vector<RainLayerParams> rain_layers;
    double beta = 3.6;          // U(2.6, 4.6)
    double atmospheric[3] = {0.5, 0.5, 0.5};  // per RGB channel, U(0.1, 0.8)
    std::uint64_t master_seed = 0;
};

inline const double kRainAngles[5] = {55, 80, 90, 110, 125};

// k = 2*ceil(3*sigma)+1 (minimum 1), normalized to sum 1; sigma=0 is the
// 1x1 identity kernel.
Tensor gaussian_kernel(double sigma);

// Normalized anti-aliased line segment of the given length through the
// kernel center at the given angle.
Tensor motion_kernel(int length, double angle_deg);

Tensor make_rain_layer(int h, int w, const RainLayerParams& p);

// T = exp(-beta * D_n), D_n the min-max normalized reciprocal depth.
Tensor transmission_map(const Tensor& depth, double beta);

DegradationParams sample_params(std::uint64_t master_seed, int m_min, int m_max);

// Full blind degradation: blur, down/up resample, rain layers, haze blend.
// t_override substitutes the transmission map (test hook).
Tensor degrade(const Tensor& hq, const Tensor& depth, const DegradationParams& p,
               const Tensor* t_override = nullptr);

// key=value text round-trip for exact replay of one parameter draw.
std::string params_to_text(const DegradationParams& p);
DegradationParams params_from_text(const std::string& text);

}  // namespace dasfft
