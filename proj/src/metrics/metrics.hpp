#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace dasfft {

inline constexpr double kPsnrCap = 99.0;  // reported for zero MSE

// 10*log10(1/MSE) for images in [0,1]; identical images report the cap.
double psnr(const Tensor& a, const Tensor& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1, computed per channel and averaged.
double ssim(const Tensor& a, const Tensor& b);

struct MetricRow {
    std::string sample;
    double psnr_db;
    double ssim;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    double mean_psnr() const;
    double mean_ssim() const;
};

// `sample, psnr_db, ssim, lpips=n/a, fid=n/a` rows
void write_metric_csv(const MetricReport& report, const std::string& path);

}  // namespace dasfft
