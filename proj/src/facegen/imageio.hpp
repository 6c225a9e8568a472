#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace dasfft {

// Binary PPM (P6, 8-bit) for [3,H,W] images in [0,1].
void save_ppm(const Tensor& img, const std::string& path);
Tensor load_ppm(const std::string& path);

// Binary PGM (P5, 8-bit) for integer label maps [H,W].
void save_pgm(const std::vector<int>& labels, int h, int w, const std::string& path);
std::vector<int> load_pgm(const std::string& path, int& h, int& w);

}  // namespace dasfft
