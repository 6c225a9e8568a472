#pragma once

#include <cstdint>

#include "core/tensor.hpp"

namespace dasfft {

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moment accumulators; shapes track the parameter.
struct AdamState {
    Tensor m;
    Tensor v;
    std::int64_t step = 0;

    void ensure_shape(const Tensor& param) {
        if (m.shape != param.shape) {
            m = Tensor::zeros(param.shape);
            v = Tensor::zeros(param.shape);
            step = 0;
        }
    }
};

// Bias-corrected Adam update, in place.
void adam_step(AdamState& st, const AdamHyper& hp, Tensor& param, const Tensor& grad);

}  // namespace dasfft
