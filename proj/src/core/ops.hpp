#pragma once

#include <vector>

#include "core/tape.hpp"

namespace dasfft {

enum class Padding { Same, Valid };
enum class Pointwise { Relu, Sigmoid };
enum class Resample { Nearest, Bilinear };

// Elementwise.
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var affine(Tape& t, Var a, double m, double c);  // m*x + c
Var scale(Tape& t, Var a, double m);
Var pointwise(Tape& t, Var a, Pointwise fn);

// conv2d: cross-correlation of x[Ci,H,W] with k[Co,Ci,kh,kw] (+bias[Co]).
// Same padding requires odd kernel extents; pass bias = -1 for none.
Var conv2d(Tape& t, Var x, Var k, Var bias, Padding pad, int stride = 1);

// y = W[m,n] * x[n] + b[m]; bias = -1 for none.
Var linear(Tape& t, Var x, Var W, Var bias);

Var global_avg_pool(Tape& t, Var x);  // [C,H,W] -> [C]

Var upsample(Tape& t, Var x, int factor, Resample mode);
Var resize_bilinear(Tape& t, Var x, int out_h, int out_w);

Var concat_channels(Tape& t, const std::vector<Var>& xs);
Var slice0(Tape& t, Var x, int lo, int hi);  // slice along dim 0, [lo,hi)

// Per-channel population statistics over spatial positions.
Var channel_mean(Tape& t, Var x);
Var channel_std(Tape& t, Var x);

// The statistical feature transform core: per channel c,
// out = s[c]*(x - mean_c)/(std_c + eps) + b[c].
Var renorm(Tape& t, Var x, Var s, Var b, double eps);

Var mul_broadcast_map(Tape& t, Var x, Var w);  // x[C,H,W] * w[1,H,W]

Var reshape(Tape& t, Var x, std::vector<int> shape);

Var sum(Tape& t, Var x);                 // scalar
Var mse(Tape& t, Var a, Var b);          // scalar, mean over elements
Var masked_gram(Tape& t, Var feat, const Tensor& mask);  // [C,C]

// Non-tape forward helpers (shared by degradation and metrics paths).
Tensor conv2d_fwd(const Tensor& x, const Tensor& k, const Tensor* bias, Padding pad, int stride = 1);
Tensor resize_bilinear_fwd(const Tensor& x, int out_h, int out_w);
Tensor upsample_fwd(const Tensor& x, int factor, Resample mode);
void channel_stats_fwd(const Tensor& x, std::vector<double>& mu, std::vector<double>& sigma);

}  // namespace dasfft
