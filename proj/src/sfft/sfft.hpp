#pragma once

#include <utility>
#include <vector>

#include "facegen/facegen.hpp"
#include "nets/networks.hpp"

namespace dasfft {

inline constexpr double kSftEps = 1e-5;

// One facial component at the current scale: image crop plus a one-hot
// parsing mask crop (component 0 keeps the full frame and full-face mask).
struct ComponentCrop {
    int component;
    Tensor image;         // [3,h,w]
    Tensor parsing_mask;  // [1,h,w] in {0,1}
};

// Nearest-neighbor downsampling of a parsing map from R x R to r x r.
std::vector<int> downsample_parsing(const std::vector<int>& parsing, int from_res, int to_res);

// N=5 crops via the fixed fractional boxes, rounded outward, min 1x1.
std::vector<ComponentCrop> extract_components(const Tensor& image, const std::vector<int>& parsing,
                                              const std::vector<ComponentBox>& boxes);

// SFF extraction stack: concat(image, mask) -> 3x [conv3x3+relu] -> conv to
// 2C -> global average pool; returns the (scale, bias) vector pair.
std::pair<Var, Var> sff_extract(FwdCtx& ctx, const ComponentCrop& crop, const std::string& prefix,
                                int c_out);

// Same stack applied to an already-fused C-channel feature map.
std::pair<Var, Var> sff_extract_map(FwdCtx& ctx, Var fused, const std::string& prefix, int c_out);

// out = y_s * (F - mean)/(std + eps) + y_b, per channel.
Var sft_apply(Tape& tape, Var feature, Var y_s, Var y_b);

// Attention over the N component feature maps: concat -> 2x [conv3x3+relu]
// -> conv to N channels -> sigmoid; returns N single-channel weight maps.
std::vector<Var> facial_attention(FwdCtx& ctx, const std::vector<Var>& maps,
                                  const std::string& prefix);

// U = sum_j F_j * W_j, then the fusion SFF stack on U.
std::pair<Var, Var> fuse_sff(FwdCtx& ctx, const std::vector<Var>& maps,
                             const std::vector<Var>& weights, const std::string& prefix, int c_out);

// F^i = SFT(conv(upsample(F^{i-1})), y + w); pass w vars as -1 to skip the
// DAFE contribution (the SFFT-only ablation).
Var sfft_enhance(FwdCtx& ctx, Var f_prev, std::pair<Var, Var> y, std::pair<Var, Var> w,
                 int upsample_factor, const std::string& conv_prefix, int c_out);

// Parameter creation for one SFF stack / attention stack.
void init_sff_stack(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                    std::uint64_t seed);
void init_attention_stack(ParamStore& store, const std::string& prefix, int c_in, int n_components,
                          std::uint64_t seed);

}  // namespace dasfft
