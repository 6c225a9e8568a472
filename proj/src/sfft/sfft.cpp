#include "sfft/sfft.hpp"

#include <algorithm>
#include <cmath>

namespace dasfft {

std::vector<int> downsample_parsing(const std::vector<int>& parsing, int from_res, int to_res) {
    require(static_cast<int>(parsing.size()) == from_res * from_res, "downsample_parsing: size mismatch");
    if (to_res == from_res) return parsing;
    std::vector<int> out(static_cast<std::size_t>(to_res) * to_res);
    for (int y = 0; y < to_res; ++y) {
        int sy = std::min(from_res - 1, static_cast<int>((y + 0.5) * from_res / to_res));
        for (int x = 0; x < to_res; ++x) {
            int sx = std::min(from_res - 1, static_cast<int>((x + 0.5) * from_res / to_res));
            out[static_cast<std::size_t>(y) * to_res + x] = parsing[static_cast<std::size_t>(sy) * from_res + sx];
        }
    }
    return out;
}

std::vector<ComponentCrop> extract_components(const Tensor& image, const std::vector<int>& parsing,
                                              const std::vector<ComponentBox>& boxes) {
    require(image.ndim() == 3 && image.dim(0) == 3, "extract_components: image must be [3,H,W]");
    int h = image.dim(1), w = image.dim(2);
    require(static_cast<int>(parsing.size()) == h * w, "extract_components: parsing size mismatch");
    std::vector<ComponentCrop> crops;
    crops.reserve(boxes.size());
    for (const ComponentBox& box : boxes) {
        // round outward, clamp, keep at least one pixel
        int x0 = std::clamp(static_cast<int>(std::floor(box.x0 * w)), 0, w - 1);
        int y0 = std::clamp(static_cast<int>(std::floor(box.y0 * h)), 0, h - 1);
        int x1 = std::clamp(static_cast<int>(std::ceil(box.x1 * w)), x0 + 1, w);
        int y1 = std::clamp(static_cast<int>(std::ceil(box.y1 * h)), y0 + 1, h);
        int cw = x1 - x0, ch = y1 - y0;
        ComponentCrop crop;
        crop.component = box.component;
        crop.image = Tensor({3, ch, cw});
        crop.parsing_mask = Tensor({1, ch, cw});
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) {
                for (int c = 0; c < 3; ++c) crop.image.at3(c, y, x) = image.at3(c, y0 + y, x0 + x);
                int label = parsing[static_cast<std::size_t>(y0 + y) * w + (x0 + x)];
                // component 0 is the entire face frame; its mask covers everything
                crop.parsing_mask.at3(0, y, x) =
                    (box.component == 0 || label == box.component) ? 1.0 : 0.0;
            }
        crops.push_back(std::move(crop));
    }
    return crops;
}

namespace {

// shared conv-relu stack of the SFF extractor: 3 hidden blocks + head to 2C,
// then global average pooling; returns (first C, last C).
std::pair<Var, Var> psff_forward(FwdCtx& ctx, Var input, const std::string& prefix, int c_out) {
    Var h = input;
    for (int i = 0; i < 3; ++i) {
        std::string base = prefix + "/conv" + std::to_string(i);
        h = conv2d(ctx.tape, h, ctx.param(base + ".w"), ctx.param(base + ".b"), Padding::Same);
        h = pointwise(ctx.tape, h, Pointwise::Relu);
    }
    h = conv2d(ctx.tape, h, ctx.param(prefix + "/conv3.w"), ctx.param(prefix + "/conv3.b"),
               Padding::Same);
    Var pooled = global_avg_pool(ctx.tape, h);
    return {slice0(ctx.tape, pooled, 0, c_out), slice0(ctx.tape, pooled, c_out, 2 * c_out)};
}

}  // namespace

std::pair<Var, Var> sff_extract(FwdCtx& ctx, const ComponentCrop& crop, const std::string& prefix,
                                int c_out) {
    int h = crop.image.dim(1), w = crop.image.dim(2);
    Tensor joined({4, h, w});
    std::copy(crop.image.data.begin(), crop.image.data.end(), joined.data.begin());
    std::copy(crop.parsing_mask.data.begin(), crop.parsing_mask.data.end(),
              joined.data.begin() + static_cast<std::ptrdiff_t>(3) * h * w);
    Var input = ctx.tape.leaf(std::move(joined));
    return psff_forward(ctx, input, prefix, c_out);
}

std::pair<Var, Var> sff_extract_map(FwdCtx& ctx, Var fused, const std::string& prefix, int c_out) {
    return psff_forward(ctx, fused, prefix, c_out);
}

Var sft_apply(Tape& tape, Var feature, Var y_s, Var y_b) {
    return renorm(tape, feature, y_s, y_b, kSftEps);
}

std::vector<Var> facial_attention(FwdCtx& ctx, const std::vector<Var>& maps,
                                  const std::string& prefix) {
    require(!maps.empty(), "facial_attention: no component maps");
    const Tensor& first = ctx.tape.val(maps[0]);
    for (Var m : maps)
        require_same_shape(ctx.tape.val(m), first, "facial_attention");
    Var h = concat_channels(ctx.tape, maps);
    for (int i = 0; i < 2; ++i) {
        std::string base = prefix + "/conv" + std::to_string(i);
        h = conv2d(ctx.tape, h, ctx.param(base + ".w"), ctx.param(base + ".b"), Padding::Same);
        h = pointwise(ctx.tape, h, Pointwise::Relu);
    }
    h = conv2d(ctx.tape, h, ctx.param(prefix + "/conv2.w"), ctx.param(prefix + "/conv2.b"),
               Padding::Same);
    h = pointwise(ctx.tape, h, Pointwise::Sigmoid);
    std::vector<Var> out;
    for (std::size_t j = 0; j < maps.size(); ++j)
        out.push_back(slice0(ctx.tape, h, static_cast<int>(j), static_cast<int>(j) + 1));
    return out;
}

std::pair<Var, Var> fuse_sff(FwdCtx& ctx, const std::vector<Var>& maps,
                             const std::vector<Var>& weights, const std::string& prefix, int c_out) {
    require(maps.size() == weights.size() && !maps.empty(), "fuse_sff: map/weight count mismatch");
    Var fused = mul_broadcast_map(ctx.tape, maps[0], weights[0]);
    for (std::size_t j = 1; j < maps.size(); ++j)
        fused = add(ctx.tape, fused, mul_broadcast_map(ctx.tape, maps[j], weights[j]));
    return psff_forward(ctx, fused, prefix, c_out);
}

Var sfft_enhance(FwdCtx& ctx, Var f_prev, std::pair<Var, Var> y, std::pair<Var, Var> w,
                 int upsample_factor, const std::string& conv_prefix, int c_out) {
    Var up = upsample(ctx.tape, f_prev, upsample_factor, Resample::Bilinear);
    Var g = conv2d(ctx.tape, up, ctx.param(conv_prefix + ".w"), ctx.param(conv_prefix + ".b"),
                   Padding::Same);
    require(ctx.tape.val(g).dim(0) == c_out, "sfft_enhance: refinement conv width mismatch");
    Var s = y.first, b = y.second;
    if (w.first >= 0) {
        require(ctx.tape.val(w.first).size() == ctx.tape.val(y.first).size(),
                "sfft_enhance: SFF length mismatch between the two sources");
        s = add(ctx.tape, s, w.first);
        b = add(ctx.tape, b, w.second);
    }
    return sft_apply(ctx.tape, g, s, b);
}

void init_sff_stack(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                    std::uint64_t seed) {
    int mid = std::max(4, c_out / 2);  // narrow trunk, widened only by the head
    store.create(prefix + "/conv0.w", {mid, c_in, 3, 3}, seed, c_in * 9);
    store.create(prefix + "/conv0.b", {mid}, seed, 0);
    for (int i = 1; i < 3; ++i) {
        store.create(prefix + "/conv" + std::to_string(i) + ".w", {mid, mid, 3, 3}, seed, mid * 9);
        store.create(prefix + "/conv" + std::to_string(i) + ".b", {mid}, seed, 0);
    }
    store.create(prefix + "/conv3.w", {2 * c_out, mid, 3, 3}, seed, mid * 9);
    store.create(prefix + "/conv3.b", {2 * c_out}, seed, 0);
}

void init_attention_stack(ParamStore& store, const std::string& prefix, int c_in, int n_components,
                          std::uint64_t seed) {
    int hidden = std::min(8, std::max(4, c_in / kNumComponents));
    store.create(prefix + "/conv0.w", {hidden, c_in, 3, 3}, seed, c_in * 9);
    store.create(prefix + "/conv0.b", {hidden}, seed, 0);
    store.create(prefix + "/conv1.w", {hidden, hidden, 3, 3}, seed, hidden * 9);
    store.create(prefix + "/conv1.b", {hidden}, seed, 0);
    store.create(prefix + "/conv2.w", {n_components, hidden, 3, 3}, seed, hidden * 9);
    store.create(prefix + "/conv2.b", {n_components}, seed, 0);
}

}  // namespace dasfft
