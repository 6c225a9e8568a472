#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"
#include "sfft/sfft.hpp"

using namespace dasfft;

namespace {

Tensor randt(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    Rng r(seed);
    for (double& v : t.data) v = r.uniform(lo, hi);
    return t;
}

void zero_prefix(ParamStore& store, const std::string& prefix) {
    for (const std::string& name : store.names_with_prefix(prefix))
        for (double& v : store.value(name).data) v = 0.0;
}

}  // namespace

TEST_CASE("nearest parsing downsample keeps labels intact") {
    std::vector<int> parsing(16 * 16, 0);
    for (int y = 8; y < 16; ++y)
        for (int x = 8; x < 16; ++x) parsing[static_cast<std::size_t>(y) * 16 + x] = 4;
    std::vector<int> small = downsample_parsing(parsing, 16, 4);
    REQUIRE(small.size() == 16);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(small[static_cast<std::size_t>(y) * 4 + x] == ((y >= 2 && x >= 2) ? 4 : 0));
}

TEST_CASE("whole-frame crop reproduces the input image") {
    FaceSample f = generate_face(31, 64);
    std::vector<ComponentCrop> crops = extract_components(f.image, f.parsing, component_boxes());
    REQUIRE(crops.size() == 5);
    CHECK(crops[0].image.data == f.image.data);
    CHECK(crops[0].image.shape == f.image.shape);
}

TEST_CASE("left-eye crop extent follows the round-outward box arithmetic") {
    FaceSample f = generate_face(32, 64);
    std::vector<ComponentCrop> crops = extract_components(f.image, f.parsing, component_boxes());
    // box (0.20, 0.30, 0.45, 0.50) on a 64px grid: x in [12, 29), y in [19, 32)
    CHECK(crops[1].image.shape == std::vector<int>{3, 13, 17});
    CHECK(crops[1].parsing_mask.shape == std::vector<int>{1, 13, 17});
}

TEST_CASE("component mask crops are exact label indicators") {
    const int res = 32;
    FaceSample f = generate_face(33, res);
    std::vector<ComponentCrop> crops = extract_components(f.image, f.parsing, component_boxes());
    for (const ComponentCrop& crop : crops) {
        for (double v : crop.parsing_mask.data) CHECK((v == 0.0 || v == 1.0));
    }
    // whole-face mask covers all non-background pixels plus the background class
    long mask_on = 0;
    for (double v : crops[0].parsing_mask.data)
        if (v == 1.0) ++mask_on;
    CHECK(mask_on == res * res);
    // mouth mask matches the label map over the mouth box
    long label_on = 0;
    for (int label : f.parsing)
        if (label == kMouth) ++label_on;
    long crop_on = 0;
    for (double v : crops[4].parsing_mask.data)
        if (v == 1.0) ++crop_on;
    CHECK(crop_on == label_on);
}

TEST_CASE("a zeroed extraction stack emits zero statistics of width C") {
    const int c_out = 6;
    ParamStore store;
    init_sff_stack(store, "psff", 4, c_out, 9);
    zero_prefix(store, "psff");
    FaceSample f = generate_face(34, 32);
    std::vector<ComponentCrop> crops = extract_components(f.image, f.parsing, component_boxes());
    Tape tape;
    FwdCtx ctx(tape, store);
    auto [y_s, y_b] = sff_extract(ctx, crops[3], "psff", c_out);
    REQUIRE(tape.val(y_s).shape == std::vector<int>{c_out});
    REQUIRE(tape.val(y_b).shape == std::vector<int>{c_out});
    for (double v : tape.val(y_s).data) CHECK(v == 0.0);
    for (double v : tape.val(y_b).data) CHECK(v == 0.0);
}

TEST_CASE("statistic vectors have width C for every crop size") {
    const int c_out = 5;
    ParamStore store;
    init_sff_stack(store, "psff", 4, c_out, 10);
    FaceSample f = generate_face(35, 64);
    std::vector<ComponentCrop> crops = extract_components(f.image, f.parsing, component_boxes());
    for (const ComponentCrop& crop : crops) {
        Tape tape;
        FwdCtx ctx(tape, store);
        auto [y_s, y_b] = sff_extract(ctx, crop, "psff", c_out);
        CHECK(tape.val(y_s).shape == std::vector<int>{c_out});
        CHECK(tape.val(y_b).shape == std::vector<int>{c_out});
    }
}

TEST_CASE("feeding a map's own statistics back through the transform is the identity") {
    Tensor f = randt({3, 8, 8}, 41);
    std::vector<double> mu, sigma;
    channel_stats_fwd(f, mu, sigma);
    Tape tape;
    Var x = tape.leaf(f);
    Var y_s = tape.leaf(Tensor::from_vector(sigma));
    Var y_b = tape.leaf(Tensor::from_vector(mu));
    Var out = sft_apply(tape, x, y_s, y_b);
    for (std::size_t i = 0; i < f.data.size(); ++i)
        CHECK(tape.val(out).data[i] == doctest::Approx(f.data[i]).epsilon(1e-3));
}

TEST_CASE("transformed maps take on the requested statistics") {
    Tensor f = randt({4, 8, 8}, 42, -2.0, 2.0);
    Tensor s = randt({4}, 43, -2.0, 2.0);
    Tensor b = randt({4}, 44, -2.0, 2.0);
    Tape tape;
    Var out = sft_apply(tape, tape.leaf(f), tape.leaf(s), tape.leaf(b));
    std::vector<double> mu_in, sg_in, mu_out, sg_out;
    channel_stats_fwd(f, mu_in, sg_in);
    channel_stats_fwd(tape.val(out), mu_out, sg_out);
    for (int c = 0; c < 4; ++c) {
        CHECK(std::abs(mu_out[static_cast<std::size_t>(c)] - b.data[static_cast<std::size_t>(c)]) < 1e-12);
        double want = std::abs(s.data[static_cast<std::size_t>(c)]) * sg_in[static_cast<std::size_t>(c)] /
                      (sg_in[static_cast<std::size_t>(c)] + kSftEps);
        CHECK(std::abs(sg_out[static_cast<std::size_t>(c)] - want) < 1e-9);
        CHECK(std::abs(sg_out[static_cast<std::size_t>(c)] - std::abs(s.data[static_cast<std::size_t>(c)])) < 1e-4);
    }
}

TEST_CASE("a constant channel lands exactly on the requested bias") {
    Tape tape;
    Var out = sft_apply(tape, tape.leaf(Tensor::full({1, 4, 4}, 3.3)),
                        tape.leaf(Tensor::from_vector({2.0})), tape.leaf(Tensor::from_vector({5.0})));
    // rounding in the channel mean is amplified by the 1e-5 stabilizer
    for (double v : tape.val(out).data) CHECK(v == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("zeroed attention head weights give uniform half-weight maps") {
    const int c = 4, n = kNumComponents;
    ParamStore store;
    init_attention_stack(store, "att", c * n, n, 11);
    zero_prefix(store, "att");
    Tape tape;
    FwdCtx ctx(tape, store);
    std::vector<Var> maps;
    for (int j = 0; j < n; ++j) maps.push_back(tape.leaf(randt({c, 8, 8}, 50 + static_cast<std::uint64_t>(j))));
    std::vector<Var> weights = facial_attention(ctx, maps, "att");
    REQUIRE(weights.size() == static_cast<std::size_t>(n));
    for (Var w : weights) {
        REQUIRE(tape.val(w).shape == std::vector<int>{1, 8, 8});
        for (double v : tape.val(w).data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("attention weights always fall inside (0,1)") {
    const int c = 4, n = kNumComponents;
    ParamStore store;
    init_attention_stack(store, "att", c * n, n, 12);
    Tape tape;
    FwdCtx ctx(tape, store);
    std::vector<Var> maps;
    for (int j = 0; j < n; ++j) maps.push_back(tape.leaf(randt({c, 8, 8}, 60 + static_cast<std::uint64_t>(j))));
    for (Var w : facial_attention(ctx, maps, "att"))
        for (double v : tape.val(w).data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
}

TEST_CASE("single-component unit-weight fusion equals direct map extraction") {
    const int c = 4;
    ParamStore store;
    init_sff_stack(store, "fuse", c, c, 13);
    Tensor f = randt({c, 8, 8}, 70);
    Tape tape;
    FwdCtx ctx(tape, store);
    Var fv = tape.leaf(f);
    Var ones = tape.leaf(Tensor::full({1, 8, 8}, 1.0));
    auto [fs, fb] = fuse_sff(ctx, {fv}, {ones}, "fuse", c);
    auto [ds, db] = sff_extract_map(ctx, fv, "fuse", c);
    for (int i = 0; i < c; ++i) {
        CHECK(tape.val(fs).data[static_cast<std::size_t>(i)] ==
              doctest::Approx(tape.val(ds).data[static_cast<std::size_t>(i)]).epsilon(1e-12));
        CHECK(tape.val(fb).data[static_cast<std::size_t>(i)] ==
              doctest::Approx(tape.val(db).data[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("zero attention weights reduce fusion to the stack on a zero map") {
    const int c = 4;
    ParamStore store;
    init_sff_stack(store, "fuse", c, c, 14);
    Tape tape;
    FwdCtx ctx(tape, store);
    std::vector<Var> maps, weights;
    for (int j = 0; j < 3; ++j) {
        maps.push_back(tape.leaf(randt({c, 8, 8}, 80 + static_cast<std::uint64_t>(j))));
        weights.push_back(tape.leaf(Tensor::zeros({1, 8, 8})));
    }
    auto [fs, fb] = fuse_sff(ctx, maps, weights, "fuse", c);
    auto [zs, zb] = sff_extract_map(ctx, tape.leaf(Tensor::zeros({c, 8, 8})), "fuse", c);
    for (int i = 0; i < c; ++i) {
        CHECK(tape.val(fs).data[static_cast<std::size_t>(i)] == tape.val(zs).data[static_cast<std::size_t>(i)]);
        CHECK(tape.val(fb).data[static_cast<std::size_t>(i)] == tape.val(zb).data[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("the enhancement step with a silent second source is a plain transform") {
    const int c = 4;
    ParamStore store;
    store.create("enh/conv.w", {c, c, 3, 3}, 15, c * 9);
    store.create("enh/conv.b", {c}, 15, 0);
    Tensor f_prev = randt({c, 4, 4}, 90);
    Tensor ys = randt({c}, 91), yb = randt({c}, 92);

    Tape tape;
    FwdCtx ctx(tape, store);
    Var fp = tape.leaf(f_prev);
    Var y_s = tape.leaf(ys), y_b = tape.leaf(yb);
    Var zero_s = tape.leaf(Tensor::zeros({c})), zero_b = tape.leaf(Tensor::zeros({c}));
    Var with_zero = sfft_enhance(ctx, fp, {y_s, y_b}, {zero_s, zero_b}, 2, "enh/conv", c);
    Var skipped = sfft_enhance(ctx, fp, {y_s, y_b}, {-1, -1}, 2, "enh/conv", c);

    // manual path: bilinear upsample, refinement conv, statistic transform
    Var g = conv2d(tape, upsample(tape, fp, 2, Resample::Bilinear), ctx.param("enh/conv.w"),
                   ctx.param("enh/conv.b"), Padding::Same);
    Var manual = sft_apply(tape, g, y_s, y_b);

    REQUIRE(tape.val(with_zero).shape == std::vector<int>{c, 8, 8});
    for (std::size_t i = 0; i < tape.val(manual).data.size(); ++i) {
        CHECK(std::abs(tape.val(with_zero).data[i] - tape.val(manual).data[i]) < 1e-12);
        CHECK(tape.val(skipped).data[i] == tape.val(manual).data[i]);
    }
}

TEST_CASE("cancelling statistic sources zero the enhanced map") {
    const int c = 3;
    ParamStore store;
    store.create("enh/conv.w", {c, c, 3, 3}, 16, c * 9);
    store.create("enh/conv.b", {c}, 16, 0);
    Tape tape;
    FwdCtx ctx(tape, store);
    Tensor s = randt({c}, 95), b = randt({c}, 96);
    Tensor ns = s, nb = b;
    for (double& v : ns.data) v = -v;
    for (double& v : nb.data) v = -v;
    Var out = sfft_enhance(ctx, tape.leaf(randt({c, 4, 4}, 97)), {tape.leaf(s), tape.leaf(b)},
                           {tape.leaf(ns), tape.leaf(nb)}, 2, "enh/conv", c);
    for (double v : tape.val(out).data) CHECK(std::abs(v) < 1e-12);
}
