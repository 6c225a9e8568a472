#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"
#include "facegen/facegen.hpp"
#include "losses/losses.hpp"

using namespace dasfft;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig cfg;
    cfg.scales = 4;
    cfg.resolution = 32;
    cfg.channels = {8, 8, 6, 4};
    cfg.embedding_width = 8;
    cfg.fc_hidden = 8;
    cfg.init_seed = 78;
    return cfg;
}

Tensor randt(std::vector<int> shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Tensor t(shape);
    Rng r(seed);
    for (double& v : t.data) v = r.uniform(lo, hi);
    return t;
}

void zero_prefix(ParamStore& store, const std::string& prefix) {
    for (const std::string& name : store.names_with_prefix(prefix))
        for (double& v : store.value(name).data) v = 0.0;
}

std::vector<Var> leaf_scalars(Tape& tape, std::vector<double> vals) {
    std::vector<Var> out;
    for (double v : vals) out.push_back(tape.leaf(Tensor::scalar(v)));
    return out;
}

}  // namespace

TEST_CASE("reconstruction loss vanishes on identical images") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_discriminators(store, cfg);
    Tensor img = randt({3, 32, 32}, 1);
    Tape tape;
    FwdCtx ctx(tape, store);
    Var l = reconstruction_loss(ctx, tape.leaf(img), tape.leaf(img));
    CHECK(tape.val(l).data[0] == 0.0);
}

TEST_CASE("constant offset against silent discriminators leaves only the pixel term") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_discriminators(store, cfg);
    zero_prefix(store, "disc/");
    const double d = 0.21;
    Tape tape;
    FwdCtx ctx(tape, store);
    Var l = reconstruction_loss(ctx, tape.leaf(Tensor::full({3, 32, 32}, 0.5)),
                                tape.leaf(Tensor::full({3, 32, 32}, 0.5 + d)));
    CHECK(tape.val(l).data[0] == doctest::Approx(d * d).epsilon(1e-12));
}

TEST_CASE("generator hinge is the negated score sum") {
    Tape tape;
    CHECK(tape.val(hinge_gen_loss(tape, leaf_scalars(tape, {0, 0, 0}))).data[0] == 0.0);
    CHECK(tape.val(hinge_gen_loss(tape, leaf_scalars(tape, {0.5, 0.2, 0.1}))).data[0] ==
          doctest::Approx(-0.8).epsilon(1e-12));
    CHECK(tape.val(hinge_gen_loss(tape, leaf_scalars(tape, {1, 1, 1}))).data[0] ==
          doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("discriminator hinge zero and saturation cases") {
    Tape tape;
    auto real1 = leaf_scalars(tape, {1, 1, 1});
    auto fake1 = leaf_scalars(tape, {-1, -1, -1});
    CHECK(tape.val(hinge_disc_loss(tape, real1, fake1)).data[0] == 0.0);

    auto real0 = leaf_scalars(tape, {0, 0, 0});
    auto fake0 = leaf_scalars(tape, {0, 0, 0});
    CHECK(tape.val(hinge_disc_loss(tape, real0, fake0)).data[0] == doctest::Approx(6.0).epsilon(1e-12));

    auto real2 = leaf_scalars(tape, {2, 2, 2});
    auto fake2 = leaf_scalars(tape, {-2, -2, -2});
    CHECK(tape.val(hinge_disc_loss(tape, real2, fake2)).data[0] == 0.0);
}

TEST_CASE("masked gram matrix closed forms") {
    Tape tape;
    Var feat = tape.leaf(randt({3, 6, 6}, 2, -1.0, 1.0));
    Var g0 = masked_gram(tape, feat, Tensor::zeros({1, 6, 6}));
    for (double v : tape.val(g0).data) CHECK(v == 0.0);

    Var ones_feat = tape.leaf(Tensor::full({1, 6, 6}, 1.0));
    Var g1 = masked_gram(tape, ones_feat, Tensor::full({1, 6, 6}, 1.0));
    REQUIRE(tape.val(g1).shape == std::vector<int>{1, 1});
    CHECK(tape.val(g1).data[0] == doctest::Approx(1.0).epsilon(1e-12));

    // checkerboard mask: symmetric with a nonnegative diagonal
    Tensor mask = Tensor::zeros({1, 6, 6});
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) mask.at3(0, y, x) = (x + y) % 2;
    Var g = masked_gram(tape, feat, mask);
    for (int i = 0; i < 3; ++i) {
        CHECK(tape.val(g).at2(i, i) >= 0.0);
        for (int j = 0; j < 3; ++j)
            CHECK(tape.val(g).at2(i, j) == doctest::Approx(tape.val(g).at2(j, i)).epsilon(1e-12));
    }
}

TEST_CASE("style loss vanishes on identical images and is symmetric") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_encoder(store, cfg, "ehq", 1);
    FaceSample f = generate_face(7, cfg.resolution);
    Tensor other = randt({3, 32, 32}, 3);
    Tape tape;
    FwdCtx ctx(tape, store);
    Var same = style_loss(ctx, cfg, tape.leaf(f.image), tape.leaf(f.image), f.parsing);
    CHECK(tape.val(same).data[0] == 0.0);
    Var ab = style_loss(ctx, cfg, tape.leaf(f.image), tape.leaf(other), f.parsing);
    Var ba = style_loss(ctx, cfg, tape.leaf(other), tape.leaf(f.image), f.parsing);
    CHECK(tape.val(ab).data[0] == doctest::Approx(tape.val(ba).data[0]).epsilon(1e-12));
    CHECK(tape.val(ab).data[0] >= 0.0);
}

TEST_CASE("the total objective is the weighted sum of its terms") {
    Tape tape;
    Var a = tape.leaf(Tensor::scalar(2.0));
    Var b = tape.leaf(Tensor::scalar(3.0));
    Var c = tape.leaf(Tensor::scalar(4.0));

    LossWeights zero{0.0, 0.0, 0.0};
    CHECK(tape.val(total_gen_loss(tape, a, b, c, zero)).data[0] == 0.0);

    LossWeights unit{1.0, 1.0, 1.0};
    CHECK(tape.val(total_gen_loss(tape, a, b, c, unit)).data[0] == doctest::Approx(9.0).epsilon(1e-12));

    LossWeights w{1.0, 10.0, 0.1};
    double want = 1.0 * 2.0 + 10.0 * 3.0 + 0.1 * 4.0;
    CHECK(std::abs(tape.val(total_gen_loss(tape, a, b, c, w)).data[0] - want) < 1e-9);
}

TEST_CASE("embedding alignment distance closed forms") {
    Tape tape;
    Var v1 = tape.leaf(Tensor::from_vector({1.0, 1.0}));
    Var v0 = tape.leaf(Tensor::from_vector({0.0, 0.0}));
    CHECK(tape.val(dafe_alignment_loss(tape, v1, v1)).data[0] == 0.0);
    CHECK(tape.val(dafe_alignment_loss(tape, v1, v0)).data[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parsing class masks are indicator maps on the resampled grid") {
    FaceSample f = generate_face(8, 32);
    for (int label = 0; label < kNumComponents; ++label) {
        Tensor m = parsing_class_mask(f.parsing, 32, label, 32, 32);
        REQUIRE(m.shape == std::vector<int>{1, 32, 32});
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                double want = f.parsing[static_cast<std::size_t>(y) * 32 + x] == label ? 1.0 : 0.0;
                CHECK(m.at3(0, y, x) == want);
            }
    }
}
