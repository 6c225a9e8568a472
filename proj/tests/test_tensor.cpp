#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "core/fdgrad.hpp"
#include "core/ops.hpp"
#include "core/optim.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"
#include "core/tensor.hpp"

using namespace dasfft;

namespace {

Tensor randt(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    Rng r(seed);
    for (double& v : t.data) v = r.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("conv2d with a 1x1 identity kernel reproduces the input") {
    Tape tape;
    Var x = tape.leaf(randt({1, 3, 3}, 11));
    Tensor k({1, 1, 1, 1});
    k.data[0] = 1.0;
    Var y = conv2d(tape, x, tape.leaf(k), -1, Padding::Same);
    REQUIRE(tape.val(y).shape == std::vector<int>{1, 3, 3});
    for (int i = 0; i < 9; ++i) CHECK(tape.val(y).data[i] == doctest::Approx(tape.val(x).data[i]).epsilon(1e-12));
}

TEST_CASE("valid 3x3 ones kernel over a constant image sums nine copies") {
    Tape tape;
    const double c = 0.7;
    Var x = tape.leaf(Tensor::full({1, 5, 5}, c));
    Var k = tape.leaf(Tensor::full({1, 1, 3, 3}, 1.0));
    Var y = conv2d(tape, x, k, -1, Padding::Valid);
    REQUIRE(tape.val(y).shape == std::vector<int>{1, 3, 3});
    for (double v : tape.val(y).data) CHECK(v == doctest::Approx(9.0 * c).epsilon(1e-12));
}

TEST_CASE("same-padded conv maps [1,5,5] through [4,1,3,3] to [4,5,5]") {
    Tape tape;
    Var x = tape.leaf(randt({1, 5, 5}, 21));
    Var k = tape.leaf(randt({4, 1, 3, 3}, 22));
    Var b = tape.leaf(randt({4}, 23));
    Var y = conv2d(tape, x, k, b, Padding::Same);
    CHECK(tape.val(y).shape == std::vector<int>{4, 5, 5});
}

TEST_CASE("relu and sigmoid pointwise values") {
    Tape tape;
    Var x = tape.leaf(Tensor::from_vector({-1.0, 0.0, 2.0, 4.0}));
    Var r = pointwise(tape, x, Pointwise::Relu);
    CHECK(tape.val(r).data[0] == 0.0);
    CHECK(tape.val(r).data[1] == 0.0);
    CHECK(tape.val(r).data[2] == 2.0);
    Var s = pointwise(tape, x, Pointwise::Sigmoid);
    CHECK(tape.val(s).data[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tape.val(s).data[3] == doctest::Approx(0.9820).epsilon(1e-4));
}

TEST_CASE("nearest upsample x2 replicates each pixel") {
    Tape tape;
    Tensor x({1, 1, 2});
    x.data = {3.0, 7.0};
    Var y = upsample(tape, tape.leaf(x), 2, Resample::Nearest);
    REQUIRE(tape.val(y).shape == std::vector<int>{1, 2, 4});
    for (int row = 0; row < 2; ++row) {
        CHECK(tape.val(y).at3(0, row, 0) == 3.0);
        CHECK(tape.val(y).at3(0, row, 1) == 3.0);
        CHECK(tape.val(y).at3(0, row, 2) == 7.0);
        CHECK(tape.val(y).at3(0, row, 3) == 7.0);
    }
}

TEST_CASE("bilinear upsample x2 of a two-pixel row") {
    Tape tape;
    Tensor x({1, 1, 2});
    x.data = {0.0, 1.0};
    Var y = upsample(tape, tape.leaf(x), 2, Resample::Bilinear);
    REQUIRE(tape.val(y).shape == std::vector<int>{1, 2, 4});
    const double want[4] = {0.0, 0.25, 0.75, 1.0};
    for (int i = 0; i < 4; ++i) CHECK(tape.val(y).at3(0, 0, i) == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("per-channel population statistics") {
    std::vector<double> mu, sigma;
    Tensor a({1, 1, 2});
    a.data = {1.0, 3.0};
    channel_stats_fwd(a, mu, sigma);
    CHECK(mu[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sigma[0] == doctest::Approx(1.0).epsilon(1e-12));

    Tensor b({1, 2, 2});
    b.data = {0.0, 0.0, 0.0, 4.0};
    channel_stats_fwd(b, mu, sigma);
    CHECK(mu[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sigma[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("adam leaves a parameter untouched on a zero gradient") {
    AdamState st;
    AdamHyper hp;
    Tensor p = randt({5}, 31);
    Tensor before = p;
    st.ensure_shape(p);
    adam_step(st, hp, p, Tensor::zeros({5}));
    for (int i = 0; i < 5; ++i) CHECK(p.data[i] == before.data[i]);
}

TEST_CASE("first adam step moves by about -lr*sign(gradient)") {
    AdamState st;
    AdamHyper hp;
    hp.lr = 1e-3;
    Tensor p = randt({4}, 32);
    Tensor g = Tensor::from_vector({0.5, -2.0, 0.01, -0.3});
    Tensor before = p;
    st.ensure_shape(p);
    adam_step(st, hp, p, g);
    for (int i = 0; i < 4; ++i) {
        double step = p.data[i] - before.data[i];
        double want = -hp.lr * (g.data[i] > 0 ? 1.0 : -1.0);
        CHECK(std::abs(step - want) < hp.lr * 1e-3);
    }
}

TEST_CASE("central differences recover the derivative of x^2 at 3") {
    Tensor x = Tensor::scalar(3.0);
    Tensor g = finite_diff_grad([](const Tensor& t) { return t.data[0] * t.data[0]; }, x);
    CHECK(g.data[0] == doctest::Approx(6.0).epsilon(1e-4));
}

TEST_CASE("tape backward matches finite differences on a small composite") {
    Tensor x0 = randt({2, 3, 3}, 41);
    Tensor k0 = randt({2, 2, 3, 3}, 42);
    auto forward = [&](const Tensor& xin) {
        Tape tape;
        Var x = tape.leaf(xin);
        Var k = tape.leaf(k0);
        Var h = pointwise(tape, conv2d(tape, x, k, -1, Padding::Same), Pointwise::Relu);
        return tape.val(sum(tape, h)).data[0];
    };
    Tape tape;
    Var x = tape.leaf(x0);
    Var k = tape.leaf(k0);
    Var loss = sum(tape, pointwise(tape, conv2d(tape, x, k, -1, Padding::Same), Pointwise::Relu));
    tape.backward(loss);
    Tensor numeric = finite_diff_grad(forward, x0);
    CHECK(grad_rel_err(tape.grad(x), numeric) < 1e-6);
}

TEST_CASE("tensor files round-trip bit-exactly") {
    Tensor t = randt({3, 4, 5}, 51);
    t.data[0] = 1e-300;
    t.data[1] = -0.0;
    std::string path = (std::filesystem::temp_directory_path() / "dasfft_roundtrip.tens").string();
    save_tensor(t, path);
    Tensor back = load_tensor(path);
    REQUIRE(back.shape == t.shape);
    for (std::size_t i = 0; i < t.data.size(); ++i)
        CHECK(std::memcmp(&back.data[i], &t.data[i], sizeof(double)) == 0);
    std::remove(path.c_str());
}

TEST_CASE("seeded rng streams are reproducible and independent") {
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // drawing from one named substream never shifts a sibling stream
    Rng root(7);
    Rng left = root.sub("left");
    std::uint64_t first = root.sub("right").next_u64();
    for (int i = 0; i < 10; ++i) (void)left.next_u64();
    CHECK(root.sub("right").next_u64() == first);
}

TEST_CASE("uniform and normal draws land in sane ranges") {
    Rng r(123);
    double mean = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform(2.0, 5.0);
        CHECK(u >= 2.0);
        CHECK(u < 5.0);
        mean += u / 10000.0;
    }
    CHECK(mean == doctest::Approx(3.5).epsilon(0.02));
}

TEST_CASE("concat then slice recovers each input block") {
    Tape tape;
    Tensor a = randt({2, 3, 3}, 61), b = randt({1, 3, 3}, 62);
    Var cat = concat_channels(tape, {tape.leaf(a), tape.leaf(b)});
    REQUIRE(tape.val(cat).shape == std::vector<int>{3, 3, 3});
    Var back = slice0(tape, cat, 2, 3);
    for (std::size_t i = 0; i < b.data.size(); ++i) CHECK(tape.val(back).data[i] == b.data[i]);
}
