#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "core/rng.hpp"
#include "facegen/facegen.hpp"
#include "nets/networks.hpp"

using namespace dasfft;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig cfg;
    cfg.scales = 4;
    cfg.resolution = 32;
    cfg.channels = {8, 8, 6, 4};
    cfg.embedding_width = 8;
    cfg.fc_hidden = 8;
    cfg.init_seed = 77;
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

}  // namespace

TEST_CASE("initializers are idempotent") {
    GeneratorConfig cfg = small_config();
    ParamStore a;
    init_generator(a, cfg);
    init_discriminators(a, cfg);
    init_encoder(a, cfg, "ehq", 1);
    init_fc_heads(a, cfg);
    ParamStore b = a;
    init_generator(b, cfg);
    init_encoder(b, cfg, "ehq", 1);
    CHECK(a == b);
}

TEST_CASE("model files round-trip bit-exactly, including optimizer state") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_generator(store, cfg);
    init_encoder(store, cfg, "ehq", 1);
    Param& p = store.at("gen/torgb.w");
    p.opt.ensure_shape(p.value);
    p.opt.m.data[0] = 0.125;
    p.opt.step = 9;
    store.at("ehq/block0.w").trainable = false;

    std::string path = (std::filesystem::temp_directory_path() / "dasfft_model_rt.model").string();
    store.save(path);
    ParamStore back = ParamStore::load(path);
    CHECK(back == store);
    CHECK(back.at("ehq/block0.w").trainable == false);
    CHECK(back.at("gen/torgb.w").opt.step == 9);
    std::remove(path.c_str());
}

TEST_CASE("generator output is an RGB image inside the open unit interval") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_generator(store, cfg);
    FaceSample f = generate_face(3, cfg.resolution);
    Tape tape;
    FwdCtx ctx(tape, store);
    Var out = generator_forward(ctx, cfg, f.image, f.parsing, -1);
    REQUIRE(tape.val(out).shape == std::vector<int>{3, cfg.resolution, cfg.resolution});
    for (double v : tape.val(out).data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("generator forwards are deterministic") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_generator(store, cfg);
    FaceSample f = generate_face(4, cfg.resolution);
    Tensor a, b;
    {
        Tape tape;
        FwdCtx ctx(tape, store);
        a = tape.val(generator_forward(ctx, cfg, f.image, f.parsing, -1));
    }
    {
        Tape tape;
        FwdCtx ctx(tape, store);
        b = tape.val(generator_forward(ctx, cfg, f.image, f.parsing, -1));
    }
    CHECK(a.data == b.data);
}

TEST_CASE("zeroed embedding heads collapse the embedding path onto the plain forward") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_generator(store, cfg);
    init_encoder(store, cfg, "ehq", 1);
    init_fc_heads(store, cfg);
    zero_prefix(store, "fc/");
    FaceSample f = generate_face(5, cfg.resolution);

    Tape tape;
    FwdCtx ctx(tape, store);
    Var emb = encoder_forward(ctx, tape.leaf(f.image), "ehq", nullptr);
    Var with_emb = generator_forward(ctx, cfg, f.image, f.parsing, emb);
    Var without = generator_forward(ctx, cfg, f.image, f.parsing, -1);
    for (std::size_t i = 0; i < tape.val(with_emb).data.size(); ++i)
        CHECK(tape.val(with_emb).data[i] == tape.val(without).data[i]);
}

TEST_CASE("discriminators expose four feature taps per scale") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_discriminators(store, cfg);
    for (int s = 0; s < 3; ++s) {
        int side = cfg.resolution >> s;
        Tape tape;
        FwdCtx ctx(tape, store);
        DiscOut out = discriminator_forward(ctx, tape.leaf(randt({3, side, side}, 900 + static_cast<std::uint64_t>(s))), s);
        CHECK(out.feats.size() == 4);
        CHECK(tape.val(out.score).size() == 1);
    }
}

TEST_CASE("a zeroed discriminator head scores everything zero") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_discriminators(store, cfg);
    zero_prefix(store, "disc/s0/head");
    Tape tape;
    FwdCtx ctx(tape, store);
    DiscOut out = discriminator_forward(ctx, tape.leaf(randt({3, 32, 32}, 91)), 0);
    CHECK(tape.val(out.score).data[0] == 0.0);
}

TEST_CASE("encoders emit embeddings of the configured width") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_encoder(store, cfg, "ehq", 1);
    Tape tape;
    FwdCtx ctx(tape, store);
    Var v = encoder_forward(ctx, tape.leaf(randt({3, 32, 32}, 92)), "ehq", nullptr);
    CHECK(tape.val(v).shape == std::vector<int>{cfg.embedding_width});
}

TEST_CASE("distinct images do not collide in embedding space") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_encoder(store, cfg, "ehq", 1);
    for (std::uint64_t pair = 0; pair < 100; ++pair) {
        Tape tape;
        FwdCtx ctx(tape, store);
        Tensor a = randt({3, 32, 32}, 1000 + 2 * pair);
        Tensor b = randt({3, 32, 32}, 1001 + 2 * pair, 0.3, 0.9);
        Var va = encoder_forward(ctx, tape.leaf(a), "ehq", nullptr);
        Var vb = encoder_forward(ctx, tape.leaf(b), "ehq", nullptr);
        CHECK(tape.val(va).data != tape.val(vb).data);
    }
}

TEST_CASE("the call trace distinguishes the two encoder paths") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_encoder(store, cfg, "ehq", 1);
    init_encoder(store, cfg, "elq", 2);
    CallTrace trace;
    Tape tape;
    FwdCtx ctx(tape, store);
    encoder_forward(ctx, tape.leaf(randt({3, 32, 32}, 93)), "elq", &trace);
    CHECK(trace.elq_calls == 1);
    CHECK(trace.ehq_calls == 0);
    encoder_forward(ctx, tape.leaf(randt({3, 32, 32}, 94)), "ehq", &trace);
    CHECK(trace.ehq_calls == 1);
}

TEST_CASE("seed salts keep the two encoders from sharing weights") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_encoder(store, cfg, "ehq", 1);
    init_encoder(store, cfg, "elq", 2);
    CHECK(store.value("ehq/block0.w").data != store.value("elq/block0.w").data);
}

TEST_CASE("zeroed embedding heads output zero statistic vectors of the scale width") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_fc_heads(store, cfg);
    zero_prefix(store, "fc/");
    Tape tape;
    FwdCtx ctx(tape, store);
    Var v = tape.leaf(randt({cfg.embedding_width}, 95));
    for (int i = 1; i <= cfg.scales; ++i) {
        auto [ws, wb] = fc_head(ctx, cfg, v, i);
        REQUIRE(tape.val(ws).shape == std::vector<int>{cfg.out_channels(i)});
        REQUIRE(tape.val(wb).shape == std::vector<int>{cfg.out_channels(i)});
        for (double x : tape.val(ws).data) CHECK(x == 0.0);
        for (double x : tape.val(wb).data) CHECK(x == 0.0);
    }
}

TEST_CASE("the pretraining decoder maps embeddings back to full-resolution images") {
    GeneratorConfig cfg = small_config();
    ParamStore store;
    init_decoder(store, cfg);
    Tape tape;
    FwdCtx ctx(tape, store);
    Var out = decoder_forward(ctx, cfg, tape.leaf(randt({cfg.embedding_width}, 96)));
    REQUIRE(tape.val(out).shape == std::vector<int>{3, cfg.resolution, cfg.resolution});
    for (double v : tape.val(out).data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}
