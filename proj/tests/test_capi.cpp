#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <dasfft.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string tmp(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "dasfft_capi";
    fs::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("sessions open, close, and report errors per call") {
    dasfft_session* s = dasfft_open();
    REQUIRE(s != nullptr);
    CHECK(dasfft_config_set(s, "resolution", "32") == DASFFT_OK);

    CHECK(dasfft_config_set(s, "bogus_key", "1") != DASFFT_OK);
    CHECK(std::strlen(dasfft_last_error(s)) > 0);

    CHECK(dasfft_config_load(s, "/no/such/config/file") == DASFFT_ERR_IO);
    CHECK(dasfft_model_load(s, "/no/such/model/file") != DASFFT_OK);
    dasfft_close(s);
    dasfft_close(nullptr);  // must be a harmless no-op
}

TEST_CASE("configuration files load through the C API") {
    std::string path = tmp("cfg.txt");
    {
        std::ofstream os(path);
        os << "resolution = 16\nmaster_seed = 7\nablation = sfft_only\n";
    }
    dasfft_session* s = dasfft_open();
    CHECK(dasfft_config_load(s, path.c_str()) == DASFFT_OK);
    dasfft_close(s);
}

TEST_CASE("face synthesis and degradation round-trip through files") {
    dasfft_session* s = dasfft_open();
    REQUIRE(dasfft_config_set(s, "resolution", "32") == DASFFT_OK);
    std::string face = tmp("face");
    REQUIRE(dasfft_facegen(s, 12, face.c_str()) == DASFFT_OK);
    CHECK(fs::exists(face + ".ppm"));
    CHECK(fs::exists(face + "_parsing.pgm"));
    CHECK(fs::exists(face + "_depth.tens"));

    std::string lq = tmp("lq");
    REQUIRE(dasfft_degrade(s, (face + ".ppm").c_str(), (face + "_depth.tens").c_str(), 34,
                           lq.c_str()) == DASFFT_OK);
    CHECK(fs::exists(lq + ".ppm"));
    CHECK(fs::exists(lq + "_params.txt"));

    // same seed twice: the exported parameter draw is identical
    std::string lq2 = tmp("lq2");
    REQUIRE(dasfft_degrade(s, (face + ".ppm").c_str(), (face + "_depth.tens").c_str(), 34,
                           lq2.c_str()) == DASFFT_OK);
    std::ifstream a(lq + "_params.txt"), b(lq2 + "_params.txt");
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    dasfft_close(s);
}

TEST_CASE("degradation with a missing input reports an io error") {
    dasfft_session* s = dasfft_open();
    CHECK(dasfft_degrade(s, "/no/such.ppm", "/no/such.tens", 1, tmp("x").c_str()) != DASFFT_OK);
    CHECK(std::strlen(dasfft_last_error(s)) > 0);
    dasfft_close(s);
}

TEST_CASE("a tiny three-stage run trains, saves, restores and evaluates") {
    dasfft_session* s = dasfft_open();
    std::string out_dir = tmp("run");
    REQUIRE(dasfft_config_set(s, "resolution", "32") == DASFFT_OK);
    REQUIRE(dasfft_config_set(s, "train_count", "4") == DASFFT_OK);
    REQUIRE(dasfft_config_set(s, "test_count", "2") == DASFFT_OK);
    REQUIRE(dasfft_config_set(s, "pretrain_steps", "3") == DASFFT_OK);
    REQUIRE(dasfft_config_set(s, "align_steps", "3") == DASFFT_OK);
    REQUIRE(dasfft_config_set(s, "gan_steps", "2") == DASFFT_OK);
    REQUIRE(dasfft_config_set(s, "batch", "2") == DASFFT_OK);
    REQUIRE(dasfft_config_set(s, "out_dir", out_dir.c_str()) == DASFFT_OK);

    REQUIRE(dasfft_pretrain_encoder(s) == DASFFT_OK);
    double mse0 = -1, mse1 = -1;
    REQUIRE(dasfft_align_dafe(s, &mse0, &mse1) == DASFFT_OK);
    CHECK(mse0 > 0.0);
    CHECK(mse1 >= 0.0);
    double rec0 = -1, rec1 = -1;
    REQUIRE(dasfft_train(s, &rec0, &rec1) == DASFFT_OK);
    CHECK(rec0 > 0.0);

    std::string model = tmp("run.model");
    REQUIRE(dasfft_model_save(s, model.c_str()) == DASFFT_OK);

    // restore one synthetic LQ image end to end
    std::string face = tmp("rface");
    REQUIRE(dasfft_config_set(s, "resolution", "32") == DASFFT_OK);
    REQUIRE(dasfft_facegen(s, 21, face.c_str()) == DASFFT_OK);
    std::string lq = tmp("rlq");
    REQUIRE(dasfft_degrade(s, (face + ".ppm").c_str(), (face + "_depth.tens").c_str(), 5,
                           lq.c_str()) == DASFFT_OK);
    std::string restored = tmp("restored.ppm");
    REQUIRE(dasfft_restore(s, (lq + ".ppm").c_str(), (face + "_parsing.pgm").c_str(),
                           restored.c_str()) == DASFFT_OK);
    CHECK(fs::exists(restored));

    double mp = 0, ms = 0;
    REQUIRE(dasfft_eval(s, &mp, &ms) == DASFFT_OK);
    CHECK(mp > 0.0);
    CHECK(ms > -1.0);
    CHECK(fs::exists(fs::path(out_dir) / "eval.csv"));

    // a fresh session restores identically from the saved model
    dasfft_session* s2 = dasfft_open();
    REQUIRE(dasfft_config_set(s2, "resolution", "32") == DASFFT_OK);
    REQUIRE(dasfft_model_load(s2, model.c_str()) == DASFFT_OK);
    std::string restored2 = tmp("restored2.ppm");
    REQUIRE(dasfft_restore(s2, (lq + ".ppm").c_str(), (face + "_parsing.pgm").c_str(),
                           restored2.c_str()) == DASFFT_OK);
    std::ifstream ra(restored, std::ios::binary), rb(restored2, std::ios::binary);
    std::string da((std::istreambuf_iterator<char>(ra)), std::istreambuf_iterator<char>());
    std::string db((std::istreambuf_iterator<char>(rb)), std::istreambuf_iterator<char>());
    CHECK(da == db);
    dasfft_close(s2);

    // restoring before any training on a fresh session is a state error
    dasfft_session* s3 = dasfft_open();
    REQUIRE(dasfft_config_set(s3, "resolution", "32") == DASFFT_OK);
    CHECK(dasfft_restore(s3, (lq + ".ppm").c_str(), (face + "_parsing.pgm").c_str(),
                         tmp("never.ppm").c_str()) != DASFFT_OK);
    dasfft_close(s3);
}
