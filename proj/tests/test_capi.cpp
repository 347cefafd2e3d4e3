#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Exercises the public shared-library surface only.
#include <eegdec.h>

#include "test_util.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

using testutil::TempDir;

namespace {

struct Session {
    eegdec_session* s = eegdec_session_new();
    ~Session() { eegdec_session_free(s); }
};

} // namespace

TEST_CASE("session lifecycle and error reporting") {
    Session session;
    REQUIRE(session.s != nullptr);
    CHECK(std::string(eegdec_last_error(session.s)).empty());
    CHECK(std::string(eegdec_version()) == "0.1.0");

    int rc = eegdec_validate_manifest(session.s, "/nonexistent/manifest.json", nullptr);
    CHECK(rc == EEGDEC_E_RUNTIME);
    CHECK(std::string(eegdec_last_error(session.s)).find("manifest") != std::string::npos);

    // A following successful call clears the error.
    double out = 0;
    std::vector<float> a = {-1, 0, 1}, b = {0, 1, 2};
    CHECK(eegdec_frechet_distance(session.s, a.data(), 3, b.data(), 3, 1, &out) == EEGDEC_OK);
    CHECK(std::string(eegdec_last_error(session.s)).empty());
}

TEST_CASE("synth then validate through the C API") {
    Session session;
    TempDir tmp("capi_synth");
    const char* cfg = R"({"n_classes":3,"n_subjects":2,"n_channels":4,"n_timesteps":16,
                          "samples_per_class":5,"noise_sigma":0.2,"image_size":8,"seed":11})";
    REQUIRE(eegdec_synth(session.s, cfg, tmp.str().c_str()) == EEGDEC_OK);

    char* violations = nullptr;
    REQUIRE(eegdec_validate_manifest(session.s, tmp.file("manifest.json").c_str(), &violations) ==
            EEGDEC_OK);
    CHECK(std::string(violations).empty());
    eegdec_string_free(violations);

    // Split through the API keeps the manifest valid.
    REQUIRE(eegdec_split(session.s, tmp.file("manifest.json").c_str(), 0.6, 0.2, 0.2, 5,
                         tmp.file("split.json").c_str()) == EEGDEC_OK);

    // Invalid fractions are a validation error with a message.
    CHECK(eegdec_split(session.s, tmp.file("manifest.json").c_str(), 0.9, 0.2, 0.2, 5,
                       tmp.file("bad.json").c_str()) == EEGDEC_E_VALIDATION);
    CHECK(std::string(eegdec_last_error(session.s)).find("fractions") != std::string::npos);

    // Bad config JSON is a validation error.
    CHECK(eegdec_synth(session.s, "{not json", tmp.file("x").c_str()) == EEGDEC_E_VALIDATION);
}

TEST_CASE("numeric entry points match known values") {
    Session session;

    SUBCASE("frechet 1-D closed forms") {
        std::vector<float> a = {-1, 0, 1}, b = {0, 1, 2}, c = {-1, 1, 3};
        double out = 0;
        REQUIRE(eegdec_frechet_distance(session.s, a.data(), 3, b.data(), 3, 1, &out) == EEGDEC_OK);
        CHECK(out == doctest::Approx(1.0).epsilon(1e-9));
        REQUIRE(eegdec_frechet_distance(session.s, a.data(), 3, c.data(), 3, 1, &out) == EEGDEC_OK);
        CHECK(out == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(eegdec_frechet_distance(session.s, a.data(), 1, b.data(), 3, 1, &out) ==
              EEGDEC_E_VALIDATION);
    }
    SUBCASE("ssim identity and constant closed form") {
        std::vector<float> img(12 * 12 * 3, 0.2f), img2(12 * 12 * 3, 0.4f);
        double out = 0;
        REQUIRE(eegdec_ssim(session.s, img.data(), img.data(), 12, 12, 11, 1.5, &out) == EEGDEC_OK);
        CHECK(out == doctest::Approx(1.0).epsilon(1e-9));
        REQUIRE(eegdec_ssim(session.s, img.data(), img2.data(), 12, 12, 11, 1.5, &out) == EEGDEC_OK);
        CHECK(out == doctest::Approx((2 * 0.2 * 0.4 + 1e-4) / (0.2 * 0.2 + 0.4 * 0.4 + 1e-4))
                         .epsilon(1e-6));
    }
    SUBCASE("inception score of uniform rows is 1") {
        std::vector<double> rows(10 * 4, 0.25);
        double mean = 0, sd = 0;
        REQUIRE(eegdec_inception_score(session.s, rows.data(), 10, 4, 2, &mean, &sd) == EEGDEC_OK);
        CHECK(mean == 1.0);
        CHECK(sd == 0.0);
    }
    SUBCASE("nway oracle accuracy is 1") {
        const size_t n = 5, c = 60;
        std::vector<double> probs(n * c, 0.0);
        std::vector<int> truths(n);
        for (size_t i = 0; i < n; ++i) {
            truths[i] = int(i * 7 % c);
            probs[i * c + size_t(truths[i])] = 1.0;
        }
        double out = 0;
        REQUIRE(eegdec_nway_topk_acc(session.s, probs.data(), truths.data(), n, c, 50, 1, 20, 3,
                                     &out) == EEGDEC_OK);
        CHECK(out == 1.0);
    }
    SUBCASE("decoupled attention hand case") {
        float q = 0.0f, kt = 1.0f, vt = 1.0f, ki = 2.0f, vi = 2.0f, out = 0.0f;
        REQUIRE(eegdec_decoupled_cross_attention(session.s, &q, 1, &kt, &vt, 1, &ki, &vi, 1, 1,
                                                 1.0f, &out) == EEGDEC_OK);
        CHECK(out == doctest::Approx(3.0f));
        CHECK(eegdec_decoupled_cross_attention(session.s, &q, 1, &kt, &vt, 1, &ki, &vi, 1, 1, -1.0f,
                                               &out) == EEGDEC_E_VALIDATION);
    }
}

TEST_CASE("report renders a hand-written row verbatim") {
    Session session;
    TempDir tmp("capi_report");
    testutil::spit(tmp.file("results.csv"),
                   "condition,acc,is_mean,is_std,fid,ssim,cs\n"
                   "ours,95.2,28.11,0,69.97,0.2277,0.7575\n");
    char* table = nullptr;
    REQUIRE(eegdec_report(session.s, tmp.file("results.csv").c_str(), tmp.file("out").c_str(),
                          &table) == EEGDEC_OK);
    std::string t(table);
    eegdec_string_free(table);
    CHECK(t.find("95.2") != std::string::npos);
    CHECK(t.find("28.11") != std::string::npos);
    CHECK(t.find("69.97") != std::string::npos);
    CHECK(t.find("0.2277") != std::string::npos);
    CHECK(t.find("0.7575") != std::string::npos);
}
