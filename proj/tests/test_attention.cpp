#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eegdec/attention.hpp"
#include "eegdec/rng.hpp"

#include "grad_check.hpp"

#include <cmath>

using namespace eegdec;

namespace {

template <typename T>
Mat<T> random_mat(size_t r, size_t c, Rng& rng, double scale = 1.0) {
    Mat<T> m(r, c);
    for (T& v : m.v) v = T(rng.normal() * scale);
    return m;
}

} // namespace

TEST_CASE("hand-computed single-key case") {
    // m=1, d=1: softmax over one key is 1 on each branch, so the output is
    // v_text + lambda * v_image = 1 + 1*2 = 3.
    MatF q(1, 1), kt(1, 1), vt(1, 1), ki(1, 1), vi(1, 1);
    q(0, 0) = 0.0f;
    kt(0, 0) = 1.0f;
    vt(0, 0) = 1.0f;
    ki(0, 0) = 2.0f;
    vi(0, 0) = 2.0f;
    MatF out = decoupled_cross_attention(q, kt, vt, ki, vi, 1.0f);
    REQUIRE(out.size() == 1);
    CHECK(out(0, 0) == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("lambda zero equals text-only attention bitwise") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        size_t m = 1 + rng.uniform_int(5), nt = 1 + rng.uniform_int(6), ni = 1 + rng.uniform_int(6),
               d = 1 + rng.uniform_int(8);
        MatF q = random_mat<float>(m, d, rng), kt = random_mat<float>(nt, d, rng),
             vt = random_mat<float>(nt, d, rng), ki = random_mat<float>(ni, d, rng),
             vi = random_mat<float>(ni, d, rng);
        MatF full = decoupled_cross_attention(q, kt, vt, ki, vi, 0.0f);
        MatF text_only = single_attention(q, kt, vt);
        CHECK(full.v == text_only.v);
    }
}

TEST_CASE("identical branches with lambda=1 double the single branch") {
    Rng rng(6);
    MatF q = random_mat<float>(3, 4, rng), k = random_mat<float>(5, 4, rng),
         v = random_mat<float>(5, 4, rng);
    MatF both = decoupled_cross_attention(q, k, v, k, v, 1.0f);
    MatF single = single_attention(q, k, v);
    REQUIRE(both.size() == single.size());
    for (size_t i = 0; i < both.size(); ++i) CHECK(both.v[i] == 2.0f * single.v[i]);
}

TEST_CASE("image-branch linearity identity across 100 random shapes") {
    // dca(lambda) - dca(0) == lambda * single_attention(image branch),
    // elementwise within 1e-6 in float32.
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        size_t m = 1 + rng.uniform_int(6), nt = 1 + rng.uniform_int(7), ni = 1 + rng.uniform_int(7),
               d = 1 + rng.uniform_int(12);
        float lambda = float(rng.uniform() * 2.0);
        MatF q = random_mat<float>(m, d, rng), kt = random_mat<float>(nt, d, rng),
             vt = random_mat<float>(nt, d, rng), ki = random_mat<float>(ni, d, rng),
             vi = random_mat<float>(ni, d, rng);
        MatF with = decoupled_cross_attention(q, kt, vt, ki, vi, lambda);
        MatF without = decoupled_cross_attention(q, kt, vt, ki, vi, 0.0f);
        MatF image_branch = single_attention(q, ki, vi);
        for (size_t i = 0; i < with.size(); ++i)
            CHECK(std::abs((with.v[i] - without.v[i]) - lambda * image_branch.v[i]) < 1e-6f);
    }
}

TEST_CASE("softmax rows sum to one and outputs stay in the value hull") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        size_t m = 1 + rng.uniform_int(5), n = 1 + rng.uniform_int(6), d = 1 + rng.uniform_int(6);
        MatF q = random_mat<float>(m, d, rng, 2.0), k = random_mat<float>(n, d, rng, 2.0),
             v = random_mat<float>(n, d, rng, 2.0);

        MatF scores = matmul_nt(q, k);
        for (float& x : scores.v) x /= std::sqrt(float(d));
        MatF attn = softmax_rows(scores);
        for (size_t r = 0; r < attn.rows; ++r) {
            double sum = 0;
            for (size_t c = 0; c < attn.cols; ++c) {
                CHECK(attn(r, c) >= 0.0f);
                sum += attn(r, c);
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }

        // Each output row is a convex combination of value rows: it lies
        // within the per-coordinate min/max bounds of V.
        MatF out = single_attention(q, k, v);
        for (size_t c = 0; c < d; ++c) {
            float lo = v(0, c), hi = v(0, c);
            for (size_t r = 1; r < n; ++r) {
                lo = std::min(lo, v(r, c));
                hi = std::max(hi, v(r, c));
            }
            for (size_t r = 0; r < m; ++r) {
                CHECK(out(r, c) >= lo - 1e-5f);
                CHECK(out(r, c) <= hi + 1e-5f);
            }
        }
    }
}

TEST_CASE("gradients match central finite differences (float64)") {
    double err = gradcheck::attention_grad_error();
    CHECK(err < 1e-5);
    CHECK(err < 1e-7); // detect silent degradation early
}

TEST_CASE("dimension mismatches are rejected") {
    MatF q(2, 4), k4(3, 4), v4(3, 4), k5(3, 5), v5(3, 5), v_badrows(2, 4);
    CHECK_THROWS_AS(decoupled_cross_attention(q, k5, v5, k4, v4, 1.0f), ValidationError);
    CHECK_THROWS_AS(decoupled_cross_attention(q, k4, v4, k5, v5, 1.0f), ValidationError);
    CHECK_THROWS_AS(decoupled_cross_attention(q, k4, v_badrows, k4, v4, 1.0f), ValidationError);
    CHECK_THROWS_AS(decoupled_cross_attention(q, k4, v4, k4, v4, -1.0f), ValidationError);
    CHECK_THROWS_AS(decoupled_cross_attention(q, k4, v4, k4, v4,
                                              std::numeric_limits<float>::quiet_NaN()),
                    ValidationError);
}

TEST_CASE("image projector") {
    SUBCASE("zero embedding with zero bias gives zero tokens") {
        ImageProjector<float> proj;
        proj.n_tokens = 4;
        proj.d = 3;
        proj.weight = MatF(12, 6);
        Rng rng(8);
        for (float& w : proj.weight.v) w = float(rng.normal());
        proj.bias.assign(12, 0.0f);
        MatF out = project_image_embedding(std::vector<float>(6, 0.0f), proj);
        REQUIRE(out.rows == 4);
        REQUIRE(out.cols == 3);
        for (float v : out.v) CHECK(v == 0.0f);
    }
    SUBCASE("identity-like projector reshapes the embedding") {
        ImageProjector<float> proj;
        proj.n_tokens = 2;
        proj.d = 3;
        proj.weight = MatF(6, 6);
        for (size_t i = 0; i < 6; ++i) proj.weight(i, i) = 1.0f;
        proj.bias.assign(6, 0.0f);
        std::vector<float> e = {1, 2, 3, 4, 5, 6};
        MatF out = project_image_embedding(e, proj);
        CHECK(out(0, 0) == 1.0f);
        CHECK(out(0, 2) == 3.0f);
        CHECK(out(1, 0) == 4.0f);
        CHECK(out(1, 2) == 6.0f);
    }
    SUBCASE("deterministic for a fixed seed") {
        Rng ra(3), rb(3);
        ImageProjector<float> pa, pb;
        pa.n_tokens = pb.n_tokens = 2;
        pa.d = pb.d = 4;
        pa.weight = MatF(8, 5);
        pb.weight = MatF(8, 5);
        for (float& w : pa.weight.v) w = float(ra.normal());
        for (float& w : pb.weight.v) w = float(rb.normal());
        pa.bias.assign(8, 0.1f);
        pb.bias.assign(8, 0.1f);
        std::vector<float> e = {0.5f, -1.0f, 2.0f, 0.0f, 3.0f};
        CHECK(project_image_embedding(e, pa).v == project_image_embedding(e, pb).v);
    }
    SUBCASE("shape errors") {
        ImageProjector<float> proj;
        proj.n_tokens = 2;
        proj.d = 3;
        proj.weight = MatF(6, 4);
        proj.bias.assign(6, 0.0f);
        CHECK_THROWS_AS(project_image_embedding(std::vector<float>(5, 1.0f), proj), ValidationError);
        std::vector<float> nan_e(4, 1.0f);
        nan_e[2] = std::nanf("");
        CHECK_THROWS_AS(project_image_embedding(nan_e, proj), ValidationError);
    }
}
