#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eegdec/dataset.hpp"
#include "eegdec/linalg.hpp"
#include "eegdec/metrics.hpp"
#include "eegdec/rng.hpp"

#include <cmath>

using namespace eegdec;

// ------------------------------------------------------------------
// n-way top-k accuracy

TEST_CASE("nway accuracy: oracle, anti-oracle and chance") {
    const int C = 100;
    MetricConfig cfg;
    cfg.acc_n = 50;
    cfg.acc_k = 1;
    cfg.acc_trials = 40;
    cfg.seed = 5;

    const size_t n_images = 20;
    std::vector<int> truths;
    Rng rng(3);
    for (size_t i = 0; i < n_images; ++i) truths.push_back(int(rng.uniform_int(C)));

    std::vector<std::vector<double>> oracle, anti, uniform;
    for (size_t i = 0; i < n_images; ++i) {
        std::vector<double> o(C, 0.0), a(C, 1.0 / double(C - 1)), u(C, 1.0 / C);
        o[size_t(truths[i])] = 1.0;
        a[size_t(truths[i])] = 0.0; // strictly worst score for the true class
        oracle.push_back(o);
        anti.push_back(a);
        uniform.push_back(u);
    }

    CHECK(nway_topk_acc(oracle, truths, cfg) == 1.0);
    CHECK(nway_topk_acc(anti, truths, cfg) == 0.0);

    SUBCASE("uniform classifier sits at 1/N within binomial bounds") {
        // >= 1e5 trials in total.
        MetricConfig big = cfg;
        big.acc_trials = 5000; // 20 images x 5000 = 1e5 trials
        double acc = nway_topk_acc(uniform, truths, big);
        double p = 1.0 / 50.0;
        double sigma = std::sqrt(p * (1 - p) / (20.0 * 5000.0));
        CHECK(acc > p - 3 * sigma);
        CHECK(acc < p + 3 * sigma);
    }

    SUBCASE("oracle >= arbitrary classifier >= anti-oracle, any K") {
        for (int k : {1, 10, 49}) {
            MetricConfig kc = cfg;
            kc.acc_k = k;
            std::vector<std::vector<double>> arbitrary;
            Rng arng(9);
            for (size_t i = 0; i < n_images; ++i) {
                std::vector<double> row(C);
                double sum = 0;
                for (double& x : row) sum += (x = arng.uniform());
                for (double& x : row) x /= sum;
                arbitrary.push_back(row);
            }
            double top = nway_topk_acc(oracle, truths, kc);
            double mid = nway_topk_acc(arbitrary, truths, kc);
            double bot = nway_topk_acc(anti, truths, kc);
            CHECK(top == 1.0);
            CHECK(top >= mid);
            CHECK(mid >= bot);
        }
        // K = N-1: only a strictly-last true class can fail, so the
        // anti-oracle scores zero successes... every distractor outranks it.
        MetricConfig kc = cfg;
        kc.acc_k = cfg.acc_n - 1;
        CHECK(nway_topk_acc(anti, truths, kc) == 0.0);
        CHECK(nway_topk_acc(uniform, truths, kc) > 0.9);
    }

    SUBCASE("determinism in seed") {
        CHECK(nway_topk_acc(uniform, truths, cfg) == nway_topk_acc(uniform, truths, cfg));
        MetricConfig other = cfg;
        other.seed = 6;
        CHECK(nway_topk_acc(uniform, truths, cfg) != nway_topk_acc(uniform, truths, other));
    }

    SUBCASE("fewer classes than N is an error") {
        MetricConfig bad = cfg;
        bad.acc_n = C + 1;
        CHECK_THROWS_WITH_AS(nway_topk_acc(uniform, truths, bad), doctest::Contains("fewer"),
                             ValidationError);
    }
    SUBCASE("true class outside label set is an error") {
        std::vector<int> bad_truths = truths;
        bad_truths[0] = C;
        CHECK_THROWS_AS(nway_topk_acc(uniform, bad_truths, cfg), ValidationError);
    }
}

// ------------------------------------------------------------------
// inception-style score

TEST_CASE("inception score identities") {
    SUBCASE("uniform predictions give exactly 1") {
        std::vector<std::vector<double>> rows(30, std::vector<double>(7, 1.0 / 7.0));
        auto [mean, sd] = inception_score(rows, 10);
        CHECK(mean == 1.0);
        CHECK(sd == 0.0);
    }
    SUBCASE("even one-hot predictions give exactly C") {
        const size_t C = 4;
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < 4 * C; ++i) {
            std::vector<double> r(C, 0.0);
            r[i % C] = 1.0;
            rows.push_back(r);
        }
        auto [mean, sd] = inception_score(rows, 1);
        CHECK(mean == doctest::Approx(double(C)).epsilon(1e-12));
        CHECK(sd == 0.0);
    }
    SUBCASE("two-row soft case against brute-force KL") {
        std::vector<std::vector<double>> rows = {{0.9, 0.1}, {0.1, 0.9}};
        // Marginal is (0.5, 0.5); each row has the same KL by symmetry.
        double kl = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
        double expected = std::exp(kl);
        auto [mean, sd] = inception_score(rows, 1);
        CHECK(mean == doctest::Approx(expected).epsilon(1e-12));
        CHECK(mean == doctest::Approx(1.44494).epsilon(1e-4));
        CHECK(sd == 0.0);
    }
    SUBCASE("score lies in [1, C] for arbitrary valid inputs") {
        Rng rng(8);
        for (int trial = 0; trial < 30; ++trial) {
            size_t n = 2 + rng.uniform_int(40), C = 2 + rng.uniform_int(9);
            std::vector<std::vector<double>> rows;
            for (size_t i = 0; i < n; ++i) {
                std::vector<double> r(C);
                double sum = 0;
                for (double& x : r) sum += (x = rng.uniform() + 1e-6);
                for (double& x : r) x /= sum;
                rows.push_back(r);
            }
            auto [mean, sd] = inception_score(rows, 3);
            CHECK(mean >= 1.0 - 1e-9);
            CHECK(mean <= double(C) + 1e-9);
            CHECK(sd >= 0.0);
        }
    }
    SUBCASE("non-normalized rows are rejected") {
        std::vector<std::vector<double>> rows = {{0.5, 0.6}};
        CHECK_THROWS_WITH_AS(inception_score(rows, 1), doctest::Contains("sums"), ValidationError);
        std::vector<std::vector<double>> neg = {{1.2, -0.2}};
        CHECK_THROWS_AS(inception_score(neg, 1), ValidationError);
    }
}

// ------------------------------------------------------------------
// distribution distance

TEST_CASE("frechet distance closed forms") {
    SUBCASE("identical sets give zero") {
        Rng rng(4);
        MatD x(20, 5);
        for (double& v : x.v) v = rng.normal();
        CHECK(frechet_distance(x, x) < 1e-6);
    }
    SUBCASE("1-D moment-matched constructions") {
        // {-1, 0, 1}: mean 0, unbiased variance 1. {0, 1, 2}: mean 1, var 1.
        MatD a(3, 1), b(3, 1);
        a(0, 0) = -1;
        a(1, 0) = 0;
        a(2, 0) = 1;
        b(0, 0) = 0;
        b(1, 0) = 1;
        b(2, 0) = 2;
        CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-9));

        // (mu 0, var 1) vs (mu 1, var 4): 1 + (1 + 4 - 2*2) = 2.
        MatD c(3, 1);
        c(0, 0) = -1;
        c(1, 0) = 1;
        c(2, 0) = 3;
        CHECK(frechet_distance(a, c) == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("symmetry within 1e-6") {
        Rng rng(6);
        for (int trial = 0; trial < 5; ++trial) {
            MatD a(12, 4), b(15, 4);
            for (double& v : a.v) v = rng.normal();
            for (double& v : b.v) v = rng.normal() * 1.7 + 0.3;
            double ab = frechet_distance(a, b);
            double ba = frechet_distance(b, a);
            CHECK(std::abs(ab - ba) < 1e-6);
            CHECK(ab >= 0.0);
        }
    }
    SUBCASE("converges to the Gaussian closed form at n = 1e4") {
        // Antithetic pairs (+z, -z) pin each sample mean exactly; the
        // variance estimates still come from the draws, so the distance
        // converges with the sample size and lands far inside 0.05.
        Rng rng(7);
        const size_t n = 10000;
        MatD a(n, 1), b(n, 1);
        for (size_t i = 0; i < n; i += 2) {
            double za = rng.normal(), zb = rng.normal();
            a(i, 0) = za;
            a(i + 1, 0) = -za;            // ~ N(0, 1)
            b(i, 0) = 1.0 + 2.0 * zb;     // ~ N(1, 4)
            b(i + 1, 0) = 1.0 - 2.0 * zb;
        }
        // Closed form: (0-1)^2 + 1 + 4 - 2*2 = 2.
        CHECK(std::abs(frechet_distance(a, b) - 2.0) < 0.05);
    }
    SUBCASE("degenerate inputs are rejected") {
        MatD one(1, 3), ok(4, 3), empty(4, 0);
        CHECK_THROWS_AS(frechet_distance(one, ok), ValidationError);
        CHECK_THROWS_AS(frechet_distance(ok, empty), ValidationError);
        MatD mismatched(4, 2);
        CHECK_THROWS_AS(frechet_distance(ok, mismatched), ValidationError);
    }
}

TEST_CASE("jacobi eigendecomposition against known matrices") {
    MatD a(2, 2);
    a(0, 0) = 2;
    a(0, 1) = 1;
    a(1, 0) = 1;
    a(1, 1) = 2;
    SymEig e = sym_eig(a);
    std::vector<double> vals = e.values;
    std::sort(vals.begin(), vals.end());
    CHECK(vals[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(vals[1] == doctest::Approx(3.0).epsilon(1e-10));

    // sqrt(A)^2 == A for a random PSD matrix.
    Rng rng(10);
    MatD g(6, 4);
    for (double& v : g.v) v = rng.normal();
    MatD psd = matmul_tn(g, g);
    MatD r = sym_sqrt_psd(psd);
    MatD rr = matmul(r, r);
    for (size_t i = 0; i < psd.size(); ++i) CHECK(rr.v[i] == doctest::Approx(psd.v[i]).epsilon(1e-8));
}

// ------------------------------------------------------------------
// ssim

namespace {

Image constant_image(int h, int w, float value) {
    Image img(h, w);
    for (float& v : img.rgb) v = value;
    return img;
}

} // namespace

TEST_CASE("ssim identities and closed forms") {
    MetricConfig cfg; // 11x11 window, sigma 1.5, K1 0.01, K2 0.03, L 1

    SUBCASE("self-similarity is one") {
        Rng rng(11);
        Image img(16, 20);
        for (float& v : img.rgb) v = float(rng.uniform());
        CHECK(ssim(img, img, cfg) >= 1.0 - 1e-9);
        CHECK(ssim(img, img, cfg) <= 1.0 + 1e-9);
    }
    SUBCASE("constant images follow the zero-variance closed form") {
        // (2*m1*m2 + C1) / (m1^2 + m2^2 + C1); for 0.2 vs 0.4 that is ~0.8006.
        Image a = constant_image(12, 12, 0.2f);
        Image b = constant_image(12, 12, 0.4f);
        double c1 = 1e-4;
        double expected = (2 * 0.2 * 0.4 + c1) / (0.2 * 0.2 + 0.4 * 0.4 + c1);
        CHECK(ssim(a, b, cfg) == doctest::Approx(expected).epsilon(1e-6));
        CHECK(ssim(a, b, cfg) == doctest::Approx(0.8006).epsilon(1e-3));
    }
    SUBCASE("symmetry and range") {
        Rng rng(12);
        for (int trial = 0; trial < 10; ++trial) {
            Image a(13, 15), b(13, 15);
            for (float& v : a.rgb) v = float(rng.uniform());
            for (float& v : b.rgb) v = float(rng.uniform());
            double ab = ssim(a, b, cfg);
            double ba = ssim(b, a, cfg);
            CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
            CHECK(ab >= -1.0);
            CHECK(ab <= 1.0);
        }
    }
    SUBCASE("window larger than the image is an error") {
        Image small = constant_image(8, 8, 0.5f);
        CHECK_THROWS_WITH_AS(ssim(small, small, cfg), doctest::Contains("smaller"), ValidationError);
        MetricConfig small_cfg = cfg;
        small_cfg.ssim_window = 5;
        CHECK(ssim(small, small, small_cfg) >= 1.0 - 1e-9);
    }
    SUBCASE("shape mismatch is an error") {
        Image a = constant_image(12, 12, 0.5f);
        Image b = constant_image(12, 13, 0.5f);
        CHECK_THROWS_AS(ssim(a, b, cfg), ValidationError);
    }
}

// ------------------------------------------------------------------
// embedding similarity

TEST_CASE("embedding similarity") {
    std::vector<Image> gen = {constant_image(4, 4, 0.3f), constant_image(4, 4, 0.9f)};

    SUBCASE("identical pairs give exactly one") {
        ImageFeatureExtractor fx = [](const Image& img) {
            return std::vector<float>{img.rgb[0], img.rgb[1] + 1.0f, 0.5f};
        };
        CHECK(embedding_similarity(gen, gen, fx) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("orthogonal embeddings give zero") {
        int call = 0;
        ImageFeatureExtractor fx = [&call](const Image&) {
            // Alternate between two orthogonal axes per pair.
            std::vector<float> e(2, 0.0f);
            e[size_t(call++ % 2)] = 1.0f;
            return e;
        };
        CHECK(embedding_similarity(gen, gen, fx) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("zero-norm embedding names the image") {
        ImageFeatureExtractor fx = [](const Image&) { return std::vector<float>(3, 0.0f); };
        std::vector<std::string> names = {"img_a", "img_b"};
        CHECK_THROWS_WITH_AS(embedding_similarity(gen, gen, fx, &names), doctest::Contains("img_a"),
                             ValidationError);
    }
}

// ------------------------------------------------------------------
// prototype classifier and the full report

TEST_CASE("prototype classifier separates class-keyed images") {
    std::vector<Image> refs;
    std::vector<int> classes;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 4; ++i) {
            refs.push_back(synthetic_class_image(c, 8));
            classes.push_back(c);
        }
    PrototypeClassifier pc = PrototypeClassifier::fit(refs, classes, 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(pc.predict(synthetic_class_image(c, 8)) == c);
        std::vector<double> probs = pc(synthetic_class_image(c, 8));
        double sum = 0;
        for (double p : probs) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(PrototypeClassifier::fit(refs, classes, 5), ValidationError);
}

TEST_CASE("evaluate_all produces a consistent report") {
    std::vector<Image> refs;
    std::vector<int> classes;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 6; ++i) {
            refs.push_back(synthetic_class_image(c, 12));
            classes.push_back(c);
        }

    PrototypeClassifier pc = PrototypeClassifier::fit(refs, classes, 2);
    ImageClassifier cl = [&pc](const Image& img) { return pc(img); };
    ImageFeatureExtractor fx = [](const Image& img) {
        std::vector<float> e;
        for (size_t i = 0; i < img.rgb.size(); i += 7) e.push_back(img.rgb[i] + 0.01f);
        return e;
    };

    MetricConfig cfg;
    cfg.acc_n = 2;
    cfg.acc_k = 1;
    cfg.acc_trials = 10;
    cfg.is_splits = 2;
    cfg.ssim_window = 5;
    MetricReport r = evaluate_all(refs, refs, classes, cl, fx, cfg);
    CHECK(r.violations().empty());
    CHECK(r.acc == 1.0);
    CHECK(r.fid < 1e-6);
    CHECK(r.ssim >= 1.0 - 1e-9);
    CHECK(r.clip_sim == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.is_mean >= 1.0);
    CHECK(r.n_generated == refs.size());

    // Table cells: ACC is formatted x100.
    std::vector<std::string> cells = r.csv_cells();
    REQUIRE(cells.size() == 6);
    CHECK(cells[0] == "100");

    // JSON snapshot carries the config.
    CHECK(r.to_json().find("acc_trials") != std::string::npos);
}
