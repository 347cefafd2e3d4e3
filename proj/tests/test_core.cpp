#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eegdec/config.hpp"
#include "eegdec/container.hpp"
#include "eegdec/csv.hpp"
#include "eegdec/manifest.hpp"
#include "eegdec/png_io.hpp"
#include "eegdec/rng.hpp"
#include "eegdec/sha256.hpp"
#include "eegdec/signal_io.hpp"

#include "test_util.hpp"

using namespace eegdec;
using testutil::TempDir;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex(std::string("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // Multi-block message exercises the block loop.
    CHECK(sha256_hex(std::string("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("rng determinism and forking") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());

    Rng c(42);
    Rng f1 = c.fork("alpha");
    Rng f2 = c.fork("beta");
    CHECK(f1.bits() != f2.bits());
    // Forking depends on the seed, not on draw position.
    Rng d(42);
    d.bits();
    CHECK(d.fork("alpha").bits() == Rng(42).fork("alpha").bits());

    Rng u(7);
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        CHECK(u.uniform_int(10) < 10);
    }

    // Box-Muller normals have roughly the right first two moments.
    Rng n(3);
    double sum = 0, sum2 = 0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        double x = n.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / N) < 0.05);
    CHECK(std::abs(sum2 / N - 1.0) < 0.05);
}

TEST_CASE("csv quoting round trip and errors") {
    std::string text = "id,caption\ns1,\"a red chair, on grass\"\ns2,\"say \"\"hi\"\"\"\n";
    CsvTable t = parse_csv(text, true);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "a red chair, on grass");
    CHECK(t.rows[1][1] == "say \"hi\"");

    // Round trip through csv_join.
    CsvTable again = parse_csv("a,b\n" + csv_join(t.rows[0]) + "\n", true);
    CHECK(again.rows[0] == t.rows[0]);

    CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n", true), ParseError);
    CHECK_THROWS_WITH_AS(parse_csv("a,b\nx,\"unterminated\n", true),
                         doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_AS(read_csv("/nonexistent/file.csv", true), IoError);
}

TEST_CASE("png round trip preserves bytes") {
    Rng rng(11);
    Image img(13, 9);
    for (float& v : img.rgb) v = float(rng.uniform_int(256)) / 255.0f;
    TempDir tmp("png");
    write_png(tmp.file("a.png"), img);
    Image back = read_png(tmp.file("a.png"));
    REQUIRE(back.height == img.height);
    REQUIRE(back.width == img.width);
    for (size_t i = 0; i < img.rgb.size(); ++i) CHECK(back.rgb[i] == img.rgb[i]);

    // Deterministic encoder: identical image -> identical bytes.
    CHECK(encode_png(img) == encode_png(img));

    CHECK_THROWS_AS(read_png(tmp.file("missing.png")), IoError);
    testutil::spit(tmp.file("bad.png"), "not a png at all");
    CHECK_THROWS_AS(read_png(tmp.file("bad.png")), ParseError);
}

TEST_CASE("signal file round trip is bit-exact") {
    Rng rng(5);
    MatF sig(7, 33);
    for (float& v : sig.v) v = float(rng.normal() * 1e3);
    TempDir tmp("signal");
    write_signal(tmp.file("r.eeg"), sig);
    MatF back = read_signal(tmp.file("r.eeg"));
    REQUIRE(back.rows == sig.rows);
    REQUIRE(back.cols == sig.cols);
    for (size_t i = 0; i < sig.size(); ++i) CHECK(back.v[i] == sig.v[i]);

    SUBCASE("bad magic") {
        testutil::spit(tmp.file("bad.eeg"), "XXXX0000000000000000");
        CHECK_THROWS_AS(read_signal(tmp.file("bad.eeg")), ParseError);
    }
    SUBCASE("truncated") {
        std::string bytes = testutil::slurp(tmp.file("r.eeg"));
        testutil::spit(tmp.file("trunc.eeg"), bytes.substr(0, bytes.size() - 5));
        CHECK_THROWS_AS(read_signal(tmp.file("trunc.eeg")), ParseError);
    }
    SUBCASE("future version") {
        std::string bytes = testutil::slurp(tmp.file("r.eeg"));
        bytes[4] = 99;
        testutil::spit(tmp.file("future.eeg"), bytes);
        CHECK_THROWS_AS(read_signal(tmp.file("future.eeg")), VersionError);
    }
}

namespace {

DatasetManifest tiny_manifest() {
    DatasetManifest m;
    m.dataset_id = "tiny";
    m.n_classes = 2;
    m.class_names = {"cat", "dog"};
    m.stimuli = {{"s0", "stimuli/s0.png", 0}, {"s1", "stimuli/s1.png", 1}};
    m.recordings = {{"r0", "s0", "signals/r0.eeg", 0, 0},
                    {"r1", "s1", "signals/r1.eeg", 1, 0},
                    {"r2", "s0", "signals/r2.eeg", 0, 1}};
    m.split_train = {"r0", "r1"};
    m.split_val = {};
    m.split_test = {"r2"};
    return m;
}

} // namespace

TEST_CASE("manifest validation catches constructed violations") {
    DatasetManifest m = tiny_manifest();
    CHECK(validate_manifest(m).empty());

    SUBCASE("recording in two splits") {
        m.split_test.push_back("r0");
        auto v = validate_manifest(m);
        REQUIRE(v.size() == 1);
        CHECK(v[0] == "recording r0 in train and test");
    }
    SUBCASE("class id beyond n_classes") {
        m.recordings[1].class_id = 41;
        m.n_classes = 40;
        m.class_names.assign(40, "x");
        m.stimuli[1].class_id = 39;
        auto v = validate_manifest(m);
        REQUIRE(!v.empty());
        CHECK(v[0].find("41") != std::string::npos);
        CHECK(v[0].find("r1") != std::string::npos);
    }
    SUBCASE("duplicate recording") {
        m.recordings.push_back(m.recordings[0]);
        auto v = validate_manifest(m);
        CHECK(!v.empty());
    }
    SUBCASE("missing stimulus reference") {
        m.recordings[0].stimulus_id = "ghost";
        auto v = validate_manifest(m);
        REQUIRE(!v.empty());
        CHECK(v[0].find("ghost") != std::string::npos);
    }
    SUBCASE("recording in no split") {
        m.split_test.clear();
        auto v = validate_manifest(m);
        REQUIRE(!v.empty());
        CHECK(v[0].find("no split") != std::string::npos);
    }
}

TEST_CASE("manifest round trip is the identity") {
    TempDir tmp("manifest");
    DatasetManifest m = tiny_manifest();
    m.target_caches["image"] = "image_cache.eegt";
    save_manifest(tmp.file("m.json"), m);
    DatasetManifest back = load_manifest(tmp.file("m.json"));
    CHECK(back.equals_ignoring_root(m));
    CHECK(back.root_dir == tmp.str());

    SUBCASE("truncated file is a parse error, not a crash") {
        std::string text = testutil::slurp(tmp.file("m.json"));
        testutil::spit(tmp.file("trunc.json"), text.substr(0, text.size() / 2));
        CHECK_THROWS_AS(load_manifest(tmp.file("trunc.json")), ParseError);
    }
    SUBCASE("future schema version") {
        std::string text = testutil::slurp(tmp.file("m.json"));
        size_t pos = text.find("\"schema_version\": 1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 19, "\"schema_version\": 9");
        testutil::spit(tmp.file("future.json"), text);
        CHECK_THROWS_AS(load_manifest(tmp.file("future.json")), VersionError);
    }
    SUBCASE("unreadable path is an io error") {
        CHECK_THROWS_AS(load_manifest(tmp.file("missing.json")), IoError);
    }
}

TEST_CASE("run manifest reload and hash stability") {
    TempDir tmp("runman");
    RunManifest rm;
    rm.command = "train";
    rm.config_json = "{\"lr\":0.0003}";
    rm.seed = 7;
    rm.inputs = {"a.json"};
    rm.outputs = {"ckpt.eegk"};
    rm.checkpoints = {{"encoder", "deadbeef"}};
    finalize_run_manifest(rm);
    CHECK(rm.run_id.substr(0, 6) == "train-");

    save_run_manifest(tmp.file("run.json"), rm);
    RunManifest back = load_run_manifest(tmp.file("run.json"));
    CHECK(back == rm);

    // created_at does not feed the hash.
    RunManifest rm2 = rm;
    rm2.created_at = "2020-01-01T00:00:00Z";
    rm2.config_hash.clear();
    finalize_run_manifest(rm2);
    CHECK(rm2.config_hash == rm.config_hash);
}

TEST_CASE("container hash trailer detects corruption") {
    TempDir tmp("container");
    Container c;
    c.magic = "EEGT";
    c.header_json = "{\"k\":1}";
    c.payload = {1.0f, 2.0f, -3.5f};
    write_container(tmp.file("c.bin"), c);
    Container back = read_container(tmp.file("c.bin"), "EEGT", 1);
    CHECK(back.header_json == c.header_json);
    CHECK(back.payload == c.payload);

    std::string bytes = testutil::slurp(tmp.file("c.bin"));
    bytes[bytes.size() / 2] ^= 0x40;
    testutil::spit(tmp.file("bad.bin"), bytes);
    CHECK_THROWS_WITH_AS(read_container(tmp.file("bad.bin"), "EEGT", 1),
                         doctest::Contains("hash mismatch"), ParseError);
}

TEST_CASE("run config defaults match the reference recipe") {
    RunConfig c;
    CHECK(c.data.n_channels == 128);
    CHECK(c.data.n_classes == 40);
    CHECK(c.encoder.rnn_layers == 3);
    CHECK(c.encoder.hidden_dim == 512);
    CHECK(c.train.lr == doctest::Approx(3e-4));
    CHECK(c.train.weight_decay == doctest::Approx(1e-4));
    CHECK(c.train.lr_lambda == doctest::Approx(0.999));
    CHECK(c.gen.inference_steps == 25);
    CHECK(c.metric.acc_n == 50);
    CHECK(c.metric.acc_k == 1);
    CHECK(validate_run_config(c).empty());

    RunConfig back = run_config_from_json(run_config_to_json(c));
    CHECK(back.train.lr == c.train.lr);
    CHECK(back.data.n_tokens == c.data.n_tokens);

    // Partial document keeps defaults; unknown keys are refused.
    RunConfig partial = run_config_from_json("{\"train\":{\"lr\":0.01}}");
    CHECK(partial.train.lr == doctest::Approx(0.01));
    CHECK(partial.encoder.hidden_dim == 512);
    CHECK_THROWS_AS(run_config_from_json("{\"trian\":{}}"), ValidationError);

    RunConfig bad;
    bad.train.batch_size = 1;
    CHECK(!validate_run_config(bad).empty());
}
