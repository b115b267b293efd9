#include <doctest.h>

#include <sstream>

#include "../support/oracles.hpp"
#include "../support/tempdir.hpp"
#include "layoutprior/dataset_io.hpp"
#include "layoutprior/datagen.hpp"

using namespace layoutprior;
using testing::TempDir;

namespace {

// Nine significant digits, the precision the file format promises to keep bit-exact.
double nine_digits(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return std::strtod(buf, nullptr);
}

Dataset random_dataset(std::uint64_t seed, int count) {
    Rng rng = stream_rng(seed, 0);
    Dataset ds{builtin_vocab(Scenario::dinner), {0.9, 0.6}, {}};
    for (int k = 0; k < count; ++k) {
        auto [c, p] = oracle::random_scene(rng, 1 + k % 6, 7);
        for (auto& cc : c) cc.size = {nine_digits(cc.size.x), nine_digits(cc.size.y)};
        for (auto& pp : p) pp = {nine_digits(pp.x), nine_digits(pp.y)};
        ds.examples.push_back({c, Layout{p}, k % 2 ? "dinner-left" : "dinner-vanilla"});
    }
    return ds;
}

}  // namespace

TEST_CASE("dataset round trip is bit-exact") {
    TempDir dir("dsio");
    const Dataset ds = random_dataset(4, 200);
    save_dataset(dir / "d.jsonl", ds);
    const Dataset back = load_dataset(dir / "d.jsonl");
    CHECK(back == ds);

    // Values with more digits than the guarantee still survive: the writer emits round-trip text.
    Dataset fine = ds;
    fine.examples[0].goal.positions[0].x = 0.1 + 1e-17;
    fine.examples[0].goal.positions[0].y = 1.0 / 3.0;
    save_dataset(dir / "f.jsonl", fine);
    CHECK(load_dataset(dir / "f.jsonl") == fine);
}

TEST_CASE("file layout: header line then one line per example") {
    const Dataset ds = random_dataset(5, 3);
    std::ostringstream out;
    write_dataset(out, ds);
    const std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.rfind("{\"format\":\"layoutprior-dataset\"", 0) == 0);
    const auto second = text.substr(text.find('\n') + 1);
    CHECK(second.find("\"objects\"") != std::string::npos);
    CHECK(parse_example_line(second.substr(0, second.find('\n')), ds.vocab) == ds.examples[0]);
}

TEST_CASE("vocab json round trip") {
    for (auto s : {Scenario::dinner, Scenario::desk}) {
        const auto v = builtin_vocab(s);
        CHECK(vocab_from_json(vocab_to_json(v)) == v);
    }
    CHECK_THROWS_AS((void)vocab_from_json("[{"), DataError);
}

TEST_CASE("import: 969 valid headerless lines give 969 canonical examples") {
    TempDir dir("import");
    const auto vocab = builtin_vocab(Scenario::dinner);
    Dataset ds = random_dataset(6, 969);
    std::string text;
    for (const auto& ex : ds.examples) text += example_line(ex) + "\n";
    testing::spit(dir / "x.jsonl", text);
    const Dataset got = import_examples(dir / "x.jsonl", vocab);
    REQUIRE(got.examples.size() == 969);
    for (std::size_t i = 0; i < got.examples.size(); ++i) {
        auto expected = ds.examples[i];
        canonicalize(expected);
        CHECK(got.examples[i] == expected);
    }
}

TEST_CASE("import: exported synthetic data comes back equal") {
    TempDir dir("export");
    const auto vocab = builtin_vocab(Scenario::desk);
    GeneratorConfig cfg;
    cfg.domain = "desk-left";
    cfg.count = 40;
    cfg.seed = 9;
    const Dataset ds = synth_generate(cfg, vocab);
    save_dataset(dir / "s.jsonl", ds);
    CHECK(import_examples(dir / "s.jsonl", vocab) == ds);
}

TEST_CASE("import: invalid lines are reported with their line numbers") {
    TempDir dir("bad");
    const auto vocab = builtin_vocab(Scenario::dinner);
    const std::string good = R"({"domain":"dinner-vanilla","objects":[{"label":0,"size":[0.5,0.5],"pos":[0,0]}]})";
    const std::string bad_label = R"({"domain":"dinner-vanilla","objects":[{"label":7,"size":[0.5,0.5],"pos":[0,0]}]})";
    const std::string bad_json = R"({"domain":"dinner-vanilla","objects":[)";
    const std::string bad_num = R"({"domain":"dinner-vanilla","objects":[{"label":0,"size":[0.5,0.5],"pos":[1e999,0]}]})";
    testing::spit(dir / "b.jsonl", good + "\n" + bad_label + "\n" + good + "\n" + bad_json + "\n" + bad_num + "\n");
    try {
        (void)import_examples(dir / "b.jsonl", vocab);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("b.jsonl:2:") != std::string::npos);
        CHECK(msg.find("label 7") != std::string::npos);
        CHECK(msg.find("b.jsonl:4:") != std::string::npos);
        CHECK(msg.find("b.jsonl:5:") != std::string::npos);
        CHECK(msg.find("b.jsonl:1:") == std::string::npos);
        CHECK(msg.find("b.jsonl:3:") == std::string::npos);
    }
}

TEST_CASE("import: header vocab must match") {
    TempDir dir("hdr");
    Dataset ds = random_dataset(7, 2);
    save_dataset(dir / "h.jsonl", ds);
    CHECK_THROWS_AS((void)import_examples(dir / "h.jsonl", builtin_vocab(Scenario::desk)), DataError);
    CHECK_THROWS_AS((void)load_dataset(dir / "missing.jsonl"), DataError);
    testing::spit(dir / "nohdr.jsonl", example_line(ds.examples[0]) + "\n");
    CHECK_THROWS_AS((void)load_dataset(dir / "nohdr.jsonl"), DataError);
}

TEST_CASE("scene files") {
    TempDir dir("scene");
    const auto vocab = builtin_vocab(Scenario::dinner);
    const ArrangementExample ex{{{{0.52, 0.52}, 0}, {{0.05, 0.38}, 1}}, Layout{{{0.0, -0.15}, {-0.35, -0.15}}},
                                "dinner-vanilla"};
    save_scene(dir / "a.json", ex);
    const auto a = load_scene(dir / "a.json");
    CHECK(a.scene == ex);
    CHECK_FALSE(a.vocab.has_value());
    CHECK(resolve_vocab(a) == vocab);

    const CategoryVocab custom({{"box", true, {0.3, 0.3}}, {"ball", false, {0.1, 0.1}}});
    const ArrangementExample ex2{{{{0.3, 0.3}, 0}}, Layout{{{0.1, 0.1}}}, "dinner-vanilla"};
    save_scene(dir / "b.json", ex2, &custom);
    const auto b = load_scene(dir / "b.json");
    CHECK(resolve_vocab(b) == custom);

    testing::spit(dir / "e.json", R"({"domain":"desk-left","objects":[]})");
    CHECK_THROWS_AS((void)load_scene(dir / "e.json"), DataError);
    CHECK(load_scene(dir / "e.json", true).scene.conditions.empty());
    testing::spit(dir / "bad.json", "{");
    CHECK_THROWS_AS((void)load_scene(dir / "bad.json"), DataError);
}
