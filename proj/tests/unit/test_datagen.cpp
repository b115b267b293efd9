#include <doctest.h>

#include <cmath>
#include <map>

#include "../support/oracles.hpp"
#include "layoutprior/datagen.hpp"

using namespace layoutprior;

namespace {

PromptSpec reference_prompt() {
    return {"the non-overlapping, well-organized",
            "table setting",
            {{"cup", 1}, {"plate", 1}, {"fork", 1}, {"knife", 1}, {"spoon", 1}},
            "left-handed layout",
            "top-down"};
}

Vec2 template_position(DomainTag d, const std::string& category) {
    for (const auto& s : functional_template(d)) {
        if (s.category == category) return s.position;
    }
    FAIL("category not in template");
    return {};
}

}  // namespace

TEST_CASE("prompt template") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    CHECK(build_prompt(reference_prompt(), vocab) ==
          "Realistic photo of the non-overlapping, well-organized table setting with one cup, one plate, one fork, "
          "one knife, one spoon, left-handed layout, top-down");

    PromptSpec single{"a tidy", "table setting", {{"plate", 1}}, "right-handed layout", "top-down"};
    CHECK(build_prompt(single, vocab) ==
          "Realistic photo of a tidy table setting with one plate, right-handed layout, top-down");

    // Count words up to ten, digits beyond; plurals for counts above one.
    const std::map<int, std::string> expect{{2, "two forks"},   {3, "three forks"}, {7, "seven forks"},
                                            {10, "ten forks"},  {11, "11 forks"},   {25, "25 forks"}};
    for (const auto& [n, text] : expect) {
        PromptSpec s{"a", "table setting", {{"fork", n}}, "", ""};
        CHECK(build_prompt(s, vocab) == "Realistic photo of a table setting with " + text);
    }
    PromptSpec knives{"a", "table setting", {{"knife", 2}}, "", ""};
    CHECK(build_prompt(knives, vocab).ends_with("two knives"));

    PromptSpec bad = single;
    bad.object_counts = {{"vase", 1}};
    CHECK_THROWS_AS((void)build_prompt(bad, vocab), DataError);
    bad.object_counts = {{"plate", 0}};
    CHECK_THROWS_AS((void)build_prompt(bad, vocab), DataError);
}

TEST_CASE("prompt domain detection") {
    CHECK(prompt_domain(reference_prompt()) == DomainTag{Scenario::dinner, true});
    CHECK(prompt_domain(default_prompt({Scenario::desk, false})) == DomainTag{Scenario::desk, false});
    for (const char* t : {"dinner-vanilla", "dinner-left", "desk-vanilla", "desk-left"}) {
        CHECK(prompt_domain(default_prompt(parse_domain(t))) == parse_domain(t));
    }
}

TEST_CASE("template constants") {
    const DomainTag v{Scenario::dinner, false}, l{Scenario::dinner, true};
    CHECK(template_position(v, "plate") == Vec2{0.0, -0.15});
    CHECK(template_position(v, "fork").x == -0.35);
    CHECK(template_position(l, "fork").x == 0.35);
    CHECK(template_position(v, "knife").x == -template_position(v, "fork").x);
    // Cup sits in the upper quadrant opposite the fork.
    CHECK(template_position(v, "cup").x * template_position(v, "fork").x < 0.0);
    CHECK(template_position(v, "cup").y > 0.0);
    const DomainTag dv{Scenario::desk, false}, dl{Scenario::desk, true};
    CHECK(template_position(dv, "monitor").x == 0.0);
    CHECK(template_position(dv, "keyboard").y < template_position(dv, "monitor").y);
    CHECK(template_position(dv, "mouse").x > 0.0);
    CHECK(template_position(dl, "mouse").x < 0.0);
}

TEST_CASE("overlap predicate") {
    CHECK(boxes_overlap({0, 0}, {1, 1}, {0.9, 0}, {1, 1}));
    CHECK_FALSE(boxes_overlap({0, 0}, {1, 1}, {1.0, 0}, {1, 1}));  // touching
    CHECK(boxes_overlap({0, 0}, {1, 1}, {1.0, 0}, {1, 1}, 0.01));
    Rng rng = stream_rng(2, 0);
    for (int k = 0; k < 5000; ++k) {
        const Vec2 a{uniform(rng, -1, 1), uniform(rng, -1, 1)}, b{uniform(rng, -1, 1), uniform(rng, -1, 1)};
        const Vec2 sa{uniform(rng, 0.05, 1), uniform(rng, 0.05, 1)}, sb{uniform(rng, 0.05, 1), uniform(rng, 0.05, 1)};
        CHECK(boxes_overlap(a, sa, b, sb) == oracle::overlap(a, sa, b, sb));
        CHECK(boxes_overlap(a, sa, b, sb) == boxes_overlap(b, sb, a, sa));
    }
}

TEST_CASE("zero jitter reproduces the template exactly") {
    for (const char* tag : {"dinner-vanilla", "dinner-left", "desk-vanilla", "desk-left"}) {
        const DomainTag d = parse_domain(tag);
        const auto vocab = builtin_vocab(d.scenario);
        GeneratorConfig cfg{tag, 0.0, 3, 20, 0.0};
        const Dataset ds = synth_generate(cfg, vocab);
        REQUIRE(ds.examples.size() == 20);
        for (const auto& ex : ds.examples) {
            CHECK(ex.domain == tag);
            int non_extra = 0;
            for (const auto& s : functional_template(d)) non_extra += s.role != SlotRole::extra;
            CHECK(static_cast<int>(ex.conditions.size()) == non_extra);
            for (std::size_t i = 0; i < ex.conditions.size(); ++i) {
                const auto& cat = vocab.at(ex.conditions[i].label);
                CHECK(ex.conditions[i].size == cat.default_size);
                CHECK(ex.goal.positions[i] == template_position(d, cat.name));
            }
            CHECK(ex == ds.examples.front());
        }
    }
}

TEST_CASE("generation is deterministic, collision-free and mirror-symmetric") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    GeneratorConfig cfg{"dinner-vanilla", 0.05, 17, 300, 0.3};
    const Dataset a = synth_generate(cfg, vocab);
    CHECK(a == synth_generate(cfg, vocab));
    for (const auto& ex : a.examples) {
        for (std::size_t i = 0; i < ex.conditions.size(); ++i) {
            for (std::size_t j = i + 1; j < ex.conditions.size(); ++j) {
                CHECK_FALSE(oracle::overlap(ex.goal.positions[i], ex.conditions[i].size, ex.goal.positions[j],
                                            ex.conditions[j].size));
            }
            CHECK(std::abs(ex.goal.positions[i].x) + ex.conditions[i].size.x / 2 <= 1.0);
            CHECK(std::abs(ex.goal.positions[i].y) + ex.conditions[i].size.y / 2 <= 1.0);
        }
    }
    cfg.domain = "dinner-left";
    const Dataset b = synth_generate(cfg, vocab);
    REQUIRE(a.examples.size() == b.examples.size());
    for (std::size_t k = 0; k < a.examples.size(); ++k) {
        auto m = mirror_x(a.examples[k]);
        canonicalize(m);
        m.domain = "dinner-left";
        CHECK(m == b.examples[k]);
    }

    // Optional objects are dropped at roughly the configured rate.
    int with_cup = 0;
    for (const auto& ex : a.examples) {
        for (const auto& c : ex.conditions) with_cup += c.label == vocab.label_of("cup");
    }
    CHECK(with_cup > 0.6 * 300);
    CHECK(with_cup < 0.8 * 300);
}

TEST_CASE("jittered means converge on the template") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    const double jitter = 0.01;
    const int n = 10000;
    const Dataset ds = synth_generate({"dinner-vanilla", jitter, 23, n, 0.0}, vocab);
    std::map<int, std::pair<Vec2, int>> sums;
    std::map<int, double> sq;
    for (const auto& ex : ds.examples) {
        for (std::size_t i = 0; i < ex.conditions.size(); ++i) {
            auto& [s, c] = sums[ex.conditions[i].label];
            s += ex.goal.positions[i];
            ++c;
        }
    }
    for (const auto& [label, sc] : sums) {
        const auto& [s, c] = sc;
        REQUIRE(c == n);
        const Vec2 mean = (1.0 / c) * s;
        const Vec2 t = template_position({Scenario::dinner, false}, vocab.at(label).name);
        CHECK(std::abs(mean.x - t.x) < 3.0 * jitter / std::sqrt(c));
        CHECK(std::abs(mean.y - t.y) < 3.0 * jitter / std::sqrt(c));
    }
}

TEST_CASE("generator validation") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    CHECK_THROWS_AS((void)synth_generate({"dinner-vanilla", 0.0, 0, 0, 0.0}, vocab), UsageError);
    CHECK_THROWS_AS((void)synth_generate({"dinner-vanilla", -0.1, 0, 1, 0.0}, vocab), UsageError);
    CHECK_THROWS_AS((void)synth_generate({"dinner-vanilla", 0.0, 0, 1, 1.5}, vocab), UsageError);
    CHECK_THROWS_AS((void)synth_generate({"kitchen", 0.0, 0, 1, 0.0}, vocab), UsageError);
    // Jitter so large that the table cannot hold the objects: rejection gives up.
    CHECK_THROWS_AS((void)synth_generate({"dinner-vanilla", 5.0, 0, 1, 0.0}, vocab), DataError);
}

TEST_CASE("random placement baseline is collision-free and on the table") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    Rng rng = stream_rng(8, 0);
    const Dataset ds = synth_generate({"dinner-left", 0.03, 1, 50, 0.0}, vocab);
    for (const auto& ex : ds.examples) {
        const Layout l = random_no_collision(ex.conditions, rng);
        REQUIRE(l.size() == ex.conditions.size());
        CHECK_FALSE(any_overlap(ex.conditions, l));
        for (std::size_t i = 0; i < l.size(); ++i) {
            CHECK(std::abs(l.positions[i].x) + ex.conditions[i].size.x / 2 <= 1.0);
        }
    }
    std::vector<ObjectCondition> huge(5, ObjectCondition{{1.5, 1.5}, 0});
    CHECK_THROWS_AS((void)random_no_collision(huge, rng), DataError);
}

TEST_CASE("mock_refine examples") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    const PromptSpec spec = reference_prompt();
    auto det = [](const std::string& cat, double conf) { return DetectedObject{{0.5, 0.5}, {0.05, 0.1}, cat, conf}; };

    SUBCASE("duplicate fork keeps the most confident one") {
        const auto r = mock_refine({det("plate", 0.8), det("fork", 0.7), det("fork", 0.9)}, spec, vocab);
        REQUIRE(r.removed.size() == 1);
        CHECK(r.removed[0].confidence == 0.7);
        int forks = 0;
        for (const auto& k : r.kept) forks += k.category == "fork";
        CHECK(forks == 1);
    }
    SUBCASE("confidence ties go to the earlier detection") {
        auto a = det("fork", 0.9), b = det("fork", 0.9);
        b.center = {0.1, 0.1};
        const auto r = mock_refine({a, b}, spec, vocab);
        REQUIRE(r.removed.size() == 1);
        CHECK(r.removed[0].center == Vec2{0.1, 0.1});
    }
    SUBCASE("unexpected category is removed") {
        const auto r = mock_refine({det("plate", 0.8), det("mug", 0.99)}, spec, vocab);
        REQUIRE(r.removed.size() == 1);
        CHECK(r.removed[0].category == "mug");
    }
    SUBCASE("exact match snaps to the template and keeps sizes") {
        std::vector<DetectedObject> d;
        for (const auto& [cat, n] : spec.object_counts) d.push_back(det(cat, 0.5));
        const auto r = mock_refine(d, spec, vocab);
        CHECK(r.removed.empty());
        REQUIRE(r.kept.size() == 5);
        for (const auto& k : r.kept) {
            const Vec2 table = normalize(k.center, kImageFrame);
            const Vec2 t = template_position({Scenario::dinner, true}, k.category);
            CHECK(table.x == doctest::Approx(t.x).epsilon(1e-12));
            CHECK(table.y == doctest::Approx(t.y).epsilon(1e-12));
            CHECK(k.extent == Vec2{0.05, 0.1});
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS((void)mock_refine({}, spec, vocab), DataError);
        CHECK_THROWS_AS((void)mock_refine({det("vase", 0.9)}, spec, vocab), DataError);
        CHECK_THROWS_AS((void)mock_refine({det("plate", 1.5)}, spec, vocab), DataError);
    }
}

TEST_CASE("mock_refine partitions corrupted scenes and honors prompt counts") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    PromptSpec spec = reference_prompt();
    spec.object_counts = {{"plate", 2}, {"fork", 1}, {"cup", 1}};
    Rng rng = stream_rng(31, 0);
    CorruptionOptions opts{0.8, 0.8, 0.15};
    for (int k = 0; k < 300; ++k) {
        const auto d = corrupt_scene(spec, vocab, opts, rng);
        const auto r = mock_refine(d, spec, vocab);
        CHECK(r.kept.size() + r.removed.size() == d.size());
        std::map<std::string, int> in, out;
        for (const auto& x : d) ++in[x.category];
        for (const auto& x : r.kept) ++out[x.category];
        for (const auto& x : r.removed) ++out[x.category];
        CHECK(in == out);
        std::map<std::string, int> kept;
        for (const auto& x : r.kept) ++kept[x.category];
        for (const auto& [cat, n] : kept) {
            const auto it = std::find_if(spec.object_counts.begin(), spec.object_counts.end(),
                                         [&](const auto& p) { return p.first == cat; });
            REQUIRE(it != spec.object_counts.end());
            CHECK(n <= it->second);
        }
    }
}

TEST_CASE("pipeline emulation through the provider interfaces") {
    const auto vocab = builtin_vocab(Scenario::dinner);
    auto providers = mock_providers(vocab);
    const PromptSpec spec = default_prompt({Scenario::dinner, true});
    const Dataset a = run_pipeline(spec, providers, vocab, 12, 5);
    const Dataset b = run_pipeline(spec, providers, vocab, 12, 5);
    CHECK(a == b);
    REQUIRE(a.examples.size() == 12);
    for (const auto& ex : a.examples) {
        CHECK(ex.domain == "dinner-left");
        CHECK_NOTHROW(validate(ex, vocab));
        CHECK(ex.conditions.size() == 5);
        CHECK_FALSE(any_overlap(ex.conditions, ex.goal));
    }
    Providers empty;
    CHECK_THROWS_AS((void)run_pipeline(spec, empty, vocab, 1, 0), UsageError);
}
