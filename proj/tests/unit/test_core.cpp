#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "../support/oracles.hpp"
#include "layoutprior/core.hpp"
#include "layoutprior/util.hpp"

using namespace layoutprior;

TEST_CASE("normalize maps a 640x480 image frame onto the unit table") {
    const Frame img{{0.0, 0.0}, {640.0, 480.0}};
    CHECK(normalize({320.0, 240.0}, img) == Vec2{0.0, 0.0});
    CHECK(normalize({0.0, 0.0}, img) == Vec2{-1.0, -1.0});
    CHECK(normalize({640.0, 480.0}, img) == Vec2{1.0, 1.0});
    // By hand: x = 2 * 320 / 640 - 1 = 0, y = 2 * 120 / 480 - 1 = -0.5.
    const Vec2 p = normalize({320.0, 120.0}, img);
    CHECK(p.x == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(p.y == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("normalize and denormalize are mutual inverses inside the frame") {
    Rng rng = stream_rng(3, 0);
    for (int k = 0; k < 2000; ++k) {
        const Frame f{{uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0)},
                      {uniform(rng, 0.1, 1000.0), uniform(rng, 0.1, 1000.0)}};
        const Vec2 q{f.origin.x + uniform(rng, 0.0, 1.0) * f.extent.x,
                     f.origin.y + uniform(rng, 0.0, 1.0) * f.extent.y};
        const Vec2 n = normalize(q, f);
        const Vec2 back = denormalize(n, f);
        const double scale = std::max({1.0, std::abs(f.origin.x) + f.extent.x, std::abs(f.origin.y) + f.extent.y});
        CHECK(std::abs(back.x - q.x) <= 1e-12 * scale);
        CHECK(std::abs(back.y - q.y) <= 1e-12 * scale);
        const Vec2 u{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
        const Vec2 uu = normalize(denormalize(u, f), f);
        CHECK(std::abs(uu.x - u.x) <= 1e-12);
        CHECK(std::abs(uu.y - u.y) <= 1e-12);
    }
}

TEST_CASE("normalize rejects bad input") {
    const Frame img{{0.0, 0.0}, {640.0, 480.0}};
    CHECK_THROWS_AS((void)normalize({std::nan(""), 0.0}, img), DataError);
    CHECK_THROWS_AS((void)normalize({0.0, std::numeric_limits<double>::infinity()}, img), DataError);
    CHECK_THROWS_AS((void)normalize({0.0, 0.0}, Frame{{0.0, 0.0}, {0.0, 1.0}}), DataError);
    CHECK_THROWS_AS((void)denormalize({0.0, 0.0}, Frame{{0.0, 0.0}, {1.0, -1.0}}), DataError);
}

TEST_CASE("vocabulary invariants") {
    for (auto s : {Scenario::dinner, Scenario::desk}) {
        const auto v = builtin_vocab(s);
        bool container = false, plain = false;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& c = v.at(static_cast<int>(i));
            (c.is_container ? container : plain) = true;
            CHECK(v.label_of(c.name) == static_cast<int>(i));
        }
        CHECK(container);
        CHECK(plain);
    }
    const auto d = builtin_vocab(Scenario::dinner);
    CHECK(d.at(0).name == "plate");
    CHECK(d.is_container(d.label_of("saucer")));
    CHECK_FALSE(d.is_container(d.label_of("mug")));
    CHECK_FALSE(d.find("stapler").has_value());
    CHECK_THROWS_AS((void)d.label_of("stapler"), DataError);
    CHECK_THROWS_AS((void)d.at(7), DataError);
    CHECK_THROWS_AS((void)d.at(-1), DataError);
    CHECK(d.hash() != builtin_vocab(Scenario::desk).hash());

    CHECK_THROWS_AS(CategoryVocab({{"a", true, {0.1, 0.1}}, {"a", false, {0.1, 0.1}}}), DataError);
    CHECK_THROWS_AS(CategoryVocab({{"a", false, {0.1, 0.1}}, {"b", false, {0.1, 0.1}}}), DataError);
    CHECK_THROWS_AS(CategoryVocab({{"a", true, {0.1, 0.1}}, {"b", false, {2.5, 0.1}}}), DataError);
}

TEST_CASE("condition and example validation") {
    const auto v = builtin_vocab(Scenario::dinner);
    CHECK_NOTHROW(validate(ObjectCondition{{2.0, 0.1}, 6}, v));
    CHECK_THROWS_AS(validate(ObjectCondition{{0.0, 0.1}, 0}, v), DataError);
    CHECK_THROWS_AS(validate(ObjectCondition{{2.01, 0.1}, 0}, v), DataError);
    CHECK_THROWS_AS(validate(ObjectCondition{{0.1, 0.1}, 7}, v), DataError);

    ArrangementExample ex{{{{0.1, 0.1}, 0}}, Layout{{{0.0, 0.0}}}, "dinner-vanilla"};
    CHECK_NOTHROW(validate(ex, v));
    ex.goal.positions.push_back({0.1, 0.1});
    CHECK_THROWS_AS(validate(ex, v), DataError);
    ex.goal.positions.pop_back();
    ex.goal.positions[0].y = std::nan("");
    CHECK_THROWS_AS(validate(ex, v), DataError);
    ArrangementExample empty{{}, {}, "dinner-vanilla"};
    CHECK_THROWS_AS(validate(empty, v), DataError);
}

TEST_CASE("canonical order examples") {
    // Labels (3, 1) -> (1, 3).
    auto [c1, l1] = canonical_order({{{0.1, 0.1}, 3}, {{0.1, 0.1}, 1}}, Layout{{{0.5, 0.0}, {-0.5, 0.0}}});
    CHECK(c1[0].label == 1);
    CHECK(c1[1].label == 3);
    CHECK(l1.positions[0] == Vec2{-0.5, 0.0});

    // Two plates, 0.20^2 first in input, 0.30^2 must come first in output.
    auto [c2, l2] = canonical_order({{{0.2, 0.2}, 0}, {{0.3, 0.3}, 0}}, Layout{{{0.0, 0.0}, {0.4, 0.4}}});
    CHECK(c2[0].size == Vec2{0.3, 0.3});
    CHECK(l2.positions[0] == Vec2{0.4, 0.4});

    // Same label and area: smaller x first.
    auto [c3, l3] = canonical_order({{{0.2, 0.2}, 0}, {{0.2, 0.2}, 0}}, Layout{{{0.3, 0.0}, {-0.3, 0.0}}});
    CHECK(l3.positions[0].x == -0.3);

    CHECK_THROWS_AS((void)canonical_order({{{0.1, 0.1}, 0}}, Layout{}), DataError);
}

TEST_CASE("canonical order is an idempotent, sorted permutation") {
    Rng rng = stream_rng(11, 0);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + trial % 9;
        auto [conds, pos] = oracle::random_scene(rng, n, 4);
        // Force some area ties so the x tie-break is exercised.
        if (n > 2) conds[1].size = conds[0].size, conds[1].label = conds[0].label;
        const Layout layout{pos};
        auto [c, l] = canonical_order(conds, layout);

        // Multiset of (condition, position) pairs preserved.
        std::multimap<std::tuple<int, double, double, double, double>, int> before, after;
        for (int i = 0; i < n; ++i) {
            before.emplace(std::tuple{conds[i].label, conds[i].size.x, conds[i].size.y, pos[i].x, pos[i].y}, 0);
            after.emplace(std::tuple{c[i].label, c[i].size.x, c[i].size.y, l.positions[i].x, l.positions[i].y}, 0);
        }
        CHECK(before.size() == after.size());
        CHECK(std::equal(before.begin(), before.end(), after.begin(),
                         [](const auto& a, const auto& b) { return a.first == b.first; }));

        // Adjacent slots respect the key: label asc, area desc, x asc.
        for (int i = 0; i + 1 < n; ++i) {
            const auto key = [&](int k) {
                return std::tuple{c[k].label, -(c[k].size.x * c[k].size.y), l.positions[k].x};
            };
            CHECK(key(i) <= key(i + 1));
        }

        auto [c2, l2] = canonical_order(c, l);
        CHECK(c2 == c);
        CHECK(l2 == l);
    }
}

TEST_CASE("domain tags") {
    CHECK(parse_domain("dinner-left") == DomainTag{Scenario::dinner, true});
    CHECK(parse_domain("desk-vanilla") == DomainTag{Scenario::desk, false});
    for (const char* t : {"dinner-vanilla", "dinner-left", "desk-vanilla", "desk-left"}) {
        CHECK(parse_domain(t).str() == t);
    }
    CHECK_THROWS_AS((void)parse_domain("kitchen-left"), UsageError);
}

TEST_CASE("layout hash is sensitive to every coordinate") {
    const Layout a{{{0.1, 0.2}, {0.3, 0.4}}};
    Layout b = a;
    CHECK(layout_hash(a) == layout_hash(b));
    b.positions[1].y = std::nextafter(0.4, 1.0);
    CHECK(layout_hash(a) != layout_hash(b));
    CHECK(hex64(0x1f).size() == 16);
    CHECK(hex64(0x1f) == "000000000000001f");
}

TEST_CASE("seed streams are reproducible and distinct") {
    Rng a = stream_rng(5, 2), b = stream_rng(5, 2), c = stream_rng(5, 3);
    const auto va = a(), vb = b(), vc = c();
    CHECK(va == vb);
    CHECK(va != vc);
    Rng r = stream_rng(1, 1);
    double mean = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = standard_normal(r);
        mean += z;
        sq += z * z;
    }
    mean /= n;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(n));
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform(r, -2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
}
