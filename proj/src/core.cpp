#include "layoutprior/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace layoutprior {

bool is_finite(Vec2 p) noexcept { return std::isfinite(p.x) && std::isfinite(p.y); }

namespace {

void check_frame(const Frame& frame) {
    if (!(frame.extent.x > 0.0) || !(frame.extent.y > 0.0) || !is_finite(frame.origin) ||
        !is_finite(frame.extent)) {
        throw DataError("frame extents must be positive and finite");
    }
}

}  // namespace

Vec2 normalize(Vec2 point, const Frame& frame) {
    check_frame(frame);
    if (!is_finite(point)) throw DataError("normalize: non-finite input point");
    return {2.0 * (point.x - frame.origin.x) / frame.extent.x - 1.0,
            2.0 * (point.y - frame.origin.y) / frame.extent.y - 1.0};
}

Vec2 denormalize(Vec2 point, const Frame& frame) {
    check_frame(frame);
    if (!is_finite(point)) throw DataError("denormalize: non-finite input point");
    return {frame.origin.x + 0.5 * (point.x + 1.0) * frame.extent.x,
            frame.origin.y + 0.5 * (point.y + 1.0) * frame.extent.y};
}

// --- vocab -------------------------------------------------------------------

CategoryVocab::CategoryVocab(std::vector<Category> entries) : entries_(std::move(entries)) {
    std::set<std::string> names;
    bool any_container = false;
    bool any_plain = false;
    for (const auto& e : entries_) {
        if (e.name.empty()) throw DataError("vocab: empty category name");
        if (!names.insert(e.name).second) throw DataError("vocab: duplicate category '" + e.name + "'");
        if (!(e.default_size.x > 0.0 && e.default_size.x <= 2.0 && e.default_size.y > 0.0 &&
              e.default_size.y <= 2.0)) {
            throw DataError("vocab: default size of '" + e.name + "' outside (0, 2]");
        }
        (e.is_container ? any_container : any_plain) = true;
    }
    if (!any_container || !any_plain) {
        throw DataError("vocab: needs at least one container and one non-container category");
    }
}

const Category& CategoryVocab::at(int label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= entries_.size()) {
        throw DataError("label " + std::to_string(label) + " outside vocab of size " +
                        std::to_string(entries_.size()));
    }
    return entries_[static_cast<std::size_t>(label)];
}

std::optional<int> CategoryVocab::find(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

int CategoryVocab::label_of(std::string_view name) const {
    if (auto l = find(name)) return *l;
    throw DataError("unknown category '" + std::string(name) + "'");
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::uint64_t hash_double(double v, std::uint64_t h) noexcept {
    // Hash the little-endian byte sequence so results agree across hosts.
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    return fnv1a(bytes, 8, h);
}

}  // namespace

std::uint64_t CategoryVocab::hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : entries_) {
        h = fnv1a(e.name.data(), e.name.size(), h);
        const unsigned char flag = e.is_container ? 1 : 0;
        h = fnv1a(&flag, 1, h);
        h = hash_double(e.default_size.x, h);
        h = hash_double(e.default_size.y, h);
    }
    return h;
}

std::uint64_t layout_hash(const Layout& layout) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : layout.positions) {
        h = hash_double(p.x, h);
        h = hash_double(p.y, h);
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// --- validation --------------------------------------------------------------

void validate(const ObjectCondition& c, const CategoryVocab& vocab) {
    if (!is_finite(c.size) || !(c.size.x > 0.0 && c.size.x <= 2.0 && c.size.y > 0.0 && c.size.y <= 2.0)) {
        throw DataError("object size must lie in (0, 2] on both axes");
    }
    (void)vocab.at(c.label);
}

void validate(const ArrangementExample& ex, const CategoryVocab& vocab) {
    if (ex.conditions.empty()) throw DataError("example has no objects");
    if (ex.conditions.size() != ex.goal.size()) {
        throw DataError("example has " + std::to_string(ex.conditions.size()) + " conditions but " +
                        std::to_string(ex.goal.size()) + " positions");
    }
    for (const auto& c : ex.conditions) validate(c, vocab);
    for (const auto& p : ex.goal.positions) {
        if (!is_finite(p)) throw DataError("non-finite coordinate in layout");
    }
}

// --- canonical ordering ------------------------------------------------------

std::vector<std::size_t> canonical_permutation(const std::vector<ObjectCondition>& conditions,
                                               const Layout& layout) {
    if (conditions.size() != layout.size()) {
        throw DataError("canonical_order: " + std::to_string(conditions.size()) + " conditions vs " +
                        std::to_string(layout.size()) + " positions");
    }
    std::vector<std::size_t> perm(conditions.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        const auto& ca = conditions[a];
        const auto& cb = conditions[b];
        if (ca.label != cb.label) return ca.label < cb.label;
        const double area_a = ca.size.x * ca.size.y;
        const double area_b = cb.size.x * cb.size.y;
        if (area_a != area_b) return area_a > area_b;
        const auto& pa = layout.positions[a];
        const auto& pb = layout.positions[b];
        if (pa.x != pb.x) return pa.x < pb.x;
        return pa.y < pb.y;
    });
    return perm;
}

std::pair<std::vector<ObjectCondition>, Layout> canonical_order(
    const std::vector<ObjectCondition>& conditions, const Layout& layout) {
    const auto perm = canonical_permutation(conditions, layout);
    std::vector<ObjectCondition> c;
    Layout l;
    c.reserve(perm.size());
    l.positions.reserve(perm.size());
    for (auto k : perm) {
        c.push_back(conditions[k]);
        l.positions.push_back(layout.positions[k]);
    }
    return {std::move(c), std::move(l)};
}

void canonicalize(ArrangementExample& ex) {
    auto [c, l] = canonical_order(ex.conditions, ex.goal);
    ex.conditions = std::move(c);
    ex.goal = std::move(l);
}

// --- domains -----------------------------------------------------------------

std::string DomainTag::str() const {
    std::string s = scenario == Scenario::dinner ? "dinner" : "desk";
    return s + (left_handed ? "-left" : "-vanilla");
}

DomainTag parse_domain(std::string_view tag) {
    if (tag == "dinner-vanilla") return {Scenario::dinner, false};
    if (tag == "dinner-left") return {Scenario::dinner, true};
    if (tag == "desk-vanilla") return {Scenario::desk, false};
    if (tag == "desk-left") return {Scenario::desk, true};
    throw UsageError("unknown domain '" + std::string(tag) +
                     "' (expected dinner-vanilla, dinner-left, desk-vanilla or desk-left)");
}

CategoryVocab builtin_vocab(Scenario scenario) {
    if (scenario == Scenario::dinner) {
        return CategoryVocab({
            {"plate", true, {0.52, 0.52}},
            {"fork", false, {0.05, 0.38}},
            {"knife", false, {0.05, 0.40}},
            {"spoon", false, {0.07, 0.34}},
            {"cup", false, {0.18, 0.18}},
            {"saucer", true, {0.30, 0.30}},
            {"mug", false, {0.20, 0.20}},
        });
    }
    return CategoryVocab({
        {"monitor", false, {0.90, 0.14}},
        {"keyboard", false, {0.70, 0.22}},
        {"mouse", false, {0.10, 0.16}},
        {"mug", false, {0.18, 0.18}},
        {"tray", true, {0.32, 0.24}},
        {"notebook", false, {0.30, 0.40}},
    });
}

}  // namespace layoutprior
