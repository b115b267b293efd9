#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace layoutprior {

// Error taxonomy. The CLI maps each kind onto a distinct exit code.
enum class ErrorKind { usage, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};
struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

struct Vec2 {
    double x{0.0};
    double y{0.0};

    friend bool operator==(const Vec2&, const Vec2&) = default;
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    friend Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
};

[[nodiscard]] bool is_finite(Vec2 p) noexcept;

// Rectangle in some source unit (pixels, meters) that is mapped onto [-1,1]^2.
struct Frame {
    Vec2 origin;  // lower corner
    Vec2 extent;  // width, height; both > 0
};

// Affine map of the frame onto [-1,1]^2 and its inverse.
[[nodiscard]] Vec2 normalize(Vec2 point, const Frame& frame);
[[nodiscard]] Vec2 denormalize(Vec2 point, const Frame& frame);

struct Category {
    std::string name;
    bool is_container{false};
    Vec2 default_size;  // width, height in table units

    friend bool operator==(const Category&, const Category&) = default;
};

// Ordered category list. The index of an entry is the integer label used everywhere else.
class CategoryVocab {
public:
    CategoryVocab() = default;
    explicit CategoryVocab(std::vector<Category> entries);

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const Category& at(int label) const;
    [[nodiscard]] const std::vector<Category>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::optional<int> find(std::string_view name) const;
    [[nodiscard]] int label_of(std::string_view name) const;  // throws DataError if unknown
    [[nodiscard]] bool is_container(int label) const { return at(label).is_container; }
    // FNV-1a over names, flags and default sizes; stored in checkpoints.
    [[nodiscard]] std::uint64_t hash() const noexcept;

    friend bool operator==(const CategoryVocab&, const CategoryVocab&) = default;

private:
    std::vector<Category> entries_;
};

struct ObjectCondition {
    Vec2 size;  // axis-aligned bbox extent, each component in (0, 2]
    int label{0};

    friend bool operator==(const ObjectCondition&, const ObjectCondition&) = default;
};

struct Layout {
    std::vector<Vec2> positions;

    [[nodiscard]] std::size_t size() const noexcept { return positions.size(); }
    friend bool operator==(const Layout&, const Layout&) = default;
};

struct ArrangementExample {
    std::vector<ObjectCondition> conditions;
    Layout goal;
    std::string domain;

    friend bool operator==(const ArrangementExample&, const ArrangementExample&) = default;
};

// Physical table extent in meters that maps onto [-1,1]^2.
struct Normalization {
    double width_m{1.0};
    double height_m{1.0};

    [[nodiscard]] double meters_to_units_x(double m) const { return 2.0 * m / width_m; }
    friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct Dataset {
    CategoryVocab vocab;
    Normalization normalization;
    std::vector<ArrangementExample> examples;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

void validate(const ObjectCondition& c, const CategoryVocab& vocab);
void validate(const ArrangementExample& ex, const CategoryVocab& vocab);

// Sort key: label ascending, bbox area descending, x ascending (y, then input index break
// remaining ties). Returns the permutation, perm[k] = source index of output slot k.
[[nodiscard]] std::vector<std::size_t> canonical_permutation(
    const std::vector<ObjectCondition>& conditions, const Layout& layout);

[[nodiscard]] std::pair<std::vector<ObjectCondition>, Layout> canonical_order(
    const std::vector<ObjectCondition>& conditions, const Layout& layout);

void canonicalize(ArrangementExample& ex);

// --- domains -----------------------------------------------------------------

enum class Scenario { dinner, desk };

struct DomainTag {
    Scenario scenario{Scenario::dinner};
    bool left_handed{false};

    [[nodiscard]] std::string str() const;
    friend bool operator==(const DomainTag&, const DomainTag&) = default;
};

// Accepts dinner-vanilla | dinner-left | desk-vanilla | desk-left.
[[nodiscard]] DomainTag parse_domain(std::string_view tag);

[[nodiscard]] CategoryVocab builtin_vocab(Scenario scenario);

[[nodiscard]] std::uint64_t fnv1a(const void* data, std::size_t n,
                                  std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;
[[nodiscard]] std::uint64_t layout_hash(const Layout& layout) noexcept;
[[nodiscard]] std::string hex64(std::uint64_t v);

}  // namespace layoutprior
