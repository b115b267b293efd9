#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "layoutprior/core.hpp"

namespace layoutprior {

// --- coverage ------------------------------------------------------------------

// Squared L2 distance between flattened position vectors of equal length.
[[nodiscard]] double layout_sq_distance(const Layout& a, const Layout& b);

// Sum over ground-truth layouts of the minimum squared distance to any generated layout of the
// same object count. Throws DataError naming the first ground-truth index without a partner.
[[nodiscard]] double coverage_score(const std::vector<Layout>& generated, const std::vector<Layout>& ground_truth);

// Same, but a generated example only competes for a ground-truth example when both carry the
// same label sequence (canonical order makes equal multisets compare slot by slot).
[[nodiscard]] double coverage_score(const std::vector<ArrangementExample>& generated,
                                    const std::vector<ArrangementExample>& ground_truth);

// --- kernel density estimation -------------------------------------------------

struct KdeConfig {
    // Fixed bandwidths; 0 selects Scott's rule h = n^(-1/6) std per axis.
    double bandwidth_x{0.0};
    double bandwidth_y{0.0};
    // Used on an axis whose samples have zero spread.
    double fallback_bandwidth{0.05};
    int resolution{64};
    double window_lo{-1.5};
    double window_hi{1.5};
    double delta{1e-12};

    void validate() const;
};

// Gaussian kernel with the constant 1 / (2 pi), applied per axis.
[[nodiscard]] double kde_kernel(double u) noexcept;

// f(x, y) = 1 / (n hx hy) sum_i K((x - x_i) / hx) K((y - y_i) / hy); requires n >= 1.
[[nodiscard]] double kde_evaluate(const std::vector<Vec2>& samples, Vec2 at, double hx, double hy);

// Scott's rule on one axis; falls back when the sample std is zero.
[[nodiscard]] double scott_bandwidth(const std::vector<double>& values, double fallback);

struct KdeGrid {
    int resolution{0};
    double lo{0.0};
    double hi{0.0};
    double hx{0.0};
    double hy{0.0};
    // values[iy * resolution + ix] is the mass of the cell whose center is cell_center(ix, iy).
    std::vector<double> values;

    [[nodiscard]] Vec2 cell_center(int ix, int iy) const;
    [[nodiscard]] double sum() const;
};

// Evaluates the estimator at every cell center and renormalizes the grid to sum to one.
// Needs at least two samples.
[[nodiscard]] KdeGrid kde_density(const std::vector<Vec2>& samples, const KdeConfig& cfg);

// sum_i P(i) ln(P(i) / Q'(i)) in nats with Q'(i) = Q(i), or delta where Q(i) = 0. Cells with
// P(i) = 0 contribute nothing. Identical inputs give exactly zero.
[[nodiscard]] double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, double delta = 1e-12);

// --- marginal KL -------------------------------------------------------------------

struct PairSpec {
    std::string anchor;
    std::string target;

    [[nodiscard]] std::string name() const;  // e.g. "plate2fork"
};

struct PairSamples {
    std::vector<Vec2> displacements;  // target - anchor for every instance pair
    int scenes{0};                    // scenes holding both categories
};

[[nodiscard]] PairSamples pair_displacements(const std::vector<ArrangementExample>& examples,
                                             const CategoryVocab& vocab, const PairSpec& pair);

struct MarginalKl {
    double nats{0.0};
    double scaled{0.0};  // nats x 100
    int reference_scenes{0};
    int generated_scenes{0};
    KdeGrid reference;
    KdeGrid generated;
};

inline constexpr int kMinPairScenes = 5;

// KL(P || Q) with P the reference density and Q the generated one on a shared grid.
[[nodiscard]] MarginalKl marginal_kl(const std::vector<ArrangementExample>& generated,
                                     const std::vector<ArrangementExample>& reference, const CategoryVocab& vocab,
                                     const PairSpec& pair, const KdeConfig& cfg = {});

// --- reporting ---------------------------------------------------------------------

struct EvalRow {
    std::string domain;
    std::string metric;
    std::string pair;  // empty for coverage
    double value{0.0};
    int scenes{0};
};

void write_report_csv(std::ostream& out, const std::vector<EvalRow>& rows);
// Grid as `resolution` lines of comma-separated values, first line = lowest y.
void write_grid_csv(std::ostream& out, const KdeGrid& grid);
[[nodiscard]] KdeGrid read_grid_csv(const std::filesystem::path& path, double lo = -1.5, double hi = 1.5);

}  // namespace layoutprior
