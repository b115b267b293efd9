#include "layoutprior/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace layoutprior {

double layout_sq_distance(const Layout& a, const Layout& b) {
    if (a.size() != b.size()) throw DataError("layout distance: object counts differ");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double dx = a.positions[i].x - b.positions[i].x;
        const double dy = a.positions[i].y - b.positions[i].y;
        d += dx * dx + dy * dy;
    }
    return d;
}

namespace {

template <class Compatible>
double coverage_impl(std::size_t n_gen, std::size_t n_gt, Compatible&& compatible,
                     const std::function<double(std::size_t, std::size_t)>& dist) {
    double total = 0.0;
    for (std::size_t g = 0; g < n_gt; ++g) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n_gen; ++k) {
            if (compatible(k, g)) best = std::min(best, dist(k, g));
        }
        if (!std::isfinite(best)) {
            throw DataError("coverage: no condition-compatible generated layout for ground-truth layout " +
                            std::to_string(g));
        }
        total += best;
    }
    return total;
}

std::vector<int> labels_of(const ArrangementExample& ex) {
    std::vector<int> out;
    out.reserve(ex.conditions.size());
    for (const auto& c : ex.conditions) out.push_back(c.label);
    return out;
}

}  // namespace

double coverage_score(const std::vector<Layout>& generated, const std::vector<Layout>& ground_truth) {
    return coverage_impl(
        generated.size(), ground_truth.size(),
        [&](std::size_t k, std::size_t g) { return generated[k].size() == ground_truth[g].size(); },
        [&](std::size_t k, std::size_t g) { return layout_sq_distance(generated[k], ground_truth[g]); });
}

double coverage_score(const std::vector<ArrangementExample>& generated,
                      const std::vector<ArrangementExample>& ground_truth) {
    std::vector<std::vector<int>> gen_labels, gt_labels;
    for (const auto& e : generated) gen_labels.push_back(labels_of(e));
    for (const auto& e : ground_truth) gt_labels.push_back(labels_of(e));
    return coverage_impl(
        generated.size(), ground_truth.size(),
        [&](std::size_t k, std::size_t g) { return gen_labels[k] == gt_labels[g]; },
        [&](std::size_t k, std::size_t g) { return layout_sq_distance(generated[k].goal, ground_truth[g].goal); });
}

// --- KDE ---------------------------------------------------------------------------

void KdeConfig::validate() const {
    if (bandwidth_x < 0.0 || bandwidth_y < 0.0 || !(fallback_bandwidth > 0.0)) {
        throw UsageError("kde: bandwidths must be positive");
    }
    if (resolution < 8) throw UsageError("kde: grid resolution must be >= 8");
    if (!(window_hi > window_lo)) throw UsageError("kde: empty grid window");
    if (!(delta >= 0.0)) throw UsageError("kde: smoothing floor must be >= 0");
}

double kde_kernel(double u) noexcept {
    return std::exp(-0.5 * u * u) / (2.0 * std::numbers::pi);
}

double kde_evaluate(const std::vector<Vec2>& samples, Vec2 at, double hx, double hy) {
    if (samples.empty()) throw DataError("kde: no samples");
    if (!(hx > 0.0 && hy > 0.0)) throw UsageError("kde: bandwidths must be positive");
    double acc = 0.0;
    for (const auto& s : samples) acc += kde_kernel((at.x - s.x) / hx) * kde_kernel((at.y - s.y) / hy);
    return acc / (static_cast<double>(samples.size()) * hx * hy);
}

double scott_bandwidth(const std::vector<double>& values, double fallback) {
    const auto n = static_cast<double>(values.size());
    if (values.size() < 2) return fallback;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (n - 1.0));
    if (!(sd > 1e-12)) return fallback;
    return std::pow(n, -1.0 / 6.0) * sd;
}

Vec2 KdeGrid::cell_center(int ix, int iy) const {
    const double cell = (hi - lo) / resolution;
    return {lo + (ix + 0.5) * cell, lo + (iy + 0.5) * cell};
}

double KdeGrid::sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

KdeGrid kde_density(const std::vector<Vec2>& samples, const KdeConfig& cfg) {
    cfg.validate();
    if (samples.size() < 2) {
        throw DataError("kde: need at least 2 samples, got " + std::to_string(samples.size()));
    }
    std::vector<double> xs, ys;
    for (const auto& s : samples) {
        if (!is_finite(s)) throw DataError("kde: non-finite sample");
        xs.push_back(s.x);
        ys.push_back(s.y);
    }
    KdeGrid g;
    g.resolution = cfg.resolution;
    g.lo = cfg.window_lo;
    g.hi = cfg.window_hi;
    g.hx = cfg.bandwidth_x > 0.0 ? cfg.bandwidth_x : scott_bandwidth(xs, cfg.fallback_bandwidth);
    g.hy = cfg.bandwidth_y > 0.0 ? cfg.bandwidth_y : scott_bandwidth(ys, cfg.fallback_bandwidth);
    const int r = cfg.resolution;
    g.values.assign(static_cast<std::size_t>(r) * r, 0.0);
    // The estimator factorizes per axis, so tabulate kernel values once per axis.
    std::vector<double> kx(static_cast<std::size_t>(r) * samples.size());
    std::vector<double> ky(kx.size());
    for (int i = 0; i < r; ++i) {
        const Vec2 c = g.cell_center(i, i);
        for (std::size_t s = 0; s < samples.size(); ++s) {
            kx[i * samples.size() + s] = kde_kernel((c.x - samples[s].x) / g.hx);
            ky[i * samples.size() + s] = kde_kernel((c.y - samples[s].y) / g.hy);
        }
    }
    const double norm = 1.0 / (static_cast<double>(samples.size()) * g.hx * g.hy);
    for (int iy = 0; iy < r; ++iy) {
        for (int ix = 0; ix < r; ++ix) {
            double acc = 0.0;
            for (std::size_t s = 0; s < samples.size(); ++s) acc += kx[ix * samples.size() + s] * ky[iy * samples.size() + s];
            g.values[static_cast<std::size_t>(iy) * r + ix] = acc * norm;
        }
    }
    const double total = g.sum();
    if (!(total > 0.0)) throw NumericalError("kde: density vanishes on the grid window");
    for (double& v : g.values) v /= total;
    return g;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, double delta) {
    if (p.size() != q.size()) throw DataError("kl: distributions have different supports");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw DataError("kl: negative probability");
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / (q[i] > 0.0 ? q[i] : delta));
    }
    return kl;
}

// --- marginal KL ---------------------------------------------------------------------

std::string PairSpec::name() const { return anchor + "2" + target; }

PairSamples pair_displacements(const std::vector<ArrangementExample>& examples, const CategoryVocab& vocab,
                               const PairSpec& pair) {
    const int a = vocab.label_of(pair.anchor);
    const int b = vocab.label_of(pair.target);
    PairSamples out;
    for (const auto& ex : examples) {
        bool any = false;
        for (std::size_t i = 0; i < ex.conditions.size(); ++i) {
            if (ex.conditions[i].label != a) continue;
            for (std::size_t j = 0; j < ex.conditions.size(); ++j) {
                if (j == i || ex.conditions[j].label != b) continue;
                out.displacements.push_back(ex.goal.positions[j] - ex.goal.positions[i]);
                any = true;
            }
        }
        out.scenes += any ? 1 : 0;
    }
    return out;
}

MarginalKl marginal_kl(const std::vector<ArrangementExample>& generated,
                       const std::vector<ArrangementExample>& reference, const CategoryVocab& vocab,
                       const PairSpec& pair, const KdeConfig& cfg) {
    const PairSamples ref = pair_displacements(reference, vocab, pair);
    const PairSamples gen = pair_displacements(generated, vocab, pair);
    if (ref.scenes < kMinPairScenes || gen.scenes < kMinPairScenes) {
        throw DataError("marginal kl " + pair.name() + ": need >= " + std::to_string(kMinPairScenes) +
                        " scenes with both categories, reference has " + std::to_string(ref.scenes) +
                        ", generated has " + std::to_string(gen.scenes));
    }
    MarginalKl r;
    r.reference_scenes = ref.scenes;
    r.generated_scenes = gen.scenes;
    r.reference = kde_density(ref.displacements, cfg);
    r.generated = kde_density(gen.displacements, cfg);
    r.nats = kl_divergence(r.reference.values, r.generated.values, cfg.delta);
    r.scaled = 100.0 * r.nats;
    return r;
}

// --- reporting -------------------------------------------------------------------------

void write_report_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
    out << "domain,metric,pair,value,n_scenes\n";
    for (const auto& r : rows) {
        std::ostringstream v;
        v.precision(10);
        v << r.value;
        out << r.domain << ',' << r.metric << ',' << r.pair << ',' << v.str() << ',' << r.scenes << '\n';
    }
}

void write_grid_csv(std::ostream& out, const KdeGrid& grid) {
    std::ostringstream s;
    s.precision(17);
    for (int iy = 0; iy < grid.resolution; ++iy) {
        for (int ix = 0; ix < grid.resolution; ++ix) {
            if (ix) s << ',';
            s << grid.values[static_cast<std::size_t>(iy) * grid.resolution + ix];
        }
        s << '\n';
    }
    out << s.str();
}

KdeGrid read_grid_csv(const std::filesystem::path& path, double lo, double hi) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    KdeGrid g;
    g.lo = lo;
    g.hi = hi;
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        int cols = 0;
        while (std::getline(ls, cell, ',')) {
            // strtod rather than stod: far-tail cells are subnormal and stod rejects them as out of range.
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0') {
                throw DataError(path.string() + ":" + std::to_string(rows + 1) + ": not a number: '" + cell + "'");
            }
            g.values.push_back(v);
            ++cols;
        }
        if (rows == 0) g.resolution = cols;
        if (cols != g.resolution) throw DataError(path.string() + ":" + std::to_string(rows + 1) + ": ragged grid row");
        ++rows;
    }
    if (rows == 0 || rows != g.resolution) throw DataError(path.string() + ": grid is not square");
    return g;
}

}  // namespace layoutprior
