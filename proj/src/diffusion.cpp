#include "layoutprior/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>

namespace layoutprior {

Matrix perturb(const Matrix& clean, double t, const Matrix& noise, const NoiseSchedule& schedule) {
    if (clean.rows() != noise.rows() || clean.cols() != noise.cols()) {
        throw DataError("perturb: noise shape does not match layout");
    }
    return clean + schedule.sigma(t) * noise;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
    if (batch_size < 1) throw UsageError("batch size must be >= 1");
    if (!(t_floor > 0.0 && t_floor < 0.1)) throw UsageError("t floor must lie in (0, 0.1)");
    if (steps < 0) throw UsageError("steps must be >= 0");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw UsageError("ema decay must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
        throw UsageError("invalid Adam hyper-parameters");
    }
}

// --- DSM ---------------------------------------------------------------------------

DsmDraw draw_dsm_batch(const std::vector<const ArrangementExample*>& examples, Rng& rng, const TrainConfig& cfg,
                       const NoiseSchedule& schedule) {
    if (examples.empty()) throw DataError("dsm: empty batch");
    DsmDraw d;
    std::size_t m = 0;
    for (const auto* ex : examples) m += ex->conditions.size();
    d.clean.resize(static_cast<Eigen::Index>(m), 2);
    d.noise.resize(static_cast<Eigen::Index>(m), 2);
    Eigen::Index row = 0;
    for (const auto* ex : examples) {
        const double t = uniform(rng, cfg.t_floor, 1.0);
        const double sigma = schedule.sigma(t);
        d.sigma.push_back(sigma);
        d.weight.push_back(cfg.loss_weight == LossWeight::sigma_squared ? sigma * sigma : 1.0);
        Layout noisy;
        for (std::size_t i = 0; i < ex->conditions.size(); ++i, ++row) {
            const Vec2 p = ex->goal.positions[i];
            d.clean(row, 0) = p.x;
            d.clean(row, 1) = p.y;
            d.noise(row, 0) = standard_normal(rng);
            d.noise(row, 1) = standard_normal(rng);
            noisy.positions.push_back({p.x + sigma * d.noise(row, 0), p.y + sigma * d.noise(row, 1)});
        }
        append_scene(d.batch, ex->conditions, noisy, t);
    }
    return d;
}

Matrix dsm_target(const DsmDraw& d) {
    Matrix target(d.clean.rows(), 2);
    for (std::size_t s = 0; s < d.sigma.size(); ++s) {
        const auto b = static_cast<Eigen::Index>(d.batch.offsets[s]);
        const auto n = static_cast<Eigen::Index>(d.batch.offsets[s + 1]) - b;
        const double s2 = d.sigma[s] * d.sigma[s];
        target.middleRows(b, n) = (d.clean.middleRows(b, n) - d.batch.positions.middleRows(b, n)) / s2;
    }
    return target;
}

double dsm_objective(const Matrix& scores, const DsmDraw& d, Matrix* d_scores) {
    if (scores.rows() != d.clean.rows() || scores.cols() != 2) throw DataError("dsm: score shape mismatch");
    const Matrix residual = scores - dsm_target(d);
    const auto scenes = static_cast<double>(d.sigma.size());
    double loss = 0.0;
    if (d_scores) d_scores->resize(scores.rows(), 2);
    for (std::size_t s = 0; s < d.sigma.size(); ++s) {
        const auto b = static_cast<Eigen::Index>(d.batch.offsets[s]);
        const auto n = static_cast<Eigen::Index>(d.batch.offsets[s + 1]) - b;
        const auto r = residual.middleRows(b, n);
        const double scene_loss = d.weight[s] * r.squaredNorm();
        if (!std::isfinite(scene_loss)) {
            throw NumericalError("dsm: non-finite loss at t = " + std::to_string(d.batch.times[s]));
        }
        loss += scene_loss / scenes;
        if (d_scores) d_scores->middleRows(b, n) = (2.0 * d.weight[s] / scenes) * r;
    }
    return loss;
}

double dsm_loss(ScoreNetParams& params, const std::vector<const ArrangementExample*>& examples, Rng& rng,
                const TrainConfig& cfg) {
    const DsmDraw draw = draw_dsm_batch(examples, rng, cfg, params.config().schedule);
    ForwardTape tape;
    Matrix scores;
    try {
        scores = forward(params, draw.batch, &tape);
    } catch (const NumericalError& e) {
        std::ostringstream ts;
        for (double t : draw.batch.times) ts << ' ' << t;
        throw NumericalError(std::string(e.what()) + " (t =" + ts.str() + ")");
    }
    Matrix d_scores;
    const double loss = dsm_objective(scores, draw, &d_scores);
    params.zero_grad();
    backward(params, draw.batch, tape, d_scores);
    return loss;
}

// --- Adam --------------------------------------------------------------------------

Adam::Adam(const ScoreNetParams& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& t : params.tensors()) {
        m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
        v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    }
}

void Adam::step(ScoreNetParams& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto& tensors = params.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const auto& g = tensors[k].grad;
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
        tensors[k].value.array() -=
            lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
    }
}

// --- training ------------------------------------------------------------------------

namespace {

// Fisher-Yates with our own uniform draws so the order does not depend on the standard library.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = std::min(i - 1, static_cast<std::size_t>(uniform(rng, 0.0, 1.0) * static_cast<double>(i)));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

double ema_decay_at(double decay, int step) {
    return std::min(decay, (1.0 + step) / (10.0 + step));
}

TrainResult train(const Dataset& dataset, const ScoreNetConfig& net_config, const TrainConfig& cfg,
                  const std::function<void(const LossRecord&)>& on_step) {
    cfg.validate();
    if (dataset.examples.empty()) throw DataError("train: dataset is empty");
    if (static_cast<std::size_t>(net_config.vocab_size) != dataset.vocab.size()) {
        throw DataError("train: network vocab size " + std::to_string(net_config.vocab_size) +
                        " does not match dataset vocab size " + std::to_string(dataset.vocab.size()));
    }
    for (const auto& ex : dataset.examples) validate(ex, dataset.vocab);

    TrainResult result{ScoreNetParams(net_config), {}, false, {}};
    ScoreNetParams& params = result.params;
    Adam adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    ScoreNetParams ema = params;
    ScoreNetParams last_good = params;

    Rng shuffle_rng = stream_rng(cfg.seed, 0);
    Rng noise_rng = stream_rng(cfg.seed, 1);
    std::vector<std::size_t> order(dataset.examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, shuffle_rng);
    std::size_t cursor = 0;

    auto published = [&]() -> const ScoreNetParams& { return cfg.ema_decay > 0.0 ? ema : params; };
    auto checkpoint = [&](const ScoreNetParams& p) {
        if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, p, dataset.vocab);
    };

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<const ArrangementExample*> batch;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                shuffle(order, shuffle_rng);
                cursor = 0;
            }
            batch.push_back(&dataset.examples[order[cursor++]]);
        }
        double loss = 0.0;
        try {
            loss = dsm_loss(params, batch, noise_rng, cfg);
            adam.step(params);
            if (!params.all_finite()) throw NumericalError("parameters became non-finite at step " + std::to_string(step));
        } catch (const NumericalError& e) {
            result.diverged = true;
            result.message = std::string("diverged at step ") + std::to_string(step) + ": " + e.what();
            params = last_good;
            if (cfg.ema_decay > 0.0) params = ema;
            checkpoint(params);
            return result;
        }
        last_good = params;
        if (cfg.ema_decay > 0.0) {
            const double decay = ema_decay_at(cfg.ema_decay, step);
            for (std::size_t k = 0; k < params.tensors().size(); ++k) {
                auto& e = ema.tensors()[k].value;
                e = decay * e + (1.0 - decay) * params.tensors()[k].value;
            }
        }
        const LossRecord rec{step, loss};
        result.losses.push_back(rec);
        if (on_step) on_step(rec);
        if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) checkpoint(published());
    }
    if (cfg.ema_decay > 0.0) params = ema;
    params.zero_grad();
    checkpoint(params);
    return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& losses) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << "step,loss\n";
    out.precision(17);
    for (const auto& r : losses) out << r.step << ',' << r.loss << '\n';
}

// --- Dormand-Prince 5(4) ---------------------------------------------------------------

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// 5th-order minus embedded 4th-order weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;                  // PI memory exponent
constexpr double kExpo1 = 0.2 - kBeta * 0.75;   // 0.17
constexpr double kMinShrink = 0.2;              // h_new >= h / 5 ... per step
constexpr double kMaxGrow = 10.0;               // h_new <= 10 h

double scaled_rms(const Vector& v, const Vector& scale) {
    return std::sqrt((v.array() / scale.array()).square().mean());
}

}  // namespace

Vector rk45_integrate(const VectorField& field, const Vector& x0, double t_start, double t_end,
                      const Rk45Options& opts, Rk45Stats* stats) {
    if (t_start == t_end) throw UsageError("rk45: t_start must differ from t_end");
    if (!(opts.atol > 0.0 && opts.rtol > 0.0)) throw UsageError("rk45: tolerances must be positive");
    if (!x0.allFinite()) throw NumericalError("rk45: non-finite initial state");
    const double span = std::abs(t_end - t_start);
    const double dir = t_end > t_start ? 1.0 : -1.0;
    const double h_max = opts.h_max > 0.0 ? std::min(opts.h_max, span) : span;
    const double h_min = std::min(opts.h_min, span);

    Rk45Stats st;
    const auto n = x0.size();
    Vector x = x0;
    Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y(n), err(n), scale(n);
    auto eval = [&](double t, const Vector& s, Vector& out) {
        field(t, s, out);
        ++st.evaluations;
    };

    double t = t_start;
    eval(t, x, k1);

    // Initial step guess (Hairer, Norsett & Wanner, II.4).
    double h;
    {
        scale = opts.atol + opts.rtol * x.array().abs();
        const double d0 = scaled_rms(x, scale);
        const double d1 = scaled_rms(k1, scale);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, h_max);
        y = x + dir * h0 * k1;
        eval(t + dir * h0, y, k2);
        const double d2 = scaled_rms(k2 - k1, scale) / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                     : std::pow(0.01 / std::max(d1, d2), 0.2);
        h = std::clamp(std::min(100.0 * h0, h1), h_min, h_max);
    }

    double err_old = 1e-4;
    bool last_rejected = false;
    while (dir * (t_end - t) > 0.0) {
        bool final_step = false;
        if (h >= std::abs(t_end - t)) {
            h = std::abs(t_end - t);
            final_step = true;
        }
        const double hs = dir * h;
        y = x + hs * (a21 * k1);
        eval(t + c2 * hs, y, k2);
        y = x + hs * (a31 * k1 + a32 * k2);
        eval(t + c3 * hs, y, k3);
        y = x + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        eval(t + c4 * hs, y, k4);
        y = x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        eval(t + c5 * hs, y, k5);
        y = x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        const double t_next = final_step ? t_end : t + hs;
        eval(t_next, y, k6);
        y = x + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        eval(t_next, y, k7);

        err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        scale = opts.atol + opts.rtol * x.array().abs().max(y.array().abs());
        double en = scaled_rms(err, scale);
        if (!std::isfinite(en) || !y.allFinite()) en = std::numeric_limits<double>::infinity();

        const double fac11 = std::pow(en, kExpo1);
        if (en <= 1.0) {
            double fac = fac11 / std::pow(err_old, kBeta) / kSafety;
            fac = std::clamp(fac, 1.0 / kMaxGrow, 1.0 / kMinShrink);
            double h_new = h / fac;
            if (last_rejected) h_new = std::min(h_new, h);
            err_old = std::max(en, 1e-4);
            x = y;
            k1 = k7;  // first-same-as-last
            t = t_next;
            ++st.accepted;
            last_rejected = false;
            h = std::clamp(h_new, h_min, h_max);
        } else {
            ++st.rejected;
            if (h <= h_min) {
                if (stats) *stats = st;
                throw NumericalError("rk45: step size underflow at t = " + std::to_string(t));
            }
            if (st.rejected > opts.max_rejected) {
                if (stats) *stats = st;
                throw NumericalError("rk45: more than " + std::to_string(opts.max_rejected) + " rejected steps");
            }
            h = std::max(h / std::min(1.0 / kMinShrink, fac11 / kSafety), h_min);
            last_rejected = true;
        }
    }
    if (stats) *stats = st;
    return x;
}

// --- sampling ------------------------------------------------------------------------

void SamplerConfig::validate() const {
    if (!(atol > 0.0 && rtol > 0.0)) throw UsageError("sampler tolerances must be positive");
    if (euler_steps < 1) throw UsageError("euler steps must be >= 1");
    if (!(t_end > 0.0 && t_end < 1.0)) throw UsageError("sampler terminal time must lie in (0, 1)");
    if (chunk < 0) throw UsageError("chunk must be >= 0");
}

VectorField pf_ode_field(const ScoreNetParams& params, const std::vector<std::vector<ObjectCondition>>& scenes) {
    GraphBatch base;
    for (const auto& c : scenes) {
        Layout zeros;
        zeros.positions.assign(c.size(), Vec2{});
        append_scene(base, c, zeros, 1.0);
    }
    return [&params, base](double t, const Vector& x, Vector& dxdt) {
        GraphBatch batch = base;
        std::fill(batch.times.begin(), batch.times.end(), t);
        batch.positions = Eigen::Map<const Matrix>(x.data(), x.size() / 2, 2);
        const auto& sched = params.config().schedule;
        const Matrix score = forward(params, batch);
        const double coeff = -sched.sigma(t) * sched.sigma_dot(t);
        dxdt.resize(x.size());
        Eigen::Map<Matrix>(dxdt.data(), x.size() / 2, 2) = coeff * score;
    };
}

namespace {

std::vector<Layout> integrate_chunk(const ScoreNetParams& params,
                                    const std::vector<std::vector<ObjectCondition>>& scenes, std::size_t first,
                                    std::size_t count, const SamplerConfig& cfg, Rk45Stats* stats) {
    std::vector<std::vector<ObjectCondition>> sub(scenes.begin() + static_cast<std::ptrdiff_t>(first),
                                                  scenes.begin() + static_cast<std::ptrdiff_t>(first + count));
    std::size_t m = 0;
    for (const auto& c : sub) m += c.size();
    Vector x(static_cast<Eigen::Index>(2 * m));
    const double sigma_max = params.config().schedule.sigma_max;
    Eigen::Index k = 0;
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng = stream_rng(cfg.seed, first + s);
        for (std::size_t i = 0; i < 2 * sub[s].size(); ++i) x[k++] = sigma_max * standard_normal(rng);
    }
    const auto field = pf_ode_field(params, sub);
    if (cfg.method == SamplerMethod::rk45) {
        Rk45Options opts;
        opts.atol = cfg.atol;
        opts.rtol = cfg.rtol;
        x = rk45_integrate(field, x, 1.0, cfg.t_end, opts, stats);
    } else {
        const double dt = (cfg.t_end - 1.0) / cfg.euler_steps;
        Vector dx;
        for (int i = 0; i < cfg.euler_steps; ++i) {
            field(1.0 + i * dt, x, dx);
            x += dt * dx;
        }
        if (stats) stats->evaluations += cfg.euler_steps;
    }
    if (!x.allFinite()) throw NumericalError("sampler produced non-finite positions");
    std::vector<Layout> out(count);
    k = 0;
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t i = 0; i < sub[s].size(); ++i, k += 2) out[s].positions.push_back({x[k], x[k + 1]});
    }
    return out;
}

}  // namespace

std::vector<ArrangementExample> sample_many(const ScoreNetParams& params,
                                            const std::vector<std::vector<ObjectCondition>>& scenes,
                                            const SamplerConfig& cfg, Rk45Stats* stats) {
    cfg.validate();
    for (const auto& c : scenes) {
        if (c.empty()) throw DataError("sample: scene without objects");
        for (const auto& o : c) {
            if (o.label < 0 || o.label >= params.config().vocab_size) {
                throw DataError("sample: label " + std::to_string(o.label) + " outside checkpoint vocab");
            }
        }
    }
    std::vector<ArrangementExample> out(scenes.size());
    if (scenes.empty()) return out;
    const std::size_t chunk = cfg.chunk == 0 ? scenes.size() : static_cast<std::size_t>(cfg.chunk);
    const std::size_t n_chunks = (scenes.size() + chunk - 1) / chunk;
    std::vector<Rk45Stats> chunk_stats(n_chunks);
    parallel_for(n_chunks, [&](std::size_t c) {
        const std::size_t first = c * chunk;
        const std::size_t count = std::min(chunk, scenes.size() - first);
        auto layouts = integrate_chunk(params, scenes, first, count, cfg, &chunk_stats[c]);
        for (std::size_t s = 0; s < count; ++s) {
            auto [conds, layout] = canonical_order(scenes[first + s], layouts[s]);
            out[first + s].conditions = std::move(conds);
            out[first + s].goal = std::move(layout);
        }
    });
    if (stats) {
        for (const auto& s : chunk_stats) {
            stats->accepted += s.accepted;
            stats->rejected += s.rejected;
            stats->evaluations += s.evaluations;
        }
    }
    return out;
}

ArrangementExample sample(const ScoreNetParams& params, const std::vector<ObjectCondition>& conditions,
                          const SamplerConfig& cfg) {
    return sample_many(params, {conditions}, cfg).front();
}

}  // namespace layoutprior
