#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "layoutprior/core.hpp"
#include "layoutprior/schedule.hpp"
#include "layoutprior/scorenet.hpp"
#include "layoutprior/util.hpp"

namespace layoutprior {

// --- forward process ------------------------------------------------------------

// P(t) = P(0) + sigma(t) z
[[nodiscard]] Matrix perturb(const Matrix& clean, double t, const Matrix& noise, const NoiseSchedule& schedule);

// --- denoising score matching -----------------------------------------------------

enum class LossWeight {
    sigma_squared,  // lambda(t) = sigma(t)^2
    unit,           // lambda(t) = 1
};

struct TrainConfig {
    double learning_rate{2e-4};
    int batch_size{16};
    double beta1{0.9};
    double beta2{0.999};
    double adam_eps{1e-8};
    double t_floor{1e-3};  // t ~ U(t_floor, 1)
    int steps{1000};
    std::uint64_t seed{0};
    LossWeight loss_weight{LossWeight::sigma_squared};
    // Exponential moving average of the weights; 0 disables it. When enabled, the returned
    // and checkpointed parameters are the averaged ones. See ema_decay_at for the warmup.
    double ema_decay{0.999};
    int checkpoint_every{0};  // 0 = only at the end
    std::filesystem::path checkpoint_path;

    void validate() const;
};

// One DSM draw: per-scene t ~ U(t_floor, 1), per-node z ~ N(0, I).
struct DsmDraw {
    GraphBatch batch;      // holds the perturbed positions P(t)
    Matrix clean;          // P(0), M x 2
    Matrix noise;          // z, M x 2
    std::vector<double> sigma;   // per scene
    std::vector<double> weight;  // lambda(t) per scene
};

[[nodiscard]] DsmDraw draw_dsm_batch(const std::vector<const ArrangementExample*>& examples, Rng& rng,
                                     const TrainConfig& cfg, const NoiseSchedule& schedule);

// Regression target (P(0) - P(t)) / sigma(t)^2 for every node.
[[nodiscard]] Matrix dsm_target(const DsmDraw& draw);

// mean over scenes of lambda(t) * || scores - target ||^2. Writes d loss / d scores when asked.
[[nodiscard]] double dsm_objective(const Matrix& scores, const DsmDraw& draw, Matrix* d_scores = nullptr);

// Full objective with exact parameter gradients (params' gradient slots are overwritten).
// Throws NumericalError naming the offending t when the loss is not finite.
double dsm_loss(ScoreNetParams& params, const std::vector<const ArrangementExample*>& examples, Rng& rng,
                const TrainConfig& cfg);

class Adam {
public:
    Adam(const ScoreNetParams& params, double lr, double beta1, double beta2, double eps);
    void step(ScoreNetParams& params);
    [[nodiscard]] long steps_taken() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_{0};
    std::vector<Matrix> m_, v_;
};

struct LossRecord {
    int step{0};
    double loss{0.0};
};

struct TrainResult {
    ScoreNetParams params;
    std::vector<LossRecord> losses;
    bool diverged{false};
    std::string message;
};

// Seeded shuffling, Adam updates, optional periodic checkpoints. On divergence training stops,
// the last finite parameters are kept (and checkpointed if a path is set) and diverged is set.
// Decay used after optimizer step `step` (0-based): min(decay, (1 + step) / (10 + step)), so early
// averages are not dominated by the initialization.
[[nodiscard]] double ema_decay_at(double decay, int step);

[[nodiscard]] TrainResult train(const Dataset& dataset, const ScoreNetConfig& net_config, const TrainConfig& cfg,
                                const std::function<void(const LossRecord&)>& on_step = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& losses);

// --- ODE integration -----------------------------------------------------------------

using VectorField = std::function<void(double t, const Vector& x, Vector& dxdt)>;

struct Rk45Options {
    double atol{1e-5};
    double rtol{1e-5};
    double h_min{1e-6};
    double h_max{0.0};  // 0 = |t_end - t_start|
    long max_rejected{1000000};
};

struct Rk45Stats {
    long accepted{0};
    long rejected{0};
    long evaluations{0};
};

// Adaptive Dormand-Prince 5(4) with FSAL, PI step-size control (safety 0.9) and step
// rejection whenever the scaled error norm exceeds 1. Integrates in either time direction.
[[nodiscard]] Vector rk45_integrate(const VectorField& field, const Vector& x0, double t_start, double t_end,
                                    const Rk45Options& opts = {}, Rk45Stats* stats = nullptr);

// --- sampling ----------------------------------------------------------------------------

enum class SamplerMethod { rk45, euler };

struct SamplerConfig {
    SamplerMethod method{SamplerMethod::rk45};
    double atol{1e-5};
    double rtol{1e-5};
    int euler_steps{500};
    double t_end{1e-3};  // shared with TrainConfig::t_floor
    std::uint64_t seed{0};
    // Scenes are integrated jointly in chunks of this many (0 = one joint system). Chunks run
    // in parallel; scene i always draws its prior from stream (seed, i).
    int chunk{0};

    void validate() const;
};

// dP/dt = -sigma(t) sigma'(t) score(P, t | C)
[[nodiscard]] VectorField pf_ode_field(const ScoreNetParams& params,
                                       const std::vector<std::vector<ObjectCondition>>& scenes);

// Draws P(1) ~ N(0, sigma_max^2 I) per scene, integrates the probability-flow ODE from t = 1 to
// t_end and returns canonically ordered examples (conditions permuted alongside positions).
[[nodiscard]] std::vector<ArrangementExample> sample_many(const ScoreNetParams& params,
                                                          const std::vector<std::vector<ObjectCondition>>& scenes,
                                                          const SamplerConfig& cfg, Rk45Stats* stats = nullptr);

[[nodiscard]] ArrangementExample sample(const ScoreNetParams& params, const std::vector<ObjectCondition>& conditions,
                                        const SamplerConfig& cfg);

}  // namespace layoutprior
