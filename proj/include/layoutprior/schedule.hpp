#pragma once

namespace layoutprior {

// Variance-exploding noise schedule: sigma(t) = sigma_min * (sigma_max / sigma_min)^t.
struct NoiseSchedule {
    double sigma_min{0.01};
    double sigma_max{50.0};

    void validate() const;
    // Throws NumericalError for t outside [0, 1].
    [[nodiscard]] double sigma(double t) const;
    // d sigma / dt = sigma(t) * ln(sigma_max / sigma_min)
    [[nodiscard]] double sigma_dot(double t) const;

    friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;
};

}  // namespace layoutprior
