#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/grid.hpp"

namespace pdedpc {

// Distribution constants of the perturbed-sinusoid excitation signals used
// for operator-training data. Fractions are relative to a_max.
struct ExcitationConfig {
    double amp_frac_min = 0.3;
    double amp_frac_max = 1.0;
    double freq_min = 0.5;  // cycles per horizon
    double freq_max = 3.0;
    double noise_frac = 0.05;
};

struct ControlBasisConfig {
    int n_actuators = 0;
    std::vector<double> mu;  // centers, strictly inside (0,1), sorted
    double sigma = 0.1;      // spatial spread
    double a_max = 1.0;      // hard amplitude bound

    void validate() const;
};

// f(x) = sum_i amps[i] * exp(-(x - mu_i)^2 / (2 sigma^2))
Field assemble_control_field(std::span<const double> amps, const ControlBasisConfig& cfg,
                             const Grid1D& grid);

// Per-actuator perturbed sinusoids, clipped to [-a_max, a_max]. n_steps is
// the number of control instants across one horizon.
std::vector<Amplitudes> generate_training_amplitudes(const ControlBasisConfig& cfg,
                                                     const ExcitationConfig& exc, int n_steps,
                                                     std::uint64_t seed);

}  // namespace pdedpc
