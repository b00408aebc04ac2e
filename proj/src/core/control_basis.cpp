#include "core/control_basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "core/rng.hpp"

namespace pdedpc {

void ControlBasisConfig::validate() const {
    if (n_actuators <= 0) throw std::runtime_error("ControlBasisConfig: n_actuators must be > 0");
    if (static_cast<int>(mu.size()) != n_actuators)
        throw std::runtime_error("ControlBasisConfig: " + std::to_string(mu.size()) +
                                 " centers for " + std::to_string(n_actuators) + " actuators");
    if (!(sigma > 0.0)) throw std::runtime_error("ControlBasisConfig: sigma must be > 0");
    if (!(a_max > 0.0)) throw std::runtime_error("ControlBasisConfig: a_max must be > 0");
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(mu[i] > 0.0 && mu[i] < 1.0))
            throw std::runtime_error("ControlBasisConfig: center " + std::to_string(mu[i]) +
                                     " not strictly inside (0,1)");
        if (i > 0 && !(mu[i] > mu[i - 1]))
            throw std::runtime_error("ControlBasisConfig: centers must be sorted and distinct");
    }
}

Field assemble_control_field(std::span<const double> amps, const ControlBasisConfig& cfg,
                             const Grid1D& grid) {
    if (static_cast<int>(amps.size()) != cfg.n_actuators)
        throw std::runtime_error("assemble_control_field: " + std::to_string(amps.size()) +
                                 " amplitudes for " + std::to_string(cfg.n_actuators) +
                                 " actuators");
    const double inv2s2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    Field f(static_cast<std::size_t>(grid.n_x), 0.0);
    for (int a = 0; a < cfg.n_actuators; ++a) {
        const double amp = amps[static_cast<std::size_t>(a)];
        if (amp == 0.0) continue;
        const double mu = cfg.mu[static_cast<std::size_t>(a)];
        for (int i = 0; i < grid.n_x; ++i) {
            const double d = grid.x[static_cast<std::size_t>(i)] - mu;
            f[static_cast<std::size_t>(i)] += amp * std::exp(-d * d * inv2s2);
        }
    }
    return f;
}

std::vector<Amplitudes> generate_training_amplitudes(const ControlBasisConfig& cfg,
                                                     const ExcitationConfig& exc, int n_steps,
                                                     std::uint64_t seed) {
    if (n_steps < 1) throw std::runtime_error("generate_training_amplitudes: n_steps must be >= 1");
    cfg.validate();
    Rng rng(seed);
    const int n = cfg.n_actuators;
    std::vector<double> amp(static_cast<std::size_t>(n)), freq(static_cast<std::size_t>(n)),
        phase(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        amp[static_cast<std::size_t>(a)] =
            rng.uniform(exc.amp_frac_min, exc.amp_frac_max) * cfg.a_max;
        freq[static_cast<std::size_t>(a)] = rng.uniform(exc.freq_min, exc.freq_max);
        phase[static_cast<std::size_t>(a)] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    }
    const double noise_sd = exc.noise_frac * cfg.a_max;
    std::vector<Amplitudes> out(static_cast<std::size_t>(n_steps),
                                Amplitudes(static_cast<std::size_t>(n)));
    for (int k = 0; k < n_steps; ++k) {
        const double tau = static_cast<double>(k) / static_cast<double>(n_steps);
        for (int a = 0; a < n; ++a) {
            double v = amp[static_cast<std::size_t>(a)] *
                           std::sin(2.0 * 3.14159265358979323846 *
                                        freq[static_cast<std::size_t>(a)] * tau +
                                    phase[static_cast<std::size_t>(a)]) +
                       rng.normal(0.0, noise_sd);
            v = std::clamp(v, -cfg.a_max, cfg.a_max);
            out[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] = v;
        }
    }
    return out;
}

}  // namespace pdedpc
