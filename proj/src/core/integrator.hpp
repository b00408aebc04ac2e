#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace pdedpc {

// Classical RK4 with the control held constant across the four stages. The
// tape and plain-array versions use the same expression structure so their
// results are bitwise identical for identical derivative evaluations.

template <class G>  // G: Tensor -> Tensor (derivative at the held control)
ad::Tensor rk4_step_tape(G&& g, const ad::Tensor& u, double dt) {
    using namespace ad;
    const Tensor k1 = g(u);
    const Tensor u2 = add(u, scale(k1, 0.5 * dt));
    const Tensor k2 = g(u2);
    const Tensor u3 = add(u, scale(k2, 0.5 * dt));
    const Tensor k3 = g(u3);
    const Tensor u4 = add(u, scale(k3, dt));
    const Tensor k4 = g(u4);
    const Tensor s = add(add(k1, scale(k2, 2.0)), add(scale(k3, 2.0), k4));
    const Tensor out = add(u, scale(s, dt / 6.0));
    if (!all_finite(out.values()))
        throw std::runtime_error("rk4_step: non-finite state after stage combination");
    return out;
}

template <class G>  // G: (const std::vector<double>& u, std::vector<double>& dudt)
void rk4_step_plain(G&& g, const std::vector<double>& u, double dt, std::vector<double>& out) {
    const std::size_t n = u.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);
    g(u, k1);
    for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + k1[i] * (0.5 * dt);
    g(stage, k2);
    for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + k2[i] * (0.5 * dt);
    g(stage, k3);
    for (std::size_t i = 0; i < n; ++i) stage[i] = u[i] + k3[i] * dt;
    g(stage, k4);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = (k1[i] + k2[i] * 2.0) + (k3[i] * 2.0 + k4[i]);
        out[i] = u[i] + s * (dt / 6.0);
    }
    for (double v : out)
        if (!std::isfinite(v))
            throw std::runtime_error("rk4_step: non-finite state after stage combination");
}

}  // namespace pdedpc
