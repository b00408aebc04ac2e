#pragma once

#include <stdexcept>
#include <vector>

namespace pdedpc {

// Uniform grid on [0,1]. Closed grids include both endpoints; periodic grids
// drop the duplicate right endpoint so that x[n-1] + dx wraps to x[0].
struct Grid1D {
    int n_x = 0;
    double dx = 0.0;
    bool periodic = false;
    std::vector<double> x;

    static Grid1D closed(int n_points) {
        if (n_points < 2) throw std::runtime_error("Grid1D: need at least 2 points");
        Grid1D g;
        g.n_x = n_points;
        g.dx = 1.0 / static_cast<double>(n_points - 1);
        g.periodic = false;
        g.x.resize(static_cast<std::size_t>(n_points));
        for (int i = 0; i < n_points; ++i) g.x[static_cast<std::size_t>(i)] = i * g.dx;
        g.x.back() = 1.0;
        return g;
    }

    static Grid1D periodic_unit(int n_points) {
        if (n_points < 2) throw std::runtime_error("Grid1D: need at least 2 points");
        Grid1D g;
        g.n_x = n_points;
        g.dx = 1.0 / static_cast<double>(n_points);
        g.periodic = true;
        g.x.resize(static_cast<std::size_t>(n_points));
        for (int i = 0; i < n_points; ++i) g.x[static_cast<std::size_t>(i)] = i * g.dx;
        return g;
    }
};

using Field = std::vector<double>;
using Amplitudes = std::vector<double>;

}  // namespace pdedpc
