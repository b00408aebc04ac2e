#include "core/pde.hpp"

#include <cmath>
#include <stdexcept>

#include "core/tridiag.hpp"

namespace pdedpc {

std::string to_string(PdeKind kind) {
    switch (kind) {
        case PdeKind::Heat: return "heat";
        case PdeKind::Burgers: return "burgers";
        case PdeKind::FisherKpp: return "fisher_kpp";
    }
    return "?";
}

PdeKind pde_kind_from_string(const std::string& s) {
    if (s == "heat") return PdeKind::Heat;
    if (s == "burgers") return PdeKind::Burgers;
    if (s == "fisher_kpp") return PdeKind::FisherKpp;
    throw std::runtime_error("unknown pde kind '" + s + "'");
}

int PdeParams::n_steps() const {
    const double steps = t_final / dt;
    const int n = static_cast<int>(std::llround(steps));
    if (std::abs(steps - n) > 1e-9 * steps || n <= 0)
        throw std::runtime_error("PdeParams: horizon T=" + std::to_string(t_final) +
                                 " is not an integer multiple of dt=" + std::to_string(dt));
    return n;
}

void PdeParams::validate() const {
    if (!(dt > 0.0) || !(t_final > 0.0))
        throw std::runtime_error("PdeParams: dt and T must be > 0");
    (void)n_steps();
    const bool ok = (kind == PdeKind::Heat && bc == BoundaryKind::Dirichlet0) ||
                    (kind == PdeKind::Burgers && bc == BoundaryKind::Periodic) ||
                    (kind == PdeKind::FisherKpp && bc == BoundaryKind::Neumann0);
    if (!ok)
        throw std::runtime_error("PdeParams: unsupported (kind, bc) combination for " +
                                 to_string(kind));
}

Grid1D make_grid(const PdeParams& p, double dx) {
    const int cells = static_cast<int>(std::llround(1.0 / dx));
    if (std::abs(1.0 / dx - cells) > 1e-9)
        throw std::runtime_error("make_grid: 1/dx must be integral");
    return p.bc == BoundaryKind::Periodic ? Grid1D::periodic_unit(cells) : Grid1D::closed(cells + 1);
}

namespace {

void check_size(const Field& u, const Grid1D& grid, const char* who) {
    if (static_cast<int>(u.size()) != grid.n_x)
        throw std::runtime_error(std::string(who) + ": field size " + std::to_string(u.size()) +
                                 " does not match grid n_x=" + std::to_string(grid.n_x));
}

void check_finite(const Field& u, const char* who) {
    for (double v : u)
        if (!std::isfinite(v)) throw std::runtime_error(std::string(who) + ": non-finite state");
}

}  // namespace

Field heat_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid) {
    check_size(u, grid, "heat_step");
    check_size(f, grid, "heat_step");
    const int n = grid.n_x;
    const double lam = p.alpha * p.dt / (grid.dx * grid.dx);

    std::vector<double> lower(static_cast<std::size_t>(n - 1), -0.5 * lam);
    std::vector<double> diag(static_cast<std::size_t>(n), 1.0 + lam);
    std::vector<double> upper(static_cast<std::size_t>(n - 1), -0.5 * lam);
    std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);

    for (int i = 1; i < n - 1; ++i)
        rhs[static_cast<std::size_t>(i)] =
            0.5 * lam * u[static_cast<std::size_t>(i - 1)] +
            (1.0 - lam) * u[static_cast<std::size_t>(i)] +
            0.5 * lam * u[static_cast<std::size_t>(i + 1)] + p.dt * f[static_cast<std::size_t>(i)];

    // Dirichlet rows pin the boundary values to zero.
    diag[0] = 1.0;
    upper[0] = 0.0;
    rhs[0] = 0.0;
    diag[static_cast<std::size_t>(n - 1)] = 1.0;
    lower[static_cast<std::size_t>(n - 2)] = 0.0;
    rhs[static_cast<std::size_t>(n - 1)] = 0.0;

    Field out = solve_tridiagonal(lower, diag, upper, rhs);
    check_finite(out, "heat_step");
    return out;
}

Field burgers_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid) {
    check_size(u, grid, "burgers_step");
    check_size(f, grid, "burgers_step");
    const int n = grid.n_x;
    const double dt_dx = p.dt / grid.dx;

    double umax = 0.0;
    for (double v : u) umax = std::max(umax, std::abs(v));
    if (umax * dt_dx > 1.0 + 1e-12)
        throw std::runtime_error("burgers_step: CFL violated, max|u|=" + std::to_string(umax) +
                                 " gives max|u|*dt/dx=" + std::to_string(umax * dt_dx));

    Field out(static_cast<std::size_t>(n));
    if (p.conservative_burgers) {
        // Godunov flux for the u^2/2 conservation form.
        auto flux = [](double ul, double ur) {
            auto g = [](double v) { return 0.5 * v * v; };
            if (ul > ur) return (ul + ur > 0.0) ? g(ul) : g(ur);
            if (ul >= 0.0) return g(ul);
            if (ur <= 0.0) return g(ur);
            return 0.0;
        };
        for (int i = 0; i < n; ++i) {
            const int im = (i == 0) ? n - 1 : i - 1;
            const int ip = (i == n - 1) ? 0 : i + 1;
            const double fr = flux(u[static_cast<std::size_t>(i)], u[static_cast<std::size_t>(ip)]);
            const double fl = flux(u[static_cast<std::size_t>(im)], u[static_cast<std::size_t>(i)]);
            out[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] -
                                               dt_dx * (fr - fl) +
                                               p.dt * f[static_cast<std::size_t>(i)];
        }
    } else {
        // Non-conservative u*du/dx with the stencil picked by sign(u_i).
        for (int i = 0; i < n; ++i) {
            const int im = (i == 0) ? n - 1 : i - 1;
            const int ip = (i == n - 1) ? 0 : i + 1;
            const double ui = u[static_cast<std::size_t>(i)];
            const double grad = ui >= 0.0
                                    ? ui - u[static_cast<std::size_t>(im)]
                                    : u[static_cast<std::size_t>(ip)] - ui;
            out[static_cast<std::size_t>(i)] =
                ui - dt_dx * ui * grad + p.dt * f[static_cast<std::size_t>(i)];
        }
    }
    check_finite(out, "burgers_step");
    return out;
}

Field fisher_kpp_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid) {
    check_size(u, grid, "fisher_kpp_step");
    check_size(f, grid, "fisher_kpp_step");
    const int n = grid.n_x;
    const double c = p.alpha / (grid.dx * grid.dx);

    // Residual of backward Euler: R(v) = v - u - dt*(alpha*D2 v + r v(1-v) - f),
    // with Neumann mirroring in D2 at both ends.
    auto residual = [&](const Field& v, Field& res) {
        for (int i = 0; i < n; ++i) {
            double d2;
            if (i == 0)
                d2 = 2.0 * (v[1] - v[0]) * c;
            else if (i == n - 1)
                d2 = 2.0 * (v[static_cast<std::size_t>(n - 2)] -
                            v[static_cast<std::size_t>(n - 1)]) *
                     c;
            else
                d2 = (v[static_cast<std::size_t>(i - 1)] - 2.0 * v[static_cast<std::size_t>(i)] +
                      v[static_cast<std::size_t>(i + 1)]) *
                     c;
            const double vi = v[static_cast<std::size_t>(i)];
            res[static_cast<std::size_t>(i)] =
                vi - u[static_cast<std::size_t>(i)] -
                p.dt * (d2 + p.r * vi * (1.0 - vi) - f[static_cast<std::size_t>(i)]);
        }
    };

    Field v = u;  // continuation from the previous step
    Field res(static_cast<std::size_t>(n));
    std::vector<double> lower(static_cast<std::size_t>(n - 1)), diag(static_cast<std::size_t>(n)),
        upper(static_cast<std::size_t>(n - 1));

    double rnorm = 0.0;
    for (int iter = 0; iter < 50; ++iter) {
        residual(v, res);
        rnorm = 0.0;
        for (double x : res) rnorm = std::max(rnorm, std::abs(x));
        if (rnorm < 1e-10) {
            check_finite(v, "fisher_kpp_step");
            return v;
        }

        for (int i = 0; i < n - 1; ++i) {
            lower[static_cast<std::size_t>(i)] = -p.dt * c;
            upper[static_cast<std::size_t>(i)] = -p.dt * c;
        }
        upper[0] = -2.0 * p.dt * c;
        lower[static_cast<std::size_t>(n - 2)] = -2.0 * p.dt * c;
        for (int i = 0; i < n; ++i)
            diag[static_cast<std::size_t>(i)] =
                1.0 + 2.0 * p.dt * c - p.dt * p.r * (1.0 - 2.0 * v[static_cast<std::size_t>(i)]);

        const std::vector<double> delta = solve_tridiagonal(lower, diag, upper, res);
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] -= delta[static_cast<std::size_t>(i)];
    }
    throw std::runtime_error("fisher_kpp_step: Newton failed to converge, residual " +
                             std::to_string(rnorm));
}

Field pde_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid) {
    switch (p.kind) {
        case PdeKind::Heat: return heat_step(u, f, p, grid);
        case PdeKind::Burgers: return burgers_step(u, f, p, grid);
        case PdeKind::FisherKpp: return fisher_kpp_step(u, f, p, grid);
    }
    throw std::runtime_error("pde_step: unknown kind");
}

Trajectory rollout_fdm(const Field& u0, const std::vector<Amplitudes>& amps, const PdeParams& p,
                       const ControlBasisConfig& basis, const Grid1D& grid) {
    p.validate();
    const int n_steps = p.n_steps();
    if (static_cast<int>(amps.size()) != n_steps)
        throw std::runtime_error("rollout_fdm: amplitude sequence length " +
                                 std::to_string(amps.size()) + " != T/dt = " +
                                 std::to_string(n_steps));
    Trajectory traj;
    traj.pde = p;
    traj.fields.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.amps = amps;
    traj.fields.push_back(u0);
    Field u = u0;
    for (int k = 0; k < n_steps; ++k) {
        const Field f = assemble_control_field(amps[static_cast<std::size_t>(k)], basis, grid);
        try {
            u = pde_step(u, f, p, grid);
        } catch (const std::exception& e) {
            throw std::runtime_error("rollout_fdm: step " + std::to_string(k) + ": " + e.what());
        }
        traj.fields.push_back(u);
    }
    return traj;
}

}  // namespace pdedpc
