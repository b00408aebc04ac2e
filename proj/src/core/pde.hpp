#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/control_basis.hpp"
#include "core/grid.hpp"

namespace pdedpc {

enum class PdeKind { Heat, Burgers, FisherKpp };
enum class BoundaryKind { Dirichlet0, Periodic, Neumann0 };

std::string to_string(PdeKind kind);
PdeKind pde_kind_from_string(const std::string& s);

struct PdeParams {
    PdeKind kind = PdeKind::Heat;
    double alpha = 0.1;  // diffusivity (heat, Fisher-KPP)
    double r = 0.0;      // reaction rate (Fisher-KPP)
    BoundaryKind bc = BoundaryKind::Dirichlet0;
    double dt = 1e-3;
    double t_final = 0.4;
    // Godunov-flux form of the Burgers step; the default matches the
    // non-conservative u*du/dx discretization.
    bool conservative_burgers = false;

    int n_steps() const;
    void validate() const;
};

Grid1D make_grid(const PdeParams& p, double dx = 1e-2);

// One time step of each ground-truth scheme. f is the assembled control field.
Field heat_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid);
Field burgers_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid);
Field fisher_kpp_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid);
Field pde_step(const Field& u, const Field& f, const PdeParams& p, const Grid1D& grid);

struct GrfConfig;

struct Trajectory {
    std::vector<Field> fields;      // n_steps + 1
    std::vector<Amplitudes> amps;   // n_steps, at the solver rate
    PdeParams pde;
    std::uint64_t seed = 0;
};

// Rolls the FDM solver over the horizon; amps[k] is held over step k
// (callers supply piecewise-constant sequences for coarser control rates).
Trajectory rollout_fdm(const Field& u0, const std::vector<Amplitudes>& amps, const PdeParams& p,
                       const ControlBasisConfig& basis, const Grid1D& grid);

}  // namespace pdedpc
