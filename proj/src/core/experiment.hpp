#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/control_basis.hpp"
#include "core/grf.hpp"
#include "core/grid.hpp"
#include "core/pde.hpp"

namespace pdedpc {

enum class Activation { Tanh, Silu };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct OperatorConfig {
    int width = 128;
    int depth = 3;  // hidden layers per net
    int p = 64;     // latent basis count
    Activation activation = Activation::Tanh;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 128;
    int epochs = 100;
    int rollout_loss_steps = 1;
    bool curriculum = false;  // ramp rollout steps 1 -> rollout_loss_steps
};

enum class TargetSource { None, Grf, DatasetTerminal };
std::string to_string(TargetSource t);
TargetSource target_source_from_string(const std::string& s);

struct PolicyConfig {
    int width = 256;
    int depth = 3;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 32;  // scenarios per minibatch
    int epochs = 500;
    TargetSource target_source = TargetSource::None;
};

struct ConstraintSpec {
    enum class On { State, Control };
    enum class Sense { Upper, Lower };  // Upper: value <= bound, Lower: value >= bound
    On on = On::State;
    Sense sense = Sense::Upper;
    double bound = 0.0;
};

enum class StageCostKind { TerminalTracking, CurvatureIntegral };
std::string to_string(StageCostKind k);
StageCostKind stage_cost_kind_from_string(const std::string& s);

struct DpcLossConfig {
    StageCostKind kind = StageCostKind::TerminalTracking;
    double q_stage = 1.0;
    double q_terminal = 1.0;
    double q_state = 100.0;
    double q_control = 100.0;
    std::vector<ConstraintSpec> constraints;
};

struct EvalConfig {
    int n_eval = 50;
    int figures_limit = 8;
    // Gate thresholds enforced by `evaluate` (exit code 4 on a miss).
    double max_objective_ratio = 1.0;  // mean Controlled(FDM) / mean Natural(FDM)
    double max_transfer_gap = 1.0;     // |mean don - mean fdm| / mean fdm
};

struct SeedsConfig {
    std::uint64_t dataset = 1;
    std::uint64_t operator_train = 2;
    std::uint64_t policy = 3;
    std::uint64_t evaluation = 4;
};

struct DatasetGenConfig {
    int n_samples = 500;
    int stride = 10;  // dt_op = stride * dt
    bool taper_endpoints = false;
    bool periodic_projection = false;
};

struct ExperimentConfig {
    std::string name;
    PdeParams pde;
    double dx = 1e-2;
    GrfConfig grf_train;      // operator-training initial conditions
    GrfConfig grf_policy_ic;  // policy-training / evaluation initial conditions
    std::optional<GrfConfig> grf_target;
    ControlBasisConfig basis;
    ExcitationConfig excitation;
    DatasetGenConfig dataset;
    OperatorConfig op;
    PolicyConfig policy;
    DpcLossConfig loss;
    EvalConfig eval;
    SeedsConfig seeds;
    std::string output_dir = "out";

    Grid1D grid() const { return make_grid(pde, dx); }
    double dt_op() const { return pde.dt * dataset.stride; }
    int n_op_steps() const { return pde.n_steps() / dataset.stride; }

    void validate() const;
    // Identity hash over the physics: pde, grid, GRFs, basis, excitation and
    // dataset layout. Training knobs (epochs, widths) are free to vary.
    std::string hash() const;

    static ExperimentConfig load(const std::string& path);
    std::string to_json_string() const;
};

}  // namespace pdedpc
