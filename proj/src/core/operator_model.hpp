#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/experiment.hpp"
#include "core/mlp.hpp"
#include "core/tensor.hpp"

namespace pdedpc {

struct Normalization {
    std::vector<double> state_mean;
    std::vector<double> state_std;
    double amp_scale = 1.0;
};

// Dual-branch TI-DeepONet: state branch (n_x -> p), control branch
// (n_actuators -> p), trunk (1 -> p) over the grid coordinates. The operator
// output at grid point i is the p-term inner product of the elementwise
// branch product with the trunk features, interpreted as du/dt.
struct OperatorModel {
    Mlp state_branch;
    Mlp control_branch;
    Mlp trunk;
    int p = 0;
    Normalization norm;
    std::vector<double> grid_x;
    double dt_op = 0.0;
    std::string config_hash;

    int n_x() const { return static_cast<int>(grid_x.size()); }
    int n_actuators() const { return control_branch.input_dim(); }
};

OperatorModel make_operator_model(const ExperimentConfig& cfg, const Grid1D& grid,
                                  std::uint64_t seed);

// Trunk features on the fixed grid, [n_x x p] (plain eval; reusable while the
// model is frozen).
std::vector<double> trunk_matrix(const OperatorModel& model);

struct LiftedOperator {
    LiftedMlp state_branch;
    LiftedMlp control_branch;
    LiftedMlp trunk;
    ad::Tensor trunk_out;  // [n_x, p]; constant when lifted frozen with a cache
    std::vector<double> norm_scale;
    std::vector<double> norm_shift;
};

// cached_trunk (optional, frozen models only) skips re-evaluating the trunk
// net on the tape; forward results are bitwise identical either way.
LiftedOperator lift_operator(ad::Tape& tape, const OperatorModel& model, bool trainable,
                             const std::vector<double>* cached_trunk = nullptr);

// du/dt prediction for a batch of states/amplitudes; differentiable w.r.t.
// all inputs and (when lifted trainable) the parameters.
ad::Tensor operator_forward(const OperatorModel& model, const LiftedOperator& lifted,
                            const ad::Tensor& u, const ad::Tensor& amps);

ad::Tensor operator_rk4_step(const OperatorModel& model, const LiftedOperator& lifted,
                             const ad::Tensor& u, const ad::Tensor& amps, double dt_op);

// No-tape path (shared kernels, bitwise identical to the tape path).
struct OperatorEvalCache {
    std::vector<double> trunk_t;  // [p x n_x], transposed trunk features
    std::vector<double> norm_scale;
    std::vector<double> norm_shift;
};

OperatorEvalCache make_eval_cache(const OperatorModel& model);
// u, amps: row-major batches; out: [rows x n_x]
void operator_derivative(const OperatorModel& model, const OperatorEvalCache& cache,
                         std::span<const double> u, std::span<const double> amps, int rows,
                         std::vector<double>& out);
void operator_rk4_step_batch(const OperatorModel& model, const OperatorEvalCache& cache,
                             std::vector<double>& u, std::span<const double> amps, int rows,
                             double dt_op);

Field operator_forward_single(const OperatorModel& model, const Field& u, const Amplitudes& amps);

// Autoregressive RK4 rollout; returns len(amps)+1 fields.
std::vector<Field> operator_rollout(const OperatorModel& model, const Field& u0,
                                    const std::vector<Amplitudes>& amps);

// ||pred - truth||_2 / ||truth||_2 over the flattened space-time tensor.
double relative_l2(const std::vector<Field>& pred, const std::vector<Field>& truth);

struct TrainCurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    int rollout_steps = 1;
};

struct OperatorTrainResult {
    OperatorModel model;
    std::vector<TrainCurvePoint> curve;
    // Mean held-out full-horizon rollout error; NaN when the test split is empty.
    double test_rel_l2 = 0.0;
    bool aborted_non_finite = false;
};

OperatorTrainResult train_operator(const DatasetReader& data, const ExperimentConfig& cfg,
                                   int epochs, std::uint64_t seed);

// True when the sample index lands in the held-out 20% split.
bool is_test_sample(int index);

void save_operator_checkpoint(const std::string& path, const OperatorModel& model);
OperatorModel load_operator_checkpoint(const std::string& path);

}  // namespace pdedpc
