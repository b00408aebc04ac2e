#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/experiment.hpp"
#include "core/mlp.hpp"
#include "core/operator_model.hpp"
#include "core/tensor.hpp"

namespace pdedpc {

// SiLU MLP policy with tanh output projection: outputs are strictly inside
// (-a_max, a_max) by construction.
struct PolicyModel {
    Mlp net;
    double a_max = 1.0;
    int state_dim = 0;
    int target_dim = 0;  // 0 when the experiment has no target input
    std::string config_hash;

    int n_actuators() const { return net.output_dim(); }
};

PolicyModel make_policy_model(const ExperimentConfig& cfg, const Grid1D& grid,
                              std::uint64_t seed);

struct LiftedPolicy {
    LiftedMlp net;
};

LiftedPolicy lift_policy(ad::Tape& tape, const PolicyModel& model, bool trainable);

// u: [B, state_dim]; target: [B, target_dim] when the policy takes one.
ad::Tensor policy_forward(const PolicyModel& model, const LiftedPolicy& lifted,
                          const ad::Tensor& u, const std::optional<ad::Tensor>& target);

// No-tape single evaluation (shared kernels; bitwise equal to the tape path).
Amplitudes policy_eval(const PolicyModel& model, const Field& u, const Field* target);

struct DpcRollout {
    std::vector<ad::Tensor> states;  // n_steps + 1, each [B, n_x]
    std::vector<ad::Tensor> amps;    // n_steps, each [B, n_actuators]
};

// Closed-loop rollout through the (frozen) operator; everything stays on the
// tape so dpc_loss can be backpropagated to the policy parameters.
DpcRollout dpc_rollout(const PolicyModel& policy, const LiftedPolicy& lifted_policy,
                       const OperatorModel& op, const LiftedOperator& lifted_op,
                       const ad::Tensor& u0, const std::optional<ad::Tensor>& target,
                       int n_steps, double dt_op);

// Second-difference matrix (1/dx^2 scaling); periodic wraparound or zero
// rows at closed boundaries.
std::vector<double> second_difference_matrix(int n_x, double dx, bool periodic);

// integral (u_xx)^2 dx by second differences and rectangle quadrature.
double curvature_energy(const Field& u, double dx, bool periodic);

struct DpcLossGeometry {
    double dx = 0.0;
    double dt_op = 0.0;
    int n_x = 0;
    bool periodic = false;
};

ad::Tensor dpc_loss(ad::Tape& tape, const DpcRollout& rollout,
                    const std::optional<ad::Tensor>& target, const DpcLossConfig& cfg,
                    const DpcLossGeometry& geom);

struct PolicyTrainCurvePoint {
    int epoch = 0;
    double loss = 0.0;
    double best = 0.0;  // best-so-far, nonincreasing
};

struct PolicyTrainResult {
    PolicyModel model;
    std::vector<PolicyTrainCurvePoint> curve;
    bool aborted_non_finite = false;
};

// Algorithm-2-style offline training: fresh (u0, target) scenarios sampled
// every epoch; the operator is read-only throughout. target_corpus is
// required for TargetSource::DatasetTerminal and ignored otherwise.
PolicyTrainResult train_policy(const OperatorModel& op, const ExperimentConfig& cfg,
                               const DatasetReader* target_corpus, int epochs,
                               std::uint64_t seed);

// Terminal fields of the train-split trajectories (target candidates).
std::vector<Field> dataset_terminal_fields(const DatasetReader& data);

void save_policy_checkpoint(const std::string& path, const PolicyModel& model);
PolicyModel load_policy_checkpoint(const std::string& path);

}  // namespace pdedpc
