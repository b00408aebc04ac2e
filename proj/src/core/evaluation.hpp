#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/experiment.hpp"
#include "core/operator_model.hpp"
#include "core/policy.hpp"

namespace pdedpc {

// A plant advances the state over one control period under a held amplitude
// vector, returning the intermediate states (final included, start excluded).
class Plant {
public:
    virtual ~Plant() = default;
    virtual std::vector<Field> advance(const Field& u, const Amplitudes& amps) = 0;
    virtual double state_dt() const = 0;
};

class FdmPlant : public Plant {
public:
    FdmPlant(const PdeParams& pde, const ControlBasisConfig& basis, const Grid1D& grid,
             int substeps);
    std::vector<Field> advance(const Field& u, const Amplitudes& amps) override;
    double state_dt() const override { return pde_.dt; }

private:
    PdeParams pde_;
    ControlBasisConfig basis_;
    Grid1D grid_;
    int substeps_;
};

class OperatorPlant : public Plant {
public:
    explicit OperatorPlant(const OperatorModel& model);
    std::vector<Field> advance(const Field& u, const Amplitudes& amps) override;
    double state_dt() const override { return model_.dt_op; }

private:
    const OperatorModel& model_;
    OperatorEvalCache cache_;
};

struct Deployment {
    std::vector<Field> states;         // plant resolution, length n_substates*N + 1
    double state_dt = 0.0;
    std::vector<Amplitudes> amps;      // control rate, length N
    std::vector<Field> policy_inputs;  // the states the policy actually read
};

// Feedback loop: at each control instant the policy reads the plant state and
// emits amplitudes held until the next instant.
Deployment deploy_closed_loop(const PolicyModel& policy, Plant& plant, const Field& u0,
                              const Field* target, int n_control_steps);

// Table-1 semantics: the physical objective only, no penalty weights.
// Terminal tracking: dx-weighted squared L2 distance at the final state.
// Curvature: time integral of the curvature energy (left rectangle rule).
double objective_value(const std::vector<Field>& states, double state_dt, const Field* target,
                       StageCostKind kind, double dx, bool periodic);

struct ScenarioRecord {
    int index = 0;
    bool ok = false;
    std::string error;
    double natural_fdm = 0.0;
    double ctrl_tidon = 0.0;
    double ctrl_fdm = 0.0;
    double max_violation = 0.0;
    double runtime_s = 0.0;
};

struct ColumnStats {
    double mean = 0.0;
    double stddev = 0.0;
    double median = 0.0;
};

struct AcceptanceOutcome {
    double objective_ratio = 0.0;  // mean ctrl_fdm / mean natural_fdm
    double transfer_gap = 0.0;     // |mean ctrl_tidon - mean ctrl_fdm| / mean ctrl_fdm
    bool ratio_ok = false;
    bool transfer_ok = false;
    bool passed = false;
};

struct EvalReport {
    std::vector<ScenarioRecord> scenarios;
    ColumnStats natural_fdm;
    ColumnStats ctrl_tidon;
    ColumnStats ctrl_fdm;
    int n_complete = 0;
    std::string config_hash;
    AcceptanceOutcome acceptance;
};

ColumnStats column_stats(const std::vector<double>& values);

// Runs n_eval fresh scenarios (seeds disjoint from training), computes the
// three Table-1 columns and writes report.csv, summary.csv and figures/ under
// out_dir. target_corpus is needed only for dataset-terminal targets.
EvalReport build_comparison(const PolicyModel& policy, const OperatorModel& op,
                            const ExperimentConfig& cfg, const DatasetReader* target_corpus,
                            int n_eval, std::uint64_t seed, const std::string& out_dir,
                            int threads = 1);

}  // namespace pdedpc
