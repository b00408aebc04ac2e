#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/experiment.hpp"
#include "core/pde.hpp"

namespace pdedpc {

struct TransitionBatch {
    std::vector<Field> u_now;
    std::vector<Amplitudes> amps;  // one held vector per transition
    std::vector<Field> u_next;
    double dt_op = 0.0;

    std::size_t size() const { return u_now.size(); }
};

// Non-overlapping stride windows: (fields[k], amps held over [k, k+stride),
// fields[k+stride]) for k = 0, stride, 2*stride, ...
TransitionBatch to_transitions(const Trajectory& traj, int stride);

struct DatasetManifest {
    int format_version = 0;
    std::string tool_version;
    std::string config_hash;
    std::string name;
    int n_samples = 0;
    std::uint64_t master_seed = 0;
    int n_x = 0;
    int n_t = 0;
    int n_actuators = 0;
    int stride = 1;
    double dt = 0.0;
    std::vector<int> failed_indices;
};

std::string trajectory_filename(int index);
void write_trajectory_file(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_file(const std::string& path);

// Rolls out n_samples trajectories (GRF initial conditions, perturbed-sinusoid
// excitation held over each control period) and persists them under out_dir.
// Aborts without a manifest if more than 1% of the samples fail.
DatasetManifest generate_dataset(const ExperimentConfig& cfg, int n_samples, std::uint64_t seed,
                                 const std::string& out_dir, int threads = 1);

class DatasetReader {
public:
    explicit DatasetReader(const std::string& dir);

    const DatasetManifest& manifest() const { return manifest_; }
    const std::string& dir() const { return dir_; }
    Trajectory load(int index) const;
    bool failed(int index) const;

private:
    std::string dir_;
    DatasetManifest manifest_;
};

}  // namespace pdedpc
