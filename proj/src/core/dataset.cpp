#include "core/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include <json.hpp>

#include "core/rng.hpp"
#include "core/util.hpp"
#include "core/version.hpp"

namespace pdedpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kTrajMagic[8] = {'P', 'D', 'P', 'C', 'T', 'R', 'J', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

TransitionBatch to_transitions(const Trajectory& traj, int stride) {
    const int n_t = static_cast<int>(traj.amps.size());
    if (stride < 1 || stride > n_t)
        throw std::runtime_error("to_transitions: stride " + std::to_string(stride) +
                                 " out of range for trajectory of " + std::to_string(n_t) +
                                 " steps");
    TransitionBatch batch;
    batch.dt_op = traj.pde.dt * stride;
    for (int k = 0; k + stride <= n_t; k += stride) {
        batch.u_now.push_back(traj.fields[static_cast<std::size_t>(k)]);
        batch.u_next.push_back(traj.fields[static_cast<std::size_t>(k + stride)]);
        batch.amps.push_back(traj.amps[static_cast<std::size_t>(k)]);
    }
    return batch;
}

std::string trajectory_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "traj_%06d.bin", index);
    return buf;
}

void write_trajectory_file(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::uint32_t n_x = traj.fields.empty() ? 0 : static_cast<std::uint32_t>(traj.fields[0].size());
    const std::uint32_t n_t = static_cast<std::uint32_t>(traj.amps.size());
    const std::uint32_t n_act = traj.amps.empty() ? 0 : static_cast<std::uint32_t>(traj.amps[0].size());
    out.write(kTrajMagic, sizeof kTrajMagic);
    write_u32(out, static_cast<std::uint32_t>(kFormatVersion));
    write_u32(out, n_x);
    write_u32(out, n_t);
    write_u32(out, n_act);
    write_u64(out, traj.seed);
    for (const Field& f : traj.fields)
        out.write(reinterpret_cast<const char*>(f.data()),
                  static_cast<std::streamsize>(f.size() * sizeof(double)));
    for (const Amplitudes& a : traj.amps)
        out.write(reinterpret_cast<const char*>(a.data()),
                  static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to '" + path + "'");
}

Trajectory read_trajectory_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trajectory file '" + path + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kTrajMagic, sizeof magic) != 0)
        throw std::runtime_error("'" + path + "' is not a trajectory file");
    const std::uint32_t version = read_u32(in);
    if (version != static_cast<std::uint32_t>(kFormatVersion))
        throw std::runtime_error("'" + path + "': unsupported format version " +
                                 std::to_string(version));
    const std::uint32_t n_x = read_u32(in);
    const std::uint32_t n_t = read_u32(in);
    const std::uint32_t n_act = read_u32(in);
    Trajectory traj;
    traj.seed = read_u64(in);
    traj.fields.assign(n_t + 1, Field(n_x));
    for (Field& f : traj.fields)
        in.read(reinterpret_cast<char*>(f.data()),
                static_cast<std::streamsize>(f.size() * sizeof(double)));
    traj.amps.assign(n_t, Amplitudes(n_act));
    for (Amplitudes& a : traj.amps)
        in.read(reinterpret_cast<char*>(a.data()),
                static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!in) throw std::runtime_error("'" + path + "': truncated trajectory record");
    return traj;
}

DatasetManifest generate_dataset(const ExperimentConfig& cfg, int n_samples, std::uint64_t seed,
                                 const std::string& out_dir, int threads) {
    if (n_samples < 0) throw std::runtime_error("generate_dataset: n_samples must be >= 0");
    cfg.validate();
    const Grid1D grid = cfg.grid();
    const GrfSampler sampler(cfg.grf_train, grid);
    const int n_fine = cfg.pde.n_steps();
    const int n_ctrl = n_fine / cfg.dataset.stride;

    fs::create_directories(out_dir);

    std::mutex mu;
    std::vector<int> failed;
    std::vector<std::string> errors;

    parallel_for(n_samples, threads, [&](int i) {
        const std::uint64_t sample_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        try {
            Field u0 = sampler.sample(derive_seed(sample_seed, 0));
            if (cfg.dataset.taper_endpoints) taper_endpoints(u0, grid);
            const auto ctrl = generate_training_amplitudes(cfg.basis, cfg.excitation, n_ctrl,
                                                           derive_seed(sample_seed, 1));
            std::vector<Amplitudes> fine(static_cast<std::size_t>(n_fine));
            for (int k = 0; k < n_fine; ++k)
                fine[static_cast<std::size_t>(k)] =
                    ctrl[static_cast<std::size_t>(k / cfg.dataset.stride)];
            Trajectory traj = rollout_fdm(u0, fine, cfg.pde, cfg.basis, grid);
            traj.seed = sample_seed;
            write_trajectory_file((fs::path(out_dir) / trajectory_filename(i)).string(), traj);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(mu);
            failed.push_back(i);
            errors.emplace_back("sample " + std::to_string(i) + ": " + e.what());
        }
    });

    std::sort(failed.begin(), failed.end());
    if (static_cast<double>(failed.size()) > 0.01 * static_cast<double>(n_samples)) {
        std::string msg = "generate_dataset: " + std::to_string(failed.size()) + " of " +
                          std::to_string(n_samples) + " samples failed";
        for (std::size_t i = 0; i < std::min<std::size_t>(errors.size(), 3); ++i)
            msg += "\n  " + errors[i];
        throw std::runtime_error(msg);
    }

    DatasetManifest m;
    m.format_version = kFormatVersion;
    m.tool_version = kToolVersion;
    m.config_hash = cfg.hash();
    m.name = cfg.name;
    m.n_samples = n_samples;
    m.master_seed = seed;
    m.n_x = grid.n_x;
    m.n_t = n_fine;
    m.n_actuators = cfg.basis.n_actuators;
    m.stride = cfg.dataset.stride;
    m.dt = cfg.pde.dt;
    m.failed_indices = failed;

    json j;
    j["format_version"] = m.format_version;
    j["tool_version"] = m.tool_version;
    j["config_hash"] = m.config_hash;
    j["name"] = m.name;
    j["n_samples"] = m.n_samples;
    j["master_seed"] = m.master_seed;
    j["n_x"] = m.n_x;
    j["n_t"] = m.n_t;
    j["n_actuators"] = m.n_actuators;
    j["stride"] = m.stride;
    j["dt"] = m.dt;
    j["failed_indices"] = m.failed_indices;
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in '" + out_dir + "'");
    out << j.dump(2) << "\n";
    return m;
}

DatasetReader::DatasetReader(const std::string& dir) : dir_(dir) {
    const fs::path mpath = fs::path(dir) / "manifest.json";
    std::ifstream in(mpath);
    if (!in) throw std::runtime_error("no dataset manifest at '" + mpath.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("manifest '" + mpath.string() + "' unreadable: " + e.what());
    }
    manifest_.format_version = j.at("format_version").get<int>();
    manifest_.tool_version = j.at("tool_version").get<std::string>();
    manifest_.config_hash = j.at("config_hash").get<std::string>();
    manifest_.name = j.at("name").get<std::string>();
    manifest_.n_samples = j.at("n_samples").get<int>();
    manifest_.master_seed = j.at("master_seed").get<std::uint64_t>();
    manifest_.n_x = j.at("n_x").get<int>();
    manifest_.n_t = j.at("n_t").get<int>();
    manifest_.n_actuators = j.at("n_actuators").get<int>();
    manifest_.stride = j.at("stride").get<int>();
    manifest_.dt = j.at("dt").get<double>();
    manifest_.failed_indices = j.at("failed_indices").get<std::vector<int>>();
}

bool DatasetReader::failed(int index) const {
    return std::binary_search(manifest_.failed_indices.begin(), manifest_.failed_indices.end(),
                              index);
}

Trajectory DatasetReader::load(int index) const {
    if (index < 0 || index >= manifest_.n_samples)
        throw std::runtime_error("DatasetReader: index " + std::to_string(index) +
                                 " out of range");
    if (failed(index))
        throw std::runtime_error("DatasetReader: sample " + std::to_string(index) +
                                 " failed during generation");
    Trajectory traj =
        read_trajectory_file((fs::path(dir_) / trajectory_filename(index)).string());
    traj.pde.dt = manifest_.dt;
    return traj;
}

}  // namespace pdedpc
