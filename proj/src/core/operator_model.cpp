#include "core/operator_model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "core/checkpoint.hpp"
#include "core/integrator.hpp"
#include "core/kernels.hpp"
#include "core/version.hpp"

namespace pdedpc {

OperatorModel make_operator_model(const ExperimentConfig& cfg, const Grid1D& grid,
                                  std::uint64_t seed) {
    Rng rng(seed);
    OperatorModel m;
    m.p = cfg.op.p;
    m.state_branch = make_mlp(grid.n_x, cfg.op.width, cfg.op.depth, cfg.op.p,
                              cfg.op.activation, rng);
    m.control_branch = make_mlp(cfg.basis.n_actuators, cfg.op.width, cfg.op.depth, cfg.op.p,
                                cfg.op.activation, rng);
    m.trunk = make_mlp(1, cfg.op.width, cfg.op.depth, cfg.op.p, cfg.op.activation, rng);
    m.grid_x = grid.x;
    m.dt_op = cfg.dt_op();
    m.config_hash = cfg.hash();
    m.norm.state_mean.assign(static_cast<std::size_t>(grid.n_x), 0.0);
    m.norm.state_std.assign(static_cast<std::size_t>(grid.n_x), 1.0);
    m.norm.amp_scale = cfg.basis.a_max;
    return m;
}

std::vector<double> trunk_matrix(const OperatorModel& model) {
    return mlp_eval(model.trunk, model.grid_x, model.n_x());
}

namespace {

void normalization_vectors(const Normalization& norm, std::vector<double>& scale,
                           std::vector<double>& shift) {
    const std::size_t n = norm.state_mean.size();
    scale.resize(n);
    shift.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        scale[i] = 1.0 / norm.state_std[i];
        shift[i] = -norm.state_mean[i] / norm.state_std[i];
    }
}

}  // namespace

LiftedOperator lift_operator(ad::Tape& tape, const OperatorModel& model, bool trainable,
                             const std::vector<double>* cached_trunk) {
    LiftedOperator lifted;
    lifted.state_branch = lift_mlp(tape, model.state_branch, trainable);
    lifted.control_branch = lift_mlp(tape, model.control_branch, trainable);
    if (cached_trunk != nullptr && !trainable) {
        lifted.trunk_out = tape.leaf(ad::Shape{model.n_x(), model.p}, *cached_trunk, false);
    } else {
        lifted.trunk = lift_mlp(tape, model.trunk, trainable);
        const ad::Tensor coords = tape.leaf(ad::Shape{model.n_x(), 1}, model.grid_x, false);
        lifted.trunk_out = mlp_apply(model.trunk, lifted.trunk, coords);
    }
    normalization_vectors(model.norm, lifted.norm_scale, lifted.norm_shift);
    return lifted;
}

ad::Tensor operator_forward(const OperatorModel& model, const LiftedOperator& lifted,
                            const ad::Tensor& u, const ad::Tensor& amps) {
    using namespace ad;
    const Tensor un = row_affine(u, lifted.norm_scale, lifted.norm_shift);
    const Tensor bu = mlp_apply(model.state_branch, lifted.state_branch, un);
    const Tensor an = scale(amps, 1.0 / model.norm.amp_scale);
    const Tensor ba = mlp_apply(model.control_branch, lifted.control_branch, an);
    const Tensor prod = mul(bu, ba);
    return matmul(prod, transpose(lifted.trunk_out));
}

ad::Tensor operator_rk4_step(const OperatorModel& model, const LiftedOperator& lifted,
                             const ad::Tensor& u, const ad::Tensor& amps, double dt_op) {
    if (!(dt_op > 0.0)) throw std::runtime_error("operator_rk4_step: dt_op must be > 0");
    return rk4_step_tape(
        [&](const ad::Tensor& state) { return operator_forward(model, lifted, state, amps); }, u,
        dt_op);
}

OperatorEvalCache make_eval_cache(const OperatorModel& model) {
    OperatorEvalCache cache;
    const std::vector<double> t = trunk_matrix(model);
    const int n_x = model.n_x();
    cache.trunk_t.resize(static_cast<std::size_t>(model.p) * n_x);
    for (int i = 0; i < n_x; ++i)
        for (int j = 0; j < model.p; ++j)
            cache.trunk_t[static_cast<std::size_t>(j) * n_x + i] =
                t[static_cast<std::size_t>(i) * model.p + j];
    normalization_vectors(model.norm, cache.norm_scale, cache.norm_shift);
    return cache;
}

void operator_derivative(const OperatorModel& model, const OperatorEvalCache& cache,
                         std::span<const double> u, std::span<const double> amps, int rows,
                         std::vector<double>& out) {
    const int n_x = model.n_x();
    const int n_act = model.n_actuators();
    std::vector<double> un(static_cast<std::size_t>(rows) * n_x);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < n_x; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * n_x + c;
            un[i] = u[i] * cache.norm_scale[static_cast<std::size_t>(c)] +
                    cache.norm_shift[static_cast<std::size_t>(c)];
        }
    const std::vector<double> bu = mlp_eval(model.state_branch, un, rows);
    std::vector<double> an(amps.begin(), amps.end());
    const double inv_amp = 1.0 / model.norm.amp_scale;
    for (auto& v : an) v = v * inv_amp;
    const std::vector<double> ba = mlp_eval(model.control_branch, an, rows);
    std::vector<double> prod(bu.size());
    for (std::size_t i = 0; i < bu.size(); ++i) prod[i] = bu[i] * ba[i];
    out.assign(static_cast<std::size_t>(rows) * n_x, 0.0);
    kernels::gemm_acc_nn(out.data(), prod.data(), cache.trunk_t.data(), rows, model.p, n_x);
    (void)n_act;
}

void operator_rk4_step_batch(const OperatorModel& model, const OperatorEvalCache& cache,
                             std::vector<double>& u, std::span<const double> amps, int rows,
                             double dt_op) {
    std::vector<double> next;
    rk4_step_plain(
        [&](const std::vector<double>& state, std::vector<double>& dudt) {
            operator_derivative(model, cache, state, amps, rows, dudt);
        },
        u, dt_op, next);
    u.swap(next);
}

Field operator_forward_single(const OperatorModel& model, const Field& u, const Amplitudes& amps) {
    const OperatorEvalCache cache = make_eval_cache(model);
    std::vector<double> out;
    operator_derivative(model, cache, u, amps, 1, out);
    return out;
}

std::vector<Field> operator_rollout(const OperatorModel& model, const Field& u0,
                                    const std::vector<Amplitudes>& amps) {
    if (static_cast<int>(u0.size()) != model.n_x())
        throw std::runtime_error("operator_rollout: state size mismatch");
    const OperatorEvalCache cache = make_eval_cache(model);
    std::vector<Field> fields;
    fields.reserve(amps.size() + 1);
    fields.push_back(u0);
    std::vector<double> u = u0;
    for (std::size_t k = 0; k < amps.size(); ++k) {
        try {
            operator_rk4_step_batch(model, cache, u, amps[k], 1, model.dt_op);
        } catch (const std::exception& e) {
            throw std::runtime_error("operator_rollout: step " + std::to_string(k) + ": " +
                                     e.what());
        }
        fields.push_back(u);
    }
    return fields;
}

double relative_l2(const std::vector<Field>& pred, const std::vector<Field>& truth) {
    if (pred.size() != truth.size())
        throw std::runtime_error("relative_l2: trajectory lengths differ");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k].size() != truth[k].size())
            throw std::runtime_error("relative_l2: field sizes differ at step " +
                                     std::to_string(k));
        for (std::size_t i = 0; i < pred[k].size(); ++i) {
            const double d = pred[k][i] - truth[k][i];
            num += d * d;
            den += truth[k][i] * truth[k][i];
        }
    }
    if (den == 0.0) throw std::runtime_error("relative_l2: reference trajectory is all zeros");
    return std::sqrt(num / den);
}

bool is_test_sample(int index) {
    return derive_seed(0x5eedca11u, static_cast<std::uint64_t>(index)) % 5 == 0;
}

namespace {

// Stride-sampled (operator-rate) view of one trajectory.
struct OpRateTraj {
    std::vector<double> fields;  // (n_op+1) x n_x
    std::vector<double> amps;    // n_op x n_act
};

OpRateTraj op_rate_view(const Trajectory& traj, int stride, int n_x, int n_act) {
    const int n_fine = static_cast<int>(traj.amps.size());
    const int n_op = n_fine / stride;
    OpRateTraj v;
    v.fields.resize(static_cast<std::size_t>(n_op + 1) * n_x);
    v.amps.resize(static_cast<std::size_t>(n_op) * n_act);
    for (int k = 0; k <= n_op; ++k)
        std::copy(traj.fields[static_cast<std::size_t>(k) * stride].begin(),
                  traj.fields[static_cast<std::size_t>(k) * stride].end(),
                  v.fields.begin() + static_cast<std::ptrdiff_t>(k) * n_x);
    for (int k = 0; k < n_op; ++k)
        std::copy(traj.amps[static_cast<std::size_t>(k) * stride].begin(),
                  traj.amps[static_cast<std::size_t>(k) * stride].end(),
                  v.amps.begin() + static_cast<std::ptrdiff_t>(k) * n_act);
    return v;
}

Normalization compute_normalization(const std::vector<OpRateTraj>& train, int n_x,
                                    double amp_scale) {
    Normalization norm;
    norm.amp_scale = amp_scale;
    norm.state_mean.assign(static_cast<std::size_t>(n_x), 0.0);
    norm.state_std.assign(static_cast<std::size_t>(n_x), 1.0);
    std::vector<double> sum(static_cast<std::size_t>(n_x), 0.0);
    std::vector<double> sumsq(static_cast<std::size_t>(n_x), 0.0);
    std::size_t count = 0;
    for (const OpRateTraj& t : train) {
        const std::size_t rows = t.fields.size() / static_cast<std::size_t>(n_x);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* f = t.fields.data() + r * static_cast<std::size_t>(n_x);
            for (int i = 0; i < n_x; ++i) {
                sum[static_cast<std::size_t>(i)] += f[i];
                sumsq[static_cast<std::size_t>(i)] += f[i] * f[i];
            }
            ++count;
        }
    }
    if (count == 0) return norm;
    double max_std = 0.0;
    for (int i = 0; i < n_x; ++i) {
        const double mean = sum[static_cast<std::size_t>(i)] / static_cast<double>(count);
        const double var =
            std::max(0.0, sumsq[static_cast<std::size_t>(i)] / static_cast<double>(count) -
                              mean * mean);
        norm.state_mean[static_cast<std::size_t>(i)] = mean;
        norm.state_std[static_cast<std::size_t>(i)] = std::sqrt(var);
        max_std = std::max(max_std, norm.state_std[static_cast<std::size_t>(i)]);
    }
    // A relative floor keeps pinned points (e.g. Dirichlet boundaries, whose
    // sample std is exactly zero) from blowing up when a rollout drifts there.
    const double floor = std::max(1e-12, 0.05 * max_std);
    for (auto& s : norm.state_std) s = std::max(s, floor);
    return norm;
}

struct Window {
    int traj = 0;
    int start = 0;
};

std::vector<double> flatten_operator_params(const OperatorModel& m) {
    std::vector<double> flat;
    flat.reserve(param_count(m.state_branch) + param_count(m.control_branch) +
                 param_count(m.trunk));
    append_params(m.state_branch, flat);
    append_params(m.control_branch, flat);
    append_params(m.trunk, flat);
    return flat;
}

void unflatten_operator_params(OperatorModel& m, std::span<const double> flat) {
    std::size_t offset = 0;
    read_params(m.state_branch, flat, offset);
    read_params(m.control_branch, flat, offset);
    read_params(m.trunk, flat, offset);
    if (offset != flat.size())
        throw std::runtime_error("operator parameter blob has wrong length");
}

}  // namespace

OperatorTrainResult train_operator(const DatasetReader& data, const ExperimentConfig& cfg,
                                   int epochs, std::uint64_t seed) {
    const Grid1D grid = cfg.grid();
    const DatasetManifest& man = data.manifest();
    if (man.n_x != grid.n_x)
        throw std::runtime_error("train_operator: dataset n_x=" + std::to_string(man.n_x) +
                                 " does not match grid n_x=" + std::to_string(grid.n_x));
    if (man.stride != cfg.dataset.stride)
        throw std::runtime_error("train_operator: dataset stride " + std::to_string(man.stride) +
                                 " does not match config stride " +
                                 std::to_string(cfg.dataset.stride));
    const int n_x = grid.n_x;
    const int n_act = cfg.basis.n_actuators;
    const int n_op = man.n_t / man.stride;
    const double dt_op = cfg.dt_op();

    std::vector<OpRateTraj> train, test;
    for (int i = 0; i < man.n_samples; ++i) {
        if (data.failed(i)) continue;
        const Trajectory traj = data.load(i);
        OpRateTraj v = op_rate_view(traj, man.stride, n_x, n_act);
        (is_test_sample(i) ? test : train).push_back(std::move(v));
    }
    if (train.empty()) throw std::runtime_error("train_operator: no training samples");

    OperatorTrainResult result;
    result.model = make_operator_model(cfg, grid, seed);
    result.model.norm = compute_normalization(train, n_x, cfg.basis.a_max);
    OperatorModel& model = result.model;

    const int max_steps = std::min(cfg.op.rollout_loss_steps, n_op);
    Rng rng(derive_seed(seed, 0xba7c4));
    std::vector<double> flat_params = flatten_operator_params(model);
    AdamState adam(flat_params.size());
    std::vector<double> snapshot = flat_params;

    auto windows_for = [&](int steps) {
        std::vector<Window> ws;
        for (int t = 0; t < static_cast<int>(train.size()); ++t)
            for (int s = 0; s + steps <= n_op; ++s) ws.push_back({t, s});
        return ws;
    };

    auto test_one_step_loss = [&]() {
        if (test.empty()) return 0.0;
        const OperatorEvalCache cache = make_eval_cache(model);
        double acc = 0.0;
        std::size_t count = 0;
        std::vector<double> u, amps, pred;
        for (const OpRateTraj& t : test) {
            for (int k = 0; k < n_op; ++k) {
                u.assign(t.fields.begin() + static_cast<std::ptrdiff_t>(k) * n_x,
                         t.fields.begin() + static_cast<std::ptrdiff_t>(k + 1) * n_x);
                amps.assign(t.amps.begin() + static_cast<std::ptrdiff_t>(k) * n_act,
                            t.amps.begin() + static_cast<std::ptrdiff_t>(k + 1) * n_act);
                operator_rk4_step_batch(model, cache, u, amps, 1, dt_op);
                const double* truth = t.fields.data() + static_cast<std::size_t>(k + 1) * n_x;
                for (int i = 0; i < n_x; ++i) {
                    const double d = u[static_cast<std::size_t>(i)] - truth[i];
                    acc += d * d;
                }
                ++count;
            }
        }
        return acc / (static_cast<double>(count) * n_x);
    };

    for (int epoch = 0; epoch < epochs; ++epoch) {
        int steps = max_steps;
        if (cfg.op.curriculum && max_steps > 1) {
            const int phase = std::max(1, epochs / max_steps);
            steps = std::min(max_steps, 1 + epoch / phase);
        }
        std::vector<Window> windows = windows_for(steps);
        for (std::size_t i = windows.size(); i > 1; --i)
            std::swap(windows[i - 1], windows[rng.below(i)]);

        double epoch_loss = 0.0;
        int n_batches = 0;
        bool bad = false;
        for (std::size_t pos = 0; pos < windows.size(); pos += static_cast<std::size_t>(cfg.op.batch)) {
            const int b = static_cast<int>(
                std::min<std::size_t>(static_cast<std::size_t>(cfg.op.batch), windows.size() - pos));
            std::vector<double> u0(static_cast<std::size_t>(b) * n_x);
            std::vector<std::vector<double>> step_amps(static_cast<std::size_t>(steps)),
                step_truth(static_cast<std::size_t>(steps));
            for (int s = 0; s < steps; ++s) {
                step_amps[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(b) * n_act);
                step_truth[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(b) * n_x);
            }
            for (int r = 0; r < b; ++r) {
                const Window& w = windows[pos + static_cast<std::size_t>(r)];
                const OpRateTraj& t = train[static_cast<std::size_t>(w.traj)];
                std::copy(t.fields.begin() + static_cast<std::ptrdiff_t>(w.start) * n_x,
                          t.fields.begin() + static_cast<std::ptrdiff_t>(w.start + 1) * n_x,
                          u0.begin() + static_cast<std::ptrdiff_t>(r) * n_x);
                for (int s = 0; s < steps; ++s) {
                    std::copy(
                        t.amps.begin() + static_cast<std::ptrdiff_t>(w.start + s) * n_act,
                        t.amps.begin() + static_cast<std::ptrdiff_t>(w.start + s + 1) * n_act,
                        step_amps[static_cast<std::size_t>(s)].begin() +
                            static_cast<std::ptrdiff_t>(r) * n_act);
                    std::copy(
                        t.fields.begin() + static_cast<std::ptrdiff_t>(w.start + s + 1) * n_x,
                        t.fields.begin() + static_cast<std::ptrdiff_t>(w.start + s + 2) * n_x,
                        step_truth[static_cast<std::size_t>(s)].begin() +
                            static_cast<std::ptrdiff_t>(r) * n_x);
                }
            }

            ad::Tape tape;
            const LiftedOperator lifted = lift_operator(tape, model, true);
            ad::Tensor u = tape.leaf(ad::Shape{b, n_x}, std::move(u0), false);
            ad::Tensor total;
            for (int s = 0; s < steps; ++s) {
                const ad::Tensor amps =
                    tape.leaf(ad::Shape{b, n_act}, step_amps[static_cast<std::size_t>(s)], false);
                u = operator_rk4_step(model, lifted, u, amps, dt_op);
                const ad::Tensor truth =
                    tape.leaf(ad::Shape{b, n_x}, step_truth[static_cast<std::size_t>(s)], false);
                const ad::Tensor term = ad::sum_all(ad::square(ad::sub(u, truth)));
                total = total.valid() ? ad::add(total, term) : term;
            }
            const ad::Tensor loss =
                ad::scale(total, 1.0 / (static_cast<double>(b) * n_x * steps));
            const double loss_value = loss.value();
            if (!std::isfinite(loss_value)) {
                bad = true;
                break;
            }
            tape.backward(loss);

            std::vector<double> grads;
            grads.reserve(flat_params.size());
            append_grads(lifted.state_branch, grads);
            append_grads(lifted.control_branch, grads);
            append_grads(lifted.trunk, grads);
            adam_step(adam, flat_params, grads, cfg.op.lr, cfg.op.beta1, cfg.op.beta2,
                      cfg.op.eps);
            unflatten_operator_params(model, flat_params);
            epoch_loss += loss_value;
            ++n_batches;
        }

        if (bad) {
            // Roll back to the last finite epoch and stop.
            flat_params = snapshot;
            unflatten_operator_params(model, flat_params);
            result.aborted_non_finite = true;
            std::cerr << "train_operator: non-finite loss at epoch " << epoch
                      << ", keeping last stable parameters\n";
            break;
        }
        snapshot = flat_params;
        TrainCurvePoint pt;
        pt.epoch = epoch;
        pt.train_loss = n_batches > 0 ? epoch_loss / n_batches : 0.0;
        pt.test_loss = test_one_step_loss();
        pt.rollout_steps = steps;
        result.curve.push_back(pt);
    }

    if (test.empty()) {
        result.test_rel_l2 = std::numeric_limits<double>::quiet_NaN();
        return result;
    }
    double acc = 0.0;
    for (const OpRateTraj& t : test) {
        Field u0(t.fields.begin(), t.fields.begin() + n_x);
        std::vector<Amplitudes> amps(static_cast<std::size_t>(n_op));
        std::vector<Field> truth(static_cast<std::size_t>(n_op) + 1);
        for (int k = 0; k < n_op; ++k)
            amps[static_cast<std::size_t>(k)] =
                Amplitudes(t.amps.begin() + static_cast<std::ptrdiff_t>(k) * n_act,
                           t.amps.begin() + static_cast<std::ptrdiff_t>(k + 1) * n_act);
        for (int k = 0; k <= n_op; ++k)
            truth[static_cast<std::size_t>(k)] =
                Field(t.fields.begin() + static_cast<std::ptrdiff_t>(k) * n_x,
                      t.fields.begin() + static_cast<std::ptrdiff_t>(k + 1) * n_x);
        acc += relative_l2(operator_rollout(model, u0, amps), truth);
    }
    result.test_rel_l2 = acc / static_cast<double>(test.size());
    return result;
}

namespace {

nlohmann::json mlp_dims(const Mlp& net) {
    nlohmann::json dims = nlohmann::json::array();
    for (const DenseLayer& l : net.layers) dims.push_back({l.in, l.out});
    return dims;
}

Mlp mlp_from_dims(const nlohmann::json& dims, Activation act) {
    Mlp net;
    net.activation = act;
    for (const auto& d : dims) {
        DenseLayer layer;
        layer.in = d.at(0).get<int>();
        layer.out = d.at(1).get<int>();
        layer.w.assign(static_cast<std::size_t>(layer.in) * layer.out, 0.0);
        layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace

void save_operator_checkpoint(const std::string& path, const OperatorModel& model) {
    nlohmann::json header;
    header["kind"] = "operator";
    header["tool_version"] = kToolVersion;
    header["format_version"] = kFormatVersion;
    header["config_hash"] = model.config_hash;
    header["p"] = model.p;
    header["activation"] = to_string(model.state_branch.activation);
    header["dt_op"] = model.dt_op;
    header["amp_scale"] = model.norm.amp_scale;
    header["grid_x"] = model.grid_x;
    header["state_mean"] = model.norm.state_mean;
    header["state_std"] = model.norm.state_std;
    header["nets"]["state_branch"] = mlp_dims(model.state_branch);
    header["nets"]["control_branch"] = mlp_dims(model.control_branch);
    header["nets"]["trunk"] = mlp_dims(model.trunk);
    const std::vector<double> flat = flatten_operator_params(model);
    header["param_count"] = flat.size();
    save_checkpoint(path, header, flat);
}

OperatorModel load_operator_checkpoint(const std::string& path) {
    auto [header, blob] = load_checkpoint(path);
    if (header.at("kind").get<std::string>() != "operator")
        throw std::runtime_error("'" + path + "' is not an operator checkpoint");
    OperatorModel m;
    const Activation act = activation_from_string(header.at("activation").get<std::string>());
    m.p = header.at("p").get<int>();
    m.dt_op = header.at("dt_op").get<double>();
    m.config_hash = header.at("config_hash").get<std::string>();
    m.grid_x = header.at("grid_x").get<std::vector<double>>();
    m.norm.state_mean = header.at("state_mean").get<std::vector<double>>();
    m.norm.state_std = header.at("state_std").get<std::vector<double>>();
    m.norm.amp_scale = header.at("amp_scale").get<double>();
    m.state_branch = mlp_from_dims(header.at("nets").at("state_branch"), act);
    m.control_branch = mlp_from_dims(header.at("nets").at("control_branch"), act);
    m.trunk = mlp_from_dims(header.at("nets").at("trunk"), act);
    unflatten_operator_params(m, blob);
    return m;
}

}  // namespace pdedpc
