#include "core/policy.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "core/checkpoint.hpp"
#include "core/kernels.hpp"
#include "core/version.hpp"

namespace pdedpc {

PolicyModel make_policy_model(const ExperimentConfig& cfg, const Grid1D& grid,
                              std::uint64_t seed) {
    Rng rng(seed);
    PolicyModel m;
    m.state_dim = grid.n_x;
    m.target_dim = cfg.policy.target_source == TargetSource::None ? 0 : grid.n_x;
    m.a_max = cfg.basis.a_max;
    m.net = make_mlp(m.state_dim + m.target_dim, cfg.policy.width, cfg.policy.depth,
                     cfg.basis.n_actuators, Activation::Silu, rng);
    m.config_hash = cfg.hash();
    return m;
}

LiftedPolicy lift_policy(ad::Tape& tape, const PolicyModel& model, bool trainable) {
    return LiftedPolicy{lift_mlp(tape, model.net, trainable)};
}

ad::Tensor policy_forward(const PolicyModel& model, const LiftedPolicy& lifted,
                          const ad::Tensor& u, const std::optional<ad::Tensor>& target) {
    if (static_cast<int>(u.cols()) != model.state_dim)
        throw std::runtime_error("policy_forward: state dim " + std::to_string(u.cols()) +
                                 " != " + std::to_string(model.state_dim));
    ad::Tensor z0 = u;
    if (model.target_dim > 0) {
        if (!target)
            throw std::runtime_error("policy_forward: this policy requires a target input");
        z0 = ad::concat_cols(u, *target);
    }
    const ad::Tensor out = mlp_apply(model.net, lifted.net, z0);
    return ad::scale(ad::tanh(out), model.a_max);
}

Amplitudes policy_eval(const PolicyModel& model, const Field& u, const Field* target) {
    std::vector<double> z0;
    if (model.target_dim > 0) {
        if (target == nullptr)
            throw std::runtime_error("policy_eval: this policy requires a target input");
        z0.reserve(u.size() + target->size());
        z0.insert(z0.end(), u.begin(), u.end());
        z0.insert(z0.end(), target->begin(), target->end());
    } else {
        z0 = u;
    }
    std::vector<double> out = mlp_eval(model.net, z0, 1);
    for (auto& v : out) v = std::tanh(v) * model.a_max;
    return out;
}

DpcRollout dpc_rollout(const PolicyModel& policy, const LiftedPolicy& lifted_policy,
                       const OperatorModel& op, const LiftedOperator& lifted_op,
                       const ad::Tensor& u0, const std::optional<ad::Tensor>& target,
                       int n_steps, double dt_op) {
    if (n_steps < 0) throw std::runtime_error("dpc_rollout: negative horizon");
    DpcRollout roll;
    roll.states.push_back(u0);
    ad::Tensor u = u0;
    for (int k = 0; k < n_steps; ++k) {
        const ad::Tensor amps = policy_forward(policy, lifted_policy, u, target);
        try {
            u = operator_rk4_step(op, lifted_op, u, amps, dt_op);
        } catch (const std::exception& e) {
            throw std::runtime_error("dpc_rollout: step " + std::to_string(k) + ": " + e.what());
        }
        roll.amps.push_back(amps);
        roll.states.push_back(u);
    }
    return roll;
}

std::vector<double> second_difference_matrix(int n_x, double dx, bool periodic) {
    std::vector<double> d2(static_cast<std::size_t>(n_x) * n_x, 0.0);
    const double c = 1.0 / (dx * dx);
    for (int i = 0; i < n_x; ++i) {
        if (!periodic && (i == 0 || i == n_x - 1)) continue;  // one-sided rows stay zero
        const int im = (i == 0) ? n_x - 1 : i - 1;
        const int ip = (i == n_x - 1) ? 0 : i + 1;
        d2[static_cast<std::size_t>(i) * n_x + im] += c;
        d2[static_cast<std::size_t>(i) * n_x + i] -= 2.0 * c;
        d2[static_cast<std::size_t>(i) * n_x + ip] += c;
    }
    return d2;
}

double curvature_energy(const Field& u, double dx, bool periodic) {
    const int n = static_cast<int>(u.size());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!periodic && (i == 0 || i == n - 1)) continue;
        const int im = (i == 0) ? n - 1 : i - 1;
        const int ip = (i == n - 1) ? 0 : i + 1;
        const double d2 = (u[static_cast<std::size_t>(im)] - 2.0 * u[static_cast<std::size_t>(i)] +
                           u[static_cast<std::size_t>(ip)]) /
                          (dx * dx);
        acc += d2 * d2;
    }
    return acc * dx;
}

ad::Tensor dpc_loss(ad::Tape& tape, const DpcRollout& rollout,
                    const std::optional<ad::Tensor>& target, const DpcLossConfig& cfg,
                    const DpcLossGeometry& geom) {
    using namespace ad;
    const int n_steps = static_cast<int>(rollout.amps.size());
    if (n_steps == 0) throw std::runtime_error("dpc_loss: empty rollout");
    const int batch = rollout.states.front().rows();

    Tensor total;
    auto accumulate = [&](const Tensor& term) {
        total = total.valid() ? add(total, term) : term;
    };

    if (cfg.kind == StageCostKind::CurvatureIntegral) {
        const Tensor d2 = tape.leaf(Shape{geom.n_x, geom.n_x},
                                    second_difference_matrix(geom.n_x, geom.dx, geom.periodic),
                                    false);
        Tensor stage;
        for (int k = 0; k < n_steps; ++k) {
            const Tensor c = matmul(rollout.states[static_cast<std::size_t>(k)], d2);
            const Tensor e = sum_all(square(c));
            stage = stage.valid() ? add(stage, e) : e;
        }
        accumulate(scale(stage, cfg.q_stage * geom.dx * geom.dt_op));
    } else {
        if (!target) throw std::runtime_error("dpc_loss: terminal tracking requires a target");
        const Tensor diff = sub(rollout.states.back(), *target);
        accumulate(scale(sum_all(square(diff)), cfg.q_terminal * geom.dx));
    }

    for (const ConstraintSpec& spec : cfg.constraints) {
        Tensor pen;
        for (int k = 0; k < n_steps; ++k) {
            const Tensor& v = spec.on == ConstraintSpec::On::State
                                  ? rollout.states[static_cast<std::size_t>(k)]
                                  : rollout.amps[static_cast<std::size_t>(k)];
            const Tensor viol = spec.sense == ConstraintSpec::Sense::Upper
                                    ? relu(add_scalar(v, -spec.bound))
                                    : relu(add_scalar(negate(v), spec.bound));
            const Tensor e = sum_all(square(viol));
            pen = pen.valid() ? add(pen, e) : e;
        }
        accumulate(scale(pen, spec.on == ConstraintSpec::On::State ? cfg.q_state
                                                                   : cfg.q_control));
    }

    return scale(total, 1.0 / (static_cast<double>(batch) * n_steps * geom.n_x));
}

std::vector<Field> dataset_terminal_fields(const DatasetReader& data) {
    std::vector<Field> out;
    for (int i = 0; i < data.manifest().n_samples; ++i) {
        if (data.failed(i) || is_test_sample(i)) continue;
        out.push_back(data.load(i).fields.back());
    }
    if (out.empty()) throw std::runtime_error("dataset_terminal_fields: no usable samples");
    return out;
}

PolicyTrainResult train_policy(const OperatorModel& op, const ExperimentConfig& cfg,
                               const DatasetReader* target_corpus, int epochs,
                               std::uint64_t seed) {
    const Grid1D grid = cfg.grid();
    if (op.n_x() != grid.n_x)
        throw std::runtime_error("train_policy: operator n_x=" + std::to_string(op.n_x()) +
                                 " does not match grid n_x=" + std::to_string(grid.n_x));
    const int n_steps = cfg.n_op_steps();
    const double dt_op = cfg.dt_op();
    const int batch = cfg.policy.batch;

    PolicyTrainResult result;
    result.model = make_policy_model(cfg, grid, seed);
    PolicyModel& policy = result.model;

    const GrfSampler ic_sampler(cfg.grf_policy_ic, grid);
    std::optional<GrfSampler> target_sampler;
    std::vector<Field> target_candidates;
    if (cfg.policy.target_source == TargetSource::Grf) {
        target_sampler.emplace(*cfg.grf_target, grid);
    } else if (cfg.policy.target_source == TargetSource::DatasetTerminal) {
        if (target_corpus == nullptr)
            throw std::runtime_error("train_policy: target_source=dataset_terminal needs a "
                                     "dataset");
        target_candidates = dataset_terminal_fields(*target_corpus);
    }

    const std::vector<double> trunk_cache = trunk_matrix(op);
    std::vector<double> flat_params;
    append_params(policy.net, flat_params);
    AdamState adam(flat_params.size());
    std::vector<double> snapshot = flat_params;
    double best = std::numeric_limits<double>::infinity();

    const std::uint64_t ic_salt = derive_seed(seed, 0x1c);
    const std::uint64_t tgt_salt = derive_seed(seed, 0x7a);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<double> u0(static_cast<std::size_t>(batch) * grid.n_x);
        std::vector<double> tgt;
        if (policy.target_dim > 0)
            tgt.resize(static_cast<std::size_t>(batch) * grid.n_x);
        for (int j = 0; j < batch; ++j) {
            const std::uint64_t s = static_cast<std::uint64_t>(epoch) * batch +
                                    static_cast<std::uint64_t>(j);
            Field ic = ic_sampler.sample(derive_seed(ic_salt, s));
            if (cfg.dataset.taper_endpoints) taper_endpoints(ic, grid);
            std::copy(ic.begin(), ic.end(),
                      u0.begin() + static_cast<std::ptrdiff_t>(j) * grid.n_x);
            if (policy.target_dim > 0) {
                Field t;
                if (target_sampler) {
                    t = target_sampler->sample(derive_seed(tgt_salt, s));
                    if (cfg.dataset.taper_endpoints) taper_endpoints(t, grid);
                } else {
                    t = target_candidates[static_cast<std::size_t>(
                        derive_seed(tgt_salt, s) % target_candidates.size())];
                }
                std::copy(t.begin(), t.end(),
                          tgt.begin() + static_cast<std::ptrdiff_t>(j) * grid.n_x);
            }
        }

        ad::Tape tape;
        const LiftedOperator lifted_op = lift_operator(tape, op, false, &trunk_cache);
        const LiftedPolicy lifted_policy = lift_policy(tape, policy, true);
        const ad::Tensor u0_t = tape.leaf(ad::Shape{batch, grid.n_x}, std::move(u0), false);
        std::optional<ad::Tensor> tgt_t;
        if (policy.target_dim > 0)
            tgt_t = tape.leaf(ad::Shape{batch, grid.n_x}, std::move(tgt), false);

        double loss_value = std::numeric_limits<double>::quiet_NaN();
        try {
            const DpcRollout roll =
                dpc_rollout(policy, lifted_policy, op, lifted_op, u0_t, tgt_t, n_steps, dt_op);
            const ad::Tensor loss = dpc_loss(
                tape, roll, tgt_t, cfg.loss,
                DpcLossGeometry{grid.dx, dt_op, grid.n_x, grid.periodic});
            loss_value = loss.value();
            if (std::isfinite(loss_value)) {
                tape.backward(loss);
                std::vector<double> grads;
                grads.reserve(flat_params.size());
                append_grads(lifted_policy.net, grads);
                adam_step(adam, flat_params, grads, cfg.policy.lr, cfg.policy.beta1,
                          cfg.policy.beta2, cfg.policy.eps);
                std::size_t offset = 0;
                read_params(policy.net, flat_params, offset);
            }
        } catch (const std::exception& e) {
            std::cerr << "train_policy: epoch " << epoch << ": " << e.what() << "\n";
        }

        if (!std::isfinite(loss_value)) {
            flat_params = snapshot;
            std::size_t offset = 0;
            read_params(policy.net, flat_params, offset);
            result.aborted_non_finite = true;
            std::cerr << "train_policy: non-finite loss at epoch " << epoch
                      << ", keeping last stable parameters\n";
            break;
        }
        snapshot = flat_params;
        best = std::min(best, loss_value);
        result.curve.push_back({epoch, loss_value, best});
    }
    return result;
}

void save_policy_checkpoint(const std::string& path, const PolicyModel& model) {
    nlohmann::json header;
    header["kind"] = "policy";
    header["tool_version"] = kToolVersion;
    header["format_version"] = kFormatVersion;
    header["config_hash"] = model.config_hash;
    header["a_max"] = model.a_max;
    header["state_dim"] = model.state_dim;
    header["target_dim"] = model.target_dim;
    header["activation"] = to_string(model.net.activation);
    nlohmann::json dims = nlohmann::json::array();
    for (const DenseLayer& l : model.net.layers) dims.push_back({l.in, l.out});
    header["net"] = dims;
    std::vector<double> flat;
    append_params(model.net, flat);
    header["param_count"] = flat.size();
    save_checkpoint(path, header, flat);
}

PolicyModel load_policy_checkpoint(const std::string& path) {
    auto [header, blob] = load_checkpoint(path);
    if (header.at("kind").get<std::string>() != "policy")
        throw std::runtime_error("'" + path + "' is not a policy checkpoint");
    PolicyModel m;
    m.a_max = header.at("a_max").get<double>();
    m.state_dim = header.at("state_dim").get<int>();
    m.target_dim = header.at("target_dim").get<int>();
    m.config_hash = header.at("config_hash").get<std::string>();
    m.net.activation = activation_from_string(header.at("activation").get<std::string>());
    for (const auto& d : header.at("net")) {
        DenseLayer layer;
        layer.in = d.at(0).get<int>();
        layer.out = d.at(1).get<int>();
        layer.w.assign(static_cast<std::size_t>(layer.in) * layer.out, 0.0);
        layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
        m.net.layers.push_back(std::move(layer));
    }
    std::size_t offset = 0;
    read_params(m.net, blob, offset);
    if (offset != blob.size())
        throw std::runtime_error("'" + path + "': policy parameter blob has wrong length");
    return m;
}

}  // namespace pdedpc
