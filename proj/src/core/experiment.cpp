#include "core/experiment.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pdedpc {

using nlohmann::json;

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "silu"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "silu") return Activation::Silu;
    throw std::runtime_error("unknown activation '" + s + "'");
}

std::string to_string(TargetSource t) {
    switch (t) {
        case TargetSource::None: return "none";
        case TargetSource::Grf: return "grf";
        case TargetSource::DatasetTerminal: return "dataset_terminal";
    }
    return "?";
}

TargetSource target_source_from_string(const std::string& s) {
    if (s == "none") return TargetSource::None;
    if (s == "grf") return TargetSource::Grf;
    if (s == "dataset_terminal") return TargetSource::DatasetTerminal;
    throw std::runtime_error("unknown target source '" + s + "'");
}

std::string to_string(StageCostKind k) {
    return k == StageCostKind::TerminalTracking ? "terminal_tracking" : "curvature_integral";
}

StageCostKind stage_cost_kind_from_string(const std::string& s) {
    if (s == "terminal_tracking") return StageCostKind::TerminalTracking;
    if (s == "curvature_integral") return StageCostKind::CurvatureIntegral;
    throw std::runtime_error("unknown stage cost kind '" + s + "'");
}

namespace {

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
    throw std::runtime_error("config field '" + where + "': " + what);
}

template <class T>
T require(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) config_fail(path + key, "missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_fail(path + key, e.what());
    }
}

template <class T>
T optional_or(const json& j, const std::string& path, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_fail(path + key, e.what());
    }
}

BoundaryKind bc_for(PdeKind kind) {
    switch (kind) {
        case PdeKind::Heat: return BoundaryKind::Dirichlet0;
        case PdeKind::Burgers: return BoundaryKind::Periodic;
        case PdeKind::FisherKpp: return BoundaryKind::Neumann0;
    }
    throw std::runtime_error("bc_for: unknown kind");
}

GrfConfig parse_grf(const json& j, const std::string& path) {
    GrfConfig g;
    g.length_scale = require<double>(j, path, "length_scale");
    g.variance = require<double>(j, path, "variance");
    g.jitter = optional_or<double>(j, path, "jitter", -1.0);
    g.periodic_kernel = optional_or<bool>(j, path, "periodic_kernel", false);
    return g;
}

json grf_to_json(const GrfConfig& g) {
    json j;
    j["length_scale"] = g.length_scale;
    j["variance"] = g.variance;
    if (g.jitter >= 0.0) j["jitter"] = g.jitter;
    if (g.periodic_kernel) j["periodic_kernel"] = true;
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    pde.validate();
    grf_train.validate();
    grf_policy_ic.validate();
    if (grf_target) grf_target->validate();
    basis.validate();
    if (dataset.stride < 1) throw std::runtime_error("config field 'dataset.stride': must be >= 1");
    if (pde.n_steps() % dataset.stride != 0)
        throw std::runtime_error("config field 'dataset.stride': must divide T/dt = " +
                                 std::to_string(pde.n_steps()));
    if (dataset.n_samples < 0)
        throw std::runtime_error("config field 'dataset.n_samples': must be >= 0");
    if (policy.target_source == TargetSource::Grf && !grf_target)
        throw std::runtime_error("config field 'grf.target': required when policy.target_source "
                                 "is 'grf'");
    if (loss.kind == StageCostKind::TerminalTracking && policy.target_source == TargetSource::None)
        throw std::runtime_error("config field 'policy.target_source': terminal tracking needs a "
                                 "target source");
    if (op.rollout_loss_steps < 1 || op.rollout_loss_steps > n_op_steps())
        throw std::runtime_error("config field 'operator.rollout_loss_steps': out of range");
    (void)grid();
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config '" + path + "' is not valid JSON: " + e.what());
    }

    ExperimentConfig c;
    c.name = require<std::string>(j, "", "name");

    const json& jp = j.contains("pde") ? j.at("pde") : json::object();
    if (jp.empty()) config_fail("pde", "missing");
    c.pde.kind = pde_kind_from_string(require<std::string>(jp, "pde.", "kind"));
    c.pde.bc = bc_for(c.pde.kind);
    c.pde.alpha = optional_or<double>(jp, "pde.", "alpha", 0.0);
    c.pde.r = optional_or<double>(jp, "pde.", "r", 0.0);
    c.pde.dt = require<double>(jp, "pde.", "dt");
    c.pde.t_final = require<double>(jp, "pde.", "t_final");
    c.pde.conservative_burgers = optional_or<bool>(jp, "pde.", "conservative_burgers", false);
    c.dx = optional_or<double>(j, "", "dx", 1e-2);

    const json& jg = j.contains("grf") ? j.at("grf") : json::object();
    if (jg.empty()) config_fail("grf", "missing");
    c.grf_train = parse_grf(jg.contains("train_ic") ? jg.at("train_ic") : json::object(),
                            "grf.train_ic.");
    c.grf_policy_ic = parse_grf(jg.contains("policy_ic") ? jg.at("policy_ic") : json::object(),
                                "grf.policy_ic.");
    if (jg.contains("target") && !jg.at("target").is_null())
        c.grf_target = parse_grf(jg.at("target"), "grf.target.");

    const json& jb = j.contains("basis") ? j.at("basis") : json::object();
    if (jb.empty()) config_fail("basis", "missing");
    c.basis.mu = require<std::vector<double>>(jb, "basis.", "mu");
    c.basis.n_actuators = static_cast<int>(c.basis.mu.size());
    c.basis.sigma = require<double>(jb, "basis.", "sigma");
    c.basis.a_max = require<double>(jb, "basis.", "a_max");

    if (j.contains("excitation")) {
        const json& je = j.at("excitation");
        c.excitation.amp_frac_min = optional_or<double>(je, "excitation.", "amp_frac_min", 0.3);
        c.excitation.amp_frac_max = optional_or<double>(je, "excitation.", "amp_frac_max", 1.0);
        c.excitation.freq_min = optional_or<double>(je, "excitation.", "freq_min", 0.5);
        c.excitation.freq_max = optional_or<double>(je, "excitation.", "freq_max", 3.0);
        c.excitation.noise_frac = optional_or<double>(je, "excitation.", "noise_frac", 0.05);
    }

    const json& jd = j.contains("dataset") ? j.at("dataset") : json::object();
    if (jd.empty()) config_fail("dataset", "missing");
    c.dataset.n_samples = require<int>(jd, "dataset.", "n_samples");
    c.dataset.stride = optional_or<int>(jd, "dataset.", "stride", 10);
    c.dataset.taper_endpoints = optional_or<bool>(jd, "dataset.", "taper_endpoints", false);
    c.dataset.periodic_projection =
        optional_or<bool>(jd, "dataset.", "periodic_projection", false);
    c.grf_train.periodic_kernel = c.dataset.periodic_projection;
    c.grf_policy_ic.periodic_kernel = c.dataset.periodic_projection;

    if (j.contains("operator")) {
        const json& jo = j.at("operator");
        c.op.width = optional_or<int>(jo, "operator.", "width", c.op.width);
        c.op.depth = optional_or<int>(jo, "operator.", "depth", c.op.depth);
        c.op.p = optional_or<int>(jo, "operator.", "p", c.op.p);
        c.op.activation = activation_from_string(
            optional_or<std::string>(jo, "operator.", "activation", "tanh"));
        c.op.lr = optional_or<double>(jo, "operator.", "lr", c.op.lr);
        c.op.beta1 = optional_or<double>(jo, "operator.", "beta1", c.op.beta1);
        c.op.beta2 = optional_or<double>(jo, "operator.", "beta2", c.op.beta2);
        c.op.eps = optional_or<double>(jo, "operator.", "eps", c.op.eps);
        c.op.batch = optional_or<int>(jo, "operator.", "batch", c.op.batch);
        c.op.epochs = optional_or<int>(jo, "operator.", "epochs", c.op.epochs);
        c.op.rollout_loss_steps =
            optional_or<int>(jo, "operator.", "rollout_loss_steps", c.op.rollout_loss_steps);
        c.op.curriculum = optional_or<bool>(jo, "operator.", "curriculum", c.op.curriculum);
    }

    if (j.contains("policy")) {
        const json& jpo = j.at("policy");
        c.policy.width = optional_or<int>(jpo, "policy.", "width", c.policy.width);
        c.policy.depth = optional_or<int>(jpo, "policy.", "depth", c.policy.depth);
        c.policy.lr = optional_or<double>(jpo, "policy.", "lr", c.policy.lr);
        c.policy.beta1 = optional_or<double>(jpo, "policy.", "beta1", c.policy.beta1);
        c.policy.beta2 = optional_or<double>(jpo, "policy.", "beta2", c.policy.beta2);
        c.policy.eps = optional_or<double>(jpo, "policy.", "eps", c.policy.eps);
        c.policy.batch = optional_or<int>(jpo, "policy.", "batch", c.policy.batch);
        c.policy.epochs = optional_or<int>(jpo, "policy.", "epochs", c.policy.epochs);
        c.policy.target_source = target_source_from_string(
            optional_or<std::string>(jpo, "policy.", "target_source", "none"));
    }

    if (j.contains("loss")) {
        const json& jl = j.at("loss");
        c.loss.kind = stage_cost_kind_from_string(
            optional_or<std::string>(jl, "loss.", "kind", "terminal_tracking"));
        c.loss.q_stage = optional_or<double>(jl, "loss.", "q_stage", 1.0);
        c.loss.q_terminal = optional_or<double>(jl, "loss.", "q_terminal", 1.0);
        c.loss.q_state = optional_or<double>(jl, "loss.", "q_state", 100.0);
        c.loss.q_control = optional_or<double>(jl, "loss.", "q_control", 100.0);
        if (jl.contains("constraints")) {
            for (std::size_t i = 0; i < jl.at("constraints").size(); ++i) {
                const json& jc = jl.at("constraints").at(i);
                const std::string where = "loss.constraints[" + std::to_string(i) + "].";
                ConstraintSpec spec;
                const std::string on = require<std::string>(jc, where, "on");
                if (on == "state")
                    spec.on = ConstraintSpec::On::State;
                else if (on == "control")
                    spec.on = ConstraintSpec::On::Control;
                else
                    config_fail(where + "on", "must be 'state' or 'control'");
                const std::string sense = require<std::string>(jc, where, "sense");
                if (sense == "upper")
                    spec.sense = ConstraintSpec::Sense::Upper;
                else if (sense == "lower")
                    spec.sense = ConstraintSpec::Sense::Lower;
                else
                    config_fail(where + "sense", "must be 'upper' or 'lower'");
                spec.bound = require<double>(jc, where, "bound");
                c.loss.constraints.push_back(spec);
            }
        }
    }

    if (j.contains("evaluation")) {
        const json& je = j.at("evaluation");
        c.eval.n_eval = optional_or<int>(je, "evaluation.", "n_eval", c.eval.n_eval);
        c.eval.figures_limit =
            optional_or<int>(je, "evaluation.", "figures_limit", c.eval.figures_limit);
        c.eval.max_objective_ratio =
            optional_or<double>(je, "evaluation.", "max_objective_ratio", 1.0);
        c.eval.max_transfer_gap = optional_or<double>(je, "evaluation.", "max_transfer_gap", 1.0);
    }

    if (j.contains("seeds")) {
        const json& js = j.at("seeds");
        c.seeds.dataset = optional_or<std::uint64_t>(js, "seeds.", "dataset", 1);
        c.seeds.operator_train = optional_or<std::uint64_t>(js, "seeds.", "operator", 2);
        c.seeds.policy = optional_or<std::uint64_t>(js, "seeds.", "policy", 3);
        c.seeds.evaluation = optional_or<std::uint64_t>(js, "seeds.", "evaluation", 4);
    }

    c.output_dir = optional_or<std::string>(j, "", "output_dir", "out");

    try {
        c.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error("config '" + path + "': " + e.what());
    }
    return c;
}

std::string ExperimentConfig::to_json_string() const {
    json j;
    j["name"] = name;
    j["pde"] = {{"kind", pdedpc::to_string(pde.kind)}, {"alpha", pde.alpha}, {"r", pde.r},
                {"dt", pde.dt},  {"t_final", pde.t_final},
                {"conservative_burgers", pde.conservative_burgers}};
    j["dx"] = dx;
    j["grf"]["train_ic"] = grf_to_json(grf_train);
    j["grf"]["policy_ic"] = grf_to_json(grf_policy_ic);
    if (grf_target) j["grf"]["target"] = grf_to_json(*grf_target);
    j["basis"] = {{"mu", basis.mu}, {"sigma", basis.sigma}, {"a_max", basis.a_max}};
    j["excitation"] = {{"amp_frac_min", excitation.amp_frac_min},
                       {"amp_frac_max", excitation.amp_frac_max},
                       {"freq_min", excitation.freq_min},
                       {"freq_max", excitation.freq_max},
                       {"noise_frac", excitation.noise_frac}};
    j["dataset"] = {{"n_samples", dataset.n_samples},
                    {"stride", dataset.stride},
                    {"taper_endpoints", dataset.taper_endpoints},
                    {"periodic_projection", dataset.periodic_projection}};
    return j.dump(2);
}

std::string ExperimentConfig::hash() const {
    // FNV-1a 64 over the canonical identity serialization (nlohmann orders
    // object keys, so the dump is canonical).
    json j;
    j["pde"] = {{"kind", pdedpc::to_string(pde.kind)}, {"alpha", pde.alpha}, {"r", pde.r},
                {"dt", pde.dt},  {"t_final", pde.t_final},
                {"conservative_burgers", pde.conservative_burgers}};
    j["dx"] = dx;
    j["grf"]["train_ic"] = grf_to_json(grf_train);
    j["grf"]["policy_ic"] = grf_to_json(grf_policy_ic);
    if (grf_target) j["grf"]["target"] = grf_to_json(*grf_target);
    j["basis"] = {{"mu", basis.mu}, {"sigma", basis.sigma}, {"a_max", basis.a_max}};
    j["excitation"] = {{"amp_frac_min", excitation.amp_frac_min},
                       {"amp_frac_max", excitation.amp_frac_max},
                       {"freq_min", excitation.freq_min},
                       {"freq_max", excitation.freq_max},
                       {"noise_frac", excitation.noise_frac}};
    j["dataset"] = {{"stride", dataset.stride},
                    {"taper_endpoints", dataset.taper_endpoints},
                    {"periodic_projection", dataset.periodic_projection}};
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace pdedpc
