#include "core/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "core/rng.hpp"
#include "core/svg.hpp"
#include "core/util.hpp"
#include "core/version.hpp"

namespace pdedpc {

namespace fs = std::filesystem;

FdmPlant::FdmPlant(const PdeParams& pde, const ControlBasisConfig& basis, const Grid1D& grid,
                   int substeps)
    : pde_(pde), basis_(basis), grid_(grid), substeps_(substeps) {
    if (substeps_ < 1) throw std::runtime_error("FdmPlant: substeps must be >= 1");
}

std::vector<Field> FdmPlant::advance(const Field& u, const Amplitudes& amps) {
    std::vector<Field> states;
    states.reserve(static_cast<std::size_t>(substeps_));
    const Field f = assemble_control_field(amps, basis_, grid_);
    Field cur = u;
    for (int s = 0; s < substeps_; ++s) {
        cur = pde_step(cur, f, pde_, grid_);
        states.push_back(cur);
    }
    return states;
}

OperatorPlant::OperatorPlant(const OperatorModel& model)
    : model_(model), cache_(make_eval_cache(model)) {}

std::vector<Field> OperatorPlant::advance(const Field& u, const Amplitudes& amps) {
    std::vector<double> state = u;
    operator_rk4_step_batch(model_, cache_, state, amps, 1, model_.dt_op);
    return {Field(state.begin(), state.end())};
}

Deployment deploy_closed_loop(const PolicyModel& policy, Plant& plant, const Field& u0,
                              const Field* target, int n_control_steps) {
    Deployment d;
    d.state_dt = plant.state_dt();
    d.states.push_back(u0);
    Field u = u0;
    for (int k = 0; k < n_control_steps; ++k) {
        d.policy_inputs.push_back(u);
        const Amplitudes amps = policy_eval(policy, u, target);
        d.amps.push_back(amps);
        std::vector<Field> inter;
        try {
            inter = plant.advance(u, amps);
        } catch (const std::exception& e) {
            throw std::runtime_error("deploy_closed_loop: control step " + std::to_string(k) +
                                     ": " + e.what());
        }
        for (auto& f : inter) d.states.push_back(std::move(f));
        u = d.states.back();
    }
    return d;
}

double objective_value(const std::vector<Field>& states, double state_dt, const Field* target,
                       StageCostKind kind, double dx, bool periodic) {
    if (states.empty()) throw std::runtime_error("objective_value: empty trajectory");
    if (kind == StageCostKind::TerminalTracking) {
        if (target == nullptr)
            throw std::runtime_error("objective_value: terminal tracking requires a target");
        const Field& uT = states.back();
        if (uT.size() != target->size())
            throw std::runtime_error("objective_value: target size mismatch");
        double acc = 0.0;
        for (std::size_t i = 0; i < uT.size(); ++i) {
            const double d = uT[i] - (*target)[i];
            acc += d * d;
        }
        return acc * dx;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < states.size(); ++k)
        acc += curvature_energy(states[k], dx, periodic);
    return acc * state_dt;
}

ColumnStats column_stats(const std::vector<double>& values) {
    ColumnStats s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / n;
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = values.size() > 1 ? std::sqrt(sq / n) : 0.0;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    s.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return s;
}

namespace {

double bound_violation(const Deployment& dep, const PolicyModel& policy,
                       const std::vector<ConstraintSpec>& constraints) {
    double viol = 0.0;
    for (const Amplitudes& a : dep.amps)
        for (double v : a) viol = std::max(viol, std::abs(v) - policy.a_max);
    for (const ConstraintSpec& spec : constraints) {
        if (spec.on != ConstraintSpec::On::State) {
            for (const Amplitudes& a : dep.amps)
                for (double v : a)
                    viol = std::max(viol, spec.sense == ConstraintSpec::Sense::Upper
                                              ? v - spec.bound
                                              : spec.bound - v);
            continue;
        }
        for (const Field& u : dep.states)
            for (double v : u)
                viol = std::max(viol, spec.sense == ConstraintSpec::Sense::Upper
                                          ? v - spec.bound
                                          : spec.bound - v);
    }
    return std::max(viol, 0.0);
}

void write_scenario_figure(const std::string& path, const ExperimentConfig& cfg,
                           const Grid1D& grid, const std::vector<Field>& natural,
                           const Deployment& don, const Deployment& fdm, const Field* target,
                           double fine_dt) {
    std::vector<SvgPanel> panels;

    SvgPanel uncontrolled;
    uncontrolled.title = "uncontrolled (FDM)";
    uncontrolled.x_label = "x";
    uncontrolled.y_label = "u";
    uncontrolled.series.push_back({grid.x, natural.front(), "initial", false});
    uncontrolled.series.push_back({grid.x, natural.back(), "final", false});
    if (target) uncontrolled.series.push_back({grid.x, *target, "target", true});
    panels.push_back(std::move(uncontrolled));

    SvgPanel controlled;
    controlled.title = "controlled (FDM)";
    controlled.x_label = "x";
    controlled.y_label = "u";
    controlled.series.push_back({grid.x, fdm.states.front(), "initial", false});
    controlled.series.push_back({grid.x, fdm.states.back(), "final", false});
    if (target) controlled.series.push_back({grid.x, *target, "target", true});
    panels.push_back(std::move(controlled));

    SvgPanel signals;
    signals.title = "control signals";
    signals.x_label = "t";
    signals.y_label = "f_i(t)";
    const int n_act = static_cast<int>(fdm.amps.empty() ? 0 : fdm.amps[0].size());
    const double dt_ctrl = cfg.dt_op();
    for (int a = 0; a < n_act; ++a) {
        SvgSeries s;
        s.label = "f_" + std::to_string(a + 1);
        for (std::size_t k = 0; k < fdm.amps.size(); ++k) {
            s.x.push_back(static_cast<double>(k) * dt_ctrl);
            s.y.push_back(fdm.amps[k][static_cast<std::size_t>(a)]);
        }
        signals.series.push_back(std::move(s));
    }
    panels.push_back(std::move(signals));

    if (cfg.loss.kind == StageCostKind::CurvatureIntegral) {
        SvgPanel curvature;
        curvature.title = "curvature energy";
        curvature.x_label = "t";
        curvature.y_label = "|u_xx|^2";
        SvgSeries nat, ctl, don_s;
        nat.label = "natural";
        ctl.label = "controlled FDM";
        don_s.label = "controlled TI-DON";
        for (std::size_t k = 0; k < natural.size(); ++k) {
            nat.x.push_back(static_cast<double>(k) * fine_dt);
            nat.y.push_back(curvature_energy(natural[k], grid.dx, grid.periodic));
        }
        for (std::size_t k = 0; k < fdm.states.size(); ++k) {
            ctl.x.push_back(static_cast<double>(k) * fdm.state_dt);
            ctl.y.push_back(curvature_energy(fdm.states[k], grid.dx, grid.periodic));
        }
        for (std::size_t k = 0; k < don.states.size(); ++k) {
            don_s.x.push_back(static_cast<double>(k) * don.state_dt);
            don_s.y.push_back(curvature_energy(don.states[k], grid.dx, grid.periodic));
        }
        curvature.series = {std::move(nat), std::move(ctl), std::move(don_s)};
        panels.push_back(std::move(curvature));
    }

    write_svg_figure(path, panels);
}

void append_csv_value(std::string& line, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += ",";
    line += buf;
}

}  // namespace

EvalReport build_comparison(const PolicyModel& policy, const OperatorModel& op,
                            const ExperimentConfig& cfg, const DatasetReader* target_corpus,
                            int n_eval, std::uint64_t seed, const std::string& out_dir,
                            int threads) {
    if (n_eval < 1) throw std::runtime_error("build_comparison: n_eval must be >= 1");
    const Grid1D grid = cfg.grid();
    const int n_ctrl = cfg.n_op_steps();
    const int n_fine = cfg.pde.n_steps();
    const GrfSampler ic_sampler(cfg.grf_policy_ic, grid);
    std::optional<GrfSampler> target_sampler;
    std::vector<Field> target_candidates;
    if (cfg.policy.target_source == TargetSource::Grf) {
        target_sampler.emplace(*cfg.grf_target, grid);
    } else if (cfg.policy.target_source == TargetSource::DatasetTerminal) {
        if (target_corpus == nullptr)
            throw std::runtime_error("build_comparison: target_source=dataset_terminal needs a "
                                     "dataset");
        target_candidates = dataset_terminal_fields(*target_corpus);
    }
    const bool needs_target = cfg.policy.target_source != TargetSource::None;

    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "figures");

    EvalReport report;
    report.config_hash = cfg.hash();
    report.scenarios.assign(static_cast<std::size_t>(n_eval), ScenarioRecord{});

    parallel_for(n_eval, threads, [&](int s) {
        ScenarioRecord& rec = report.scenarios[static_cast<std::size_t>(s)];
        rec.index = s;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const std::uint64_t scen_seed = derive_seed(seed, static_cast<std::uint64_t>(s));
            Field u0 = ic_sampler.sample(derive_seed(scen_seed, 0));
            if (cfg.dataset.taper_endpoints) taper_endpoints(u0, grid);
            Field target_storage;
            const Field* target = nullptr;
            if (needs_target) {
                if (target_sampler) {
                    target_storage = target_sampler->sample(derive_seed(scen_seed, 1));
                    if (cfg.dataset.taper_endpoints) taper_endpoints(target_storage, grid);
                } else {
                    target_storage = target_candidates[static_cast<std::size_t>(
                        derive_seed(scen_seed, 1) % target_candidates.size())];
                }
                target = &target_storage;
            }

            const std::vector<Amplitudes> zero_amps(
                static_cast<std::size_t>(n_fine),
                Amplitudes(static_cast<std::size_t>(cfg.basis.n_actuators), 0.0));
            const Trajectory natural = rollout_fdm(u0, zero_amps, cfg.pde, cfg.basis, grid);
            rec.natural_fdm = objective_value(natural.fields, cfg.pde.dt, target, cfg.loss.kind,
                                              grid.dx, grid.periodic);

            OperatorPlant don_plant(op);
            const Deployment don = deploy_closed_loop(policy, don_plant, u0, target, n_ctrl);
            rec.ctrl_tidon = objective_value(don.states, don.state_dt, target, cfg.loss.kind,
                                             grid.dx, grid.periodic);

            FdmPlant fdm_plant(cfg.pde, cfg.basis, grid, cfg.dataset.stride);
            const Deployment fdm = deploy_closed_loop(policy, fdm_plant, u0, target, n_ctrl);
            rec.ctrl_fdm = objective_value(fdm.states, fdm.state_dt, target, cfg.loss.kind,
                                           grid.dx, grid.periodic);

            rec.max_violation = std::max(bound_violation(don, policy, cfg.loss.constraints),
                                         bound_violation(fdm, policy, cfg.loss.constraints));
            if (s < cfg.eval.figures_limit) {
                char name[48];
                std::snprintf(name, sizeof name, "scenario_%03d.svg", s);
                write_scenario_figure((fs::path(out_dir) / "figures" / name).string(), cfg, grid,
                                      natural.fields, don, fdm, target, cfg.pde.dt);
            }
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
        }
        rec.runtime_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    std::vector<double> nat, don_v, fdm_v;
    for (const ScenarioRecord& rec : report.scenarios) {
        if (!rec.ok) continue;
        nat.push_back(rec.natural_fdm);
        don_v.push_back(rec.ctrl_tidon);
        fdm_v.push_back(rec.ctrl_fdm);
    }
    report.n_complete = static_cast<int>(nat.size());
    report.natural_fdm = column_stats(nat);
    report.ctrl_tidon = column_stats(don_v);
    report.ctrl_fdm = column_stats(fdm_v);

    AcceptanceOutcome& acc = report.acceptance;
    if (report.n_complete > 0 && report.natural_fdm.mean > 0.0 && report.ctrl_fdm.mean > 0.0) {
        acc.objective_ratio = report.ctrl_fdm.mean / report.natural_fdm.mean;
        acc.transfer_gap =
            std::abs(report.ctrl_tidon.mean - report.ctrl_fdm.mean) / report.ctrl_fdm.mean;
        acc.ratio_ok = acc.objective_ratio <= cfg.eval.max_objective_ratio;
        acc.transfer_ok = acc.transfer_gap <= cfg.eval.max_transfer_gap;
        acc.passed = acc.ratio_ok && acc.transfer_ok &&
                     report.n_complete == static_cast<int>(report.scenarios.size());
    }

    // report.csv: one row per scenario, fixed header.
    {
        std::ofstream out(fs::path(out_dir) / "report.csv");
        out << "scenario,ok,natural_fdm,ctrl_tidon,ctrl_fdm,max_violation,runtime_s,"
               "config_hash,tool_version\n";
        for (const ScenarioRecord& rec : report.scenarios) {
            std::string line = std::to_string(rec.index);
            line += rec.ok ? ",1" : ",0";
            append_csv_value(line, rec.natural_fdm);
            append_csv_value(line, rec.ctrl_tidon);
            append_csv_value(line, rec.ctrl_fdm);
            append_csv_value(line, rec.max_violation);
            append_csv_value(line, rec.runtime_s);
            line += "," + report.config_hash + "," + kToolVersion;
            out << line << "\n";
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "summary.csv");
        out << "pde,natural_fdm_mean,natural_fdm_std,ctrl_tidon_mean,ctrl_tidon_std,"
               "ctrl_fdm_mean,ctrl_fdm_std\n";
        std::string line = to_string(cfg.pde.kind);
        append_csv_value(line, report.natural_fdm.mean);
        append_csv_value(line, report.natural_fdm.stddev);
        append_csv_value(line, report.ctrl_tidon.mean);
        append_csv_value(line, report.ctrl_tidon.stddev);
        append_csv_value(line, report.ctrl_fdm.mean);
        append_csv_value(line, report.ctrl_fdm.stddev);
        // the leading comma from append_csv_value sits after the pde name
        out << line << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "summary_median.csv");
        out << "pde,natural_fdm_median,ctrl_tidon_median,ctrl_fdm_median\n";
        std::string line = to_string(cfg.pde.kind);
        append_csv_value(line, report.natural_fdm.median);
        append_csv_value(line, report.ctrl_tidon.median);
        append_csv_value(line, report.ctrl_fdm.median);
        out << line << "\n";
    }
    {
        nlohmann::json meta;
        meta["config_hash"] = report.config_hash;
        meta["tool_version"] = kToolVersion;
        meta["n_eval"] = n_eval;
        meta["n_complete"] = report.n_complete;
        meta["seed"] = seed;
        meta["degenerate_std"] = n_eval < 2;
        meta["acceptance"] = {{"objective_ratio", acc.objective_ratio},
                              {"transfer_gap", acc.transfer_gap},
                              {"max_objective_ratio", cfg.eval.max_objective_ratio},
                              {"max_transfer_gap", cfg.eval.max_transfer_gap},
                              {"ratio_ok", acc.ratio_ok},
                              {"transfer_ok", acc.transfer_ok},
                              {"passed", acc.passed}};
        std::ofstream out(fs::path(out_dir) / "report_meta.json");
        out << meta.dump(2) << "\n";
    }
    return report;
}

}  // namespace pdedpc
