// pdedpc command-line driver. Links the C API only; all pipeline work lives
// behind libpdedpc.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdedpc/pdedpc.h"

namespace {

namespace fs = std::filesystem;

struct ConfigHandle {
    pdedpc_config* ptr = nullptr;
    ~ConfigHandle() { pdedpc_config_free(ptr); }
};

int fail_with(pdedpc_status status) {
    std::fprintf(stderr, "error: %s\n", pdedpc_last_error());
    return static_cast<int>(status);
}

// Output root: $PDE_DPC_OUT when set, else the config's output_dir.
std::string output_root(const pdedpc_config* config) {
    if (const char* env = std::getenv("PDE_DPC_OUT"); env != nullptr && *env != '\0') return env;
    return pdedpc_config_output_dir(config);
}

std::string default_path(const pdedpc_config* config, const std::string& leaf) {
    return (fs::path(output_root(config)) / pdedpc_config_name(config) / leaf).string();
}

int load_config(const std::string& path, ConfigHandle& handle) {
    const pdedpc_status st = pdedpc_config_load(path.c_str(), &handle.ptr);
    if (st != PDEDPC_OK) return fail_with(st);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable predictive control for 1-D PDEs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(pdedpc_version()));

    std::string config_path, dataset_dir, op_ckpt, policy_ckpt, out_path, curve_path;
    std::int64_t samples = -1, epochs = -1, n_eval = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    bool force = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option_function<std::uint64_t>(
               "--seed", [&](const std::uint64_t& v) { seed = v; seed_set = true; },
               "RNG seed (default: from config)");
    };

    CLI::App* generate = app.add_subcommand("generate", "Generate a ground-truth FDM dataset");
    generate->add_option("config", config_path, "experiment config JSON")->required();
    generate->add_option("--samples", samples, "number of trajectories (default: from config)");
    add_seed(generate);
    generate->add_option("--out", out_path, "dataset directory");
    generate->add_option("--threads", threads, "parallel sample workers");

    CLI::App* train_op = app.add_subcommand("train-operator", "Train the TI-DeepONet surrogate");
    train_op->add_option("config", config_path)->required();
    train_op->add_option("dataset", dataset_dir, "dataset directory")->required();
    train_op->add_option("--epochs", epochs, "training epochs (default: from config)");
    add_seed(train_op);
    train_op->add_option("--out", out_path, "checkpoint path");
    train_op->add_option("--curve", curve_path, "training-curve CSV path");
    train_op->add_flag("--force", force, "ignore config-hash mismatches");

    CLI::App* train_pol = app.add_subcommand("train-policy", "Train the DPC control policy");
    train_pol->add_option("config", config_path)->required();
    train_pol->add_option("operator", op_ckpt, "operator checkpoint")->required();
    train_pol->add_option("--dataset", dataset_dir,
                          "dataset directory (for corpus-sampled targets)");
    train_pol->add_option("--epochs", epochs, "training epochs (default: from config)");
    add_seed(train_pol);
    train_pol->add_option("--out", out_path, "checkpoint path");
    train_pol->add_option("--curve", curve_path, "training-curve CSV path");
    train_pol->add_flag("--force", force, "ignore config-hash mismatches");

    CLI::App* evaluate = app.add_subcommand("evaluate", "Closed-loop comparison and gate");
    evaluate->add_option("config", config_path)->required();
    evaluate->add_option("operator", op_ckpt, "operator checkpoint")->required();
    evaluate->add_option("policy", policy_ckpt, "policy checkpoint")->required();
    evaluate->add_option("--dataset", dataset_dir,
                         "dataset directory (for corpus-sampled targets)");
    evaluate->add_option("--n-eval", n_eval, "evaluation scenarios (default: from config)");
    add_seed(evaluate);
    evaluate->add_option("--out", out_path, "report directory");
    evaluate->add_option("--threads", threads, "parallel scenario workers");
    evaluate->add_flag("--force", force, "ignore config-hash mismatches");

    std::string inspect_path;
    CLI::App* inspect = app.add_subcommand("inspect", "Print artifact metadata");
    inspect->add_option("path", inspect_path, "dataset dir, checkpoint or report dir")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (inspect->parsed()) {
        size_t needed = 0;
        if (pdedpc_inspect(inspect_path.c_str(), nullptr, 0, &needed) != PDEDPC_OK)
            return fail_with(PDEDPC_ERR_RUNTIME);
        std::vector<char> buf(needed);
        const pdedpc_status st = pdedpc_inspect(inspect_path.c_str(), buf.data(), buf.size(),
                                                nullptr);
        if (st != PDEDPC_OK) return fail_with(st);
        std::fputs(buf.data(), stdout);
        return 0;
    }

    ConfigHandle config;
    if (const int rc = load_config(config_path, config); rc != 0) return rc;

    if (generate->parsed()) {
        if (samples < 0) samples = pdedpc_config_default_samples(config.ptr);
        if (!seed_set) seed = pdedpc_config_seed(config.ptr, PDEDPC_STAGE_DATASET);
        if (out_path.empty()) out_path = default_path(config.ptr, "dataset");
        const pdedpc_status st = pdedpc_generate(config.ptr, static_cast<int>(samples), seed,
                                                 out_path.c_str(), threads);
        if (st != PDEDPC_OK) return fail_with(st);
        std::printf("generated %lld trajectories in %s (config %s)\n",
                    static_cast<long long>(samples), out_path.c_str(),
                    pdedpc_config_hash(config.ptr));
        return 0;
    }

    if (train_op->parsed()) {
        if (epochs < 0) epochs = pdedpc_config_default_epochs(config.ptr, PDEDPC_STAGE_OPERATOR);
        if (!seed_set) seed = pdedpc_config_seed(config.ptr, PDEDPC_STAGE_OPERATOR);
        if (out_path.empty()) out_path = default_path(config.ptr, "operator.ckpt");
        if (curve_path.empty()) curve_path = default_path(config.ptr, "operator_curve.csv");
        fs::create_directories(fs::path(out_path).parent_path());
        double rel_l2 = 0.0;
        const pdedpc_status st = pdedpc_train_operator(
            config.ptr, dataset_dir.c_str(), static_cast<int>(epochs), seed, out_path.c_str(),
            curve_path.c_str(), &rel_l2, force ? 1 : 0);
        if (st != PDEDPC_OK) return fail_with(st);
        std::printf("operator checkpoint: %s\ntraining curve: %s\n", out_path.c_str(),
                    curve_path.c_str());
        std::printf("test relative L2 (full-horizon rollouts): %.17g\n", rel_l2);
        return 0;
    }

    if (train_pol->parsed()) {
        if (epochs < 0) epochs = pdedpc_config_default_epochs(config.ptr, PDEDPC_STAGE_POLICY);
        if (!seed_set) seed = pdedpc_config_seed(config.ptr, PDEDPC_STAGE_POLICY);
        if (out_path.empty()) out_path = default_path(config.ptr, "policy.ckpt");
        if (curve_path.empty()) curve_path = default_path(config.ptr, "policy_curve.csv");
        fs::create_directories(fs::path(out_path).parent_path());
        double final_loss = 0.0;
        const pdedpc_status st = pdedpc_train_policy(
            config.ptr, op_ckpt.c_str(), dataset_dir.empty() ? nullptr : dataset_dir.c_str(),
            static_cast<int>(epochs), seed, out_path.c_str(), curve_path.c_str(), &final_loss,
            force ? 1 : 0);
        if (st != PDEDPC_OK) return fail_with(st);
        std::printf("policy checkpoint: %s\ntraining curve: %s\n", out_path.c_str(),
                    curve_path.c_str());
        std::printf("final DPC loss: %.17g\n", final_loss);
        return 0;
    }

    if (evaluate->parsed()) {
        if (n_eval < 0) n_eval = pdedpc_config_default_n_eval(config.ptr);
        if (n_eval == 0) {
            std::fprintf(stderr, "error: --n-eval 0 is degenerate; need at least 1 scenario\n");
            return 2;
        }
        if (!seed_set) seed = pdedpc_config_seed(config.ptr, PDEDPC_STAGE_EVALUATION);
        if (out_path.empty()) out_path = default_path(config.ptr, "eval");
        pdedpc_report* report = nullptr;
        const pdedpc_status st = pdedpc_evaluate(
            config.ptr, op_ckpt.c_str(), policy_ckpt.c_str(),
            dataset_dir.empty() ? nullptr : dataset_dir.c_str(), static_cast<int>(n_eval), seed,
            threads, out_path.c_str(), force ? 1 : 0, &report);
        std::unique_ptr<pdedpc_report, decltype(&pdedpc_report_free)> guard(
            report, &pdedpc_report_free);
        if (report != nullptr) {
            std::printf("scenarios: %d complete of %d\n", pdedpc_report_n_complete(report),
                        pdedpc_report_n_scenarios(report));
            const char* names[3] = {"natural (FDM)", "controlled (TI-DON)", "controlled (FDM)"};
            for (int c = 0; c < 3; ++c)
                std::printf("%-20s mean %.6g  std %.6g  median %.6g\n", names[c],
                            pdedpc_report_stat(report, c, 0), pdedpc_report_stat(report, c, 1),
                            pdedpc_report_stat(report, c, 2));
            std::printf("objective ratio (ctrl/natural): %.6g\n",
                        pdedpc_report_objective_ratio(report));
            std::printf("surrogate transfer gap: %.6g\n", pdedpc_report_transfer_gap(report));
            std::printf("acceptance: %s\n",
                        pdedpc_report_acceptance_passed(report) ? "PASS" : "FAIL");
            std::printf("report written to %s\n", out_path.c_str());
        }
        if (st != PDEDPC_OK) return fail_with(st);
        return 0;
    }

    return 2;
}
