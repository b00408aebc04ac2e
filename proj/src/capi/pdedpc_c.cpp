#include "pdedpc/pdedpc.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "core/checkpoint.hpp"
#include "core/dataset.hpp"
#include "core/evaluation.hpp"
#include "core/experiment.hpp"
#include "core/operator_model.hpp"
#include "core/policy.hpp"
#include "core/version.hpp"

namespace fs = std::filesystem;

// Errors that map to dedicated status codes.
namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AcceptanceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

thread_local std::string g_last_error;

template <class Fn>
pdedpc_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return PDEDPC_OK;
    } catch (const ConfigError& e) {
        g_last_error = e.what();
        return PDEDPC_ERR_CONFIG;
    } catch (const MismatchError& e) {
        g_last_error = e.what();
        return PDEDPC_ERR_ARTIFACT_MISMATCH;
    } catch (const AcceptanceError& e) {
        g_last_error = e.what();
        return PDEDPC_ERR_ACCEPTANCE;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PDEDPC_ERR_RUNTIME;
    }
}

void check_hash(const std::string& artifact, const std::string& artifact_hash,
                const std::string& config_hash, bool force) {
    if (artifact_hash == config_hash || force) return;
    throw MismatchError(artifact + " was produced under config hash " + artifact_hash +
                        " but this config hashes to " + config_hash +
                        " (use force to override)");
}

void write_operator_curve(const std::string& path,
                          const std::vector<pdedpc::TrainCurvePoint>& curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write curve CSV '" + path + "'");
    out << "epoch,train_loss,test_loss,rollout_steps\n";
    char buf[96];
    for (const auto& pt : curve) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", pt.epoch, pt.train_loss,
                      pt.test_loss, pt.rollout_steps);
        out << buf;
    }
}

void write_policy_curve(const std::string& path,
                        const std::vector<pdedpc::PolicyTrainCurvePoint>& curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write curve CSV '" + path + "'");
    out << "epoch,loss,best\n";
    char buf[96];
    for (const auto& pt : curve) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", pt.epoch, pt.loss, pt.best);
        out << buf;
    }
}

}  // namespace

struct pdedpc_config {
    pdedpc::ExperimentConfig cfg;
    std::string hash;
};

struct pdedpc_report {
    pdedpc::EvalReport report;
};

extern "C" {

const char* pdedpc_version(void) { return pdedpc::kToolVersion; }

const char* pdedpc_last_error(void) { return g_last_error.c_str(); }

pdedpc_status pdedpc_config_load(const char* path, pdedpc_config** out_config) {
    return guarded([&] {
        if (path == nullptr || out_config == nullptr)
            throw ConfigError("pdedpc_config_load: null argument");
        auto handle = std::make_unique<pdedpc_config>();
        try {
            handle->cfg = pdedpc::ExperimentConfig::load(path);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        handle->hash = handle->cfg.hash();
        *out_config = handle.release();
    });
}

void pdedpc_config_free(pdedpc_config* config) { delete config; }

const char* pdedpc_config_name(const pdedpc_config* config) { return config->cfg.name.c_str(); }

const char* pdedpc_config_hash(const pdedpc_config* config) { return config->hash.c_str(); }

const char* pdedpc_config_output_dir(const pdedpc_config* config) {
    return config->cfg.output_dir.c_str();
}

uint64_t pdedpc_config_seed(const pdedpc_config* config, pdedpc_stage stage) {
    switch (stage) {
        case PDEDPC_STAGE_DATASET: return config->cfg.seeds.dataset;
        case PDEDPC_STAGE_OPERATOR: return config->cfg.seeds.operator_train;
        case PDEDPC_STAGE_POLICY: return config->cfg.seeds.policy;
        case PDEDPC_STAGE_EVALUATION: return config->cfg.seeds.evaluation;
    }
    return 0;
}

int pdedpc_config_default_samples(const pdedpc_config* config) {
    return config->cfg.dataset.n_samples;
}

int pdedpc_config_default_epochs(const pdedpc_config* config, pdedpc_stage stage) {
    if (stage == PDEDPC_STAGE_OPERATOR) return config->cfg.op.epochs;
    if (stage == PDEDPC_STAGE_POLICY) return config->cfg.policy.epochs;
    return 0;
}

int pdedpc_config_default_n_eval(const pdedpc_config* config) { return config->cfg.eval.n_eval; }

pdedpc_status pdedpc_generate(const pdedpc_config* config, int n_samples, uint64_t seed,
                              const char* out_dir, int threads) {
    return guarded([&] {
        if (config == nullptr || out_dir == nullptr)
            throw ConfigError("pdedpc_generate: null argument");
        if (n_samples < 0) throw ConfigError("pdedpc_generate: n_samples must be >= 0");
        pdedpc::generate_dataset(config->cfg, n_samples, seed, out_dir,
                                 threads < 1 ? 1 : threads);
    });
}

pdedpc_status pdedpc_train_operator(const pdedpc_config* config, const char* dataset_dir,
                                    int epochs, uint64_t seed, const char* checkpoint_out,
                                    const char* curve_csv_out, double* out_test_rel_l2,
                                    int force) {
    return guarded([&] {
        if (config == nullptr || dataset_dir == nullptr || checkpoint_out == nullptr)
            throw ConfigError("pdedpc_train_operator: null argument");
        if (epochs < 0) throw ConfigError("pdedpc_train_operator: epochs must be >= 0");
        const pdedpc::DatasetReader data(dataset_dir);
        check_hash("dataset '" + std::string(dataset_dir) + "'", data.manifest().config_hash,
                   config->hash, force != 0);
        pdedpc::OperatorTrainResult result =
            pdedpc::train_operator(data, config->cfg, epochs, seed);
        pdedpc::save_operator_checkpoint(checkpoint_out, result.model);
        if (curve_csv_out != nullptr) write_operator_curve(curve_csv_out, result.curve);
        if (out_test_rel_l2 != nullptr) *out_test_rel_l2 = result.test_rel_l2;
    });
}

pdedpc_status pdedpc_train_policy(const pdedpc_config* config, const char* operator_checkpoint,
                                  const char* dataset_dir, int epochs, uint64_t seed,
                                  const char* checkpoint_out, const char* curve_csv_out,
                                  double* out_final_loss, int force) {
    return guarded([&] {
        if (config == nullptr || operator_checkpoint == nullptr || checkpoint_out == nullptr)
            throw ConfigError("pdedpc_train_policy: null argument");
        if (epochs < 0) throw ConfigError("pdedpc_train_policy: epochs must be >= 0");
        const pdedpc::OperatorModel op =
            pdedpc::load_operator_checkpoint(operator_checkpoint);
        check_hash("operator checkpoint '" + std::string(operator_checkpoint) + "'",
                   op.config_hash, config->hash, force != 0);
        std::unique_ptr<pdedpc::DatasetReader> corpus;
        if (config->cfg.policy.target_source == pdedpc::TargetSource::DatasetTerminal) {
            if (dataset_dir == nullptr)
                throw ConfigError("this experiment draws targets from the training corpus; a "
                                  "dataset directory is required");
            corpus = std::make_unique<pdedpc::DatasetReader>(dataset_dir);
            check_hash("dataset '" + std::string(dataset_dir) + "'",
                       corpus->manifest().config_hash, config->hash, force != 0);
        }
        pdedpc::PolicyTrainResult result =
            pdedpc::train_policy(op, config->cfg, corpus.get(), epochs, seed);
        pdedpc::save_policy_checkpoint(checkpoint_out, result.model);
        if (curve_csv_out != nullptr) write_policy_curve(curve_csv_out, result.curve);
        if (out_final_loss != nullptr)
            *out_final_loss = result.curve.empty() ? 0.0 : result.curve.back().loss;
    });
}

pdedpc_status pdedpc_evaluate(const pdedpc_config* config, const char* operator_checkpoint,
                              const char* policy_checkpoint, const char* dataset_dir,
                              int n_eval, uint64_t seed, int threads, const char* out_dir,
                              int force, pdedpc_report** out_report) {
    return guarded([&] {
        if (config == nullptr || operator_checkpoint == nullptr ||
            policy_checkpoint == nullptr || out_dir == nullptr)
            throw ConfigError("pdedpc_evaluate: null argument");
        if (n_eval < 1) throw ConfigError("pdedpc_evaluate: n_eval must be >= 1");
        const pdedpc::OperatorModel op =
            pdedpc::load_operator_checkpoint(operator_checkpoint);
        check_hash("operator checkpoint '" + std::string(operator_checkpoint) + "'",
                   op.config_hash, config->hash, force != 0);
        const pdedpc::PolicyModel policy = pdedpc::load_policy_checkpoint(policy_checkpoint);
        check_hash("policy checkpoint '" + std::string(policy_checkpoint) + "'",
                   policy.config_hash, config->hash, force != 0);
        std::unique_ptr<pdedpc::DatasetReader> corpus;
        if (config->cfg.policy.target_source == pdedpc::TargetSource::DatasetTerminal) {
            if (dataset_dir == nullptr)
                throw ConfigError("this experiment draws targets from the training corpus; a "
                                  "dataset directory is required");
            corpus = std::make_unique<pdedpc::DatasetReader>(dataset_dir);
            check_hash("dataset '" + std::string(dataset_dir) + "'",
                       corpus->manifest().config_hash, config->hash, force != 0);
        }
        pdedpc::EvalReport report =
            pdedpc::build_comparison(policy, op, config->cfg, corpus.get(), n_eval, seed,
                                     out_dir, threads < 1 ? 1 : threads);
        const bool passed = report.acceptance.passed;
        const double ratio = report.acceptance.objective_ratio;
        const double gap = report.acceptance.transfer_gap;
        if (out_report != nullptr) *out_report = new pdedpc_report{std::move(report)};
        if (!passed) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "acceptance gate failed: objective_ratio=%.6g (max %.6g), "
                          "transfer_gap=%.6g (max %.6g)",
                          ratio, config->cfg.eval.max_objective_ratio, gap,
                          config->cfg.eval.max_transfer_gap);
            throw AcceptanceError(buf);
        }
    });
}

int pdedpc_report_n_scenarios(const pdedpc_report* report) {
    return static_cast<int>(report->report.scenarios.size());
}

int pdedpc_report_n_complete(const pdedpc_report* report) { return report->report.n_complete; }

double pdedpc_report_stat(const pdedpc_report* report, int column, int stat) {
    const pdedpc::ColumnStats* col = nullptr;
    switch (column) {
        case 0: col = &report->report.natural_fdm; break;
        case 1: col = &report->report.ctrl_tidon; break;
        case 2: col = &report->report.ctrl_fdm; break;
        default: return std::nan("");
    }
    switch (stat) {
        case 0: return col->mean;
        case 1: return col->stddev;
        case 2: return col->median;
        default: return std::nan("");
    }
}

double pdedpc_report_objective_ratio(const pdedpc_report* report) {
    return report->report.acceptance.objective_ratio;
}

double pdedpc_report_transfer_gap(const pdedpc_report* report) {
    return report->report.acceptance.transfer_gap;
}

int pdedpc_report_acceptance_passed(const pdedpc_report* report) {
    return report->report.acceptance.passed ? 1 : 0;
}

void pdedpc_report_free(pdedpc_report* report) { delete report; }

pdedpc_status pdedpc_inspect(const char* path, char* buffer, size_t buffer_len,
                             size_t* out_needed) {
    return guarded([&] {
        if (path == nullptr) throw ConfigError("pdedpc_inspect: null path");
        std::string text;
        const fs::path p(path);
        if (fs::is_directory(p)) {
            fs::path meta = p / "manifest.json";
            if (!fs::exists(meta)) meta = p / "report_meta.json";
            if (!fs::exists(meta))
                throw std::runtime_error("'" + std::string(path) +
                                         "' has neither manifest.json nor report_meta.json");
            std::ifstream in(meta);
            text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        } else if (pdedpc::is_checkpoint_file(path)) {
            auto [header, blob] = pdedpc::load_checkpoint(path);
            header["blob_doubles"] = blob.size();
            text = header.dump(2) + "\n";
        } else {
            throw std::runtime_error("'" + std::string(path) +
                                     "' is not a dataset, checkpoint or report");
        }
        const size_t needed = text.size() + 1;
        if (out_needed != nullptr) *out_needed = needed;
        if (buffer == nullptr) {
            if (out_needed == nullptr)
                throw std::runtime_error("pdedpc_inspect: need a buffer or out_needed");
            return;
        }
        if (buffer_len < needed)
            throw std::runtime_error("pdedpc_inspect: buffer too small (need " +
                                     std::to_string(needed) + " bytes)");
        std::memcpy(buffer, text.c_str(), needed);
    });
}

}  // extern "C"
