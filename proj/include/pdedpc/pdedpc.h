/*
 * pdedpc — differentiable predictive control for 1-D PDEs.
 *
 * C API over the C++ core: opaque handles, status codes, and a thread-local
 * error message. All heavy work (dataset generation, TI-DeepONet training,
 * DPC policy training, closed-loop evaluation) is driven through this
 * surface; the bundled CLI is a thin client of it.
 */
#ifndef PDEDPC_H
#define PDEDPC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pdedpc_status {
    PDEDPC_OK = 0,
    PDEDPC_ERR_RUNTIME = 1,           /* solver/training/filesystem failure */
    PDEDPC_ERR_CONFIG = 2,            /* unusable config or arguments */
    PDEDPC_ERR_ARTIFACT_MISMATCH = 3, /* artifacts from different experiments */
    PDEDPC_ERR_ACCEPTANCE = 4         /* evaluation gate thresholds missed */
} pdedpc_status;

typedef enum pdedpc_stage {
    PDEDPC_STAGE_DATASET = 0,
    PDEDPC_STAGE_OPERATOR = 1,
    PDEDPC_STAGE_POLICY = 2,
    PDEDPC_STAGE_EVALUATION = 3
} pdedpc_stage;

typedef struct pdedpc_config pdedpc_config;
typedef struct pdedpc_report pdedpc_report;

const char* pdedpc_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
const char* pdedpc_last_error(void);

/* ---- experiment configs ---- */

pdedpc_status pdedpc_config_load(const char* path, pdedpc_config** out_config);
void pdedpc_config_free(pdedpc_config* config);

const char* pdedpc_config_name(const pdedpc_config* config);
const char* pdedpc_config_hash(const pdedpc_config* config);
const char* pdedpc_config_output_dir(const pdedpc_config* config);
uint64_t pdedpc_config_seed(const pdedpc_config* config, pdedpc_stage stage);
int pdedpc_config_default_samples(const pdedpc_config* config);
/* stage must be PDEDPC_STAGE_OPERATOR or PDEDPC_STAGE_POLICY */
int pdedpc_config_default_epochs(const pdedpc_config* config, pdedpc_stage stage);
int pdedpc_config_default_n_eval(const pdedpc_config* config);

/* ---- pipeline stages ---- */

/* Rolls out n_samples ground-truth trajectories into out_dir (manifest.json +
 * traj_??????.bin). */
pdedpc_status pdedpc_generate(const pdedpc_config* config, int n_samples, uint64_t seed,
                              const char* out_dir, int threads);

/* Trains the TI-DeepONet surrogate on a generated dataset. Writes a
 * checkpoint and a per-epoch training-curve CSV; reports the held-out
 * full-horizon rollout error through out_test_rel_l2 (optional). */
pdedpc_status pdedpc_train_operator(const pdedpc_config* config, const char* dataset_dir,
                                    int epochs, uint64_t seed, const char* checkpoint_out,
                                    const char* curve_csv_out, double* out_test_rel_l2,
                                    int force);

/* Trains the DPC policy against a frozen operator checkpoint. dataset_dir may
 * be NULL unless the experiment draws its targets from the training corpus. */
pdedpc_status pdedpc_train_policy(const pdedpc_config* config, const char* operator_checkpoint,
                                  const char* dataset_dir, int epochs, uint64_t seed,
                                  const char* checkpoint_out, const char* curve_csv_out,
                                  double* out_final_loss, int force);

/* Closed-loop comparison (natural FDM / controlled TI-DON / controlled FDM)
 * over n_eval fresh scenarios. Writes report.csv, summary.csv,
 * summary_median.csv, report_meta.json and figures/ under out_dir. Returns
 * PDEDPC_ERR_ACCEPTANCE when the config's gate thresholds are missed; the
 * report files are written either way. out_report is optional. */
pdedpc_status pdedpc_evaluate(const pdedpc_config* config, const char* operator_checkpoint,
                              const char* policy_checkpoint, const char* dataset_dir,
                              int n_eval, uint64_t seed, int threads, const char* out_dir,
                              int force, pdedpc_report** out_report);

/* ---- evaluation reports ---- */

int pdedpc_report_n_scenarios(const pdedpc_report* report);
int pdedpc_report_n_complete(const pdedpc_report* report);
/* column: 0 natural FDM, 1 controlled TI-DON, 2 controlled FDM.
 * stat: 0 mean, 1 stddev, 2 median. Returns NaN for bad indices. */
double pdedpc_report_stat(const pdedpc_report* report, int column, int stat);
double pdedpc_report_objective_ratio(const pdedpc_report* report);
double pdedpc_report_transfer_gap(const pdedpc_report* report);
int pdedpc_report_acceptance_passed(const pdedpc_report* report);
void pdedpc_report_free(pdedpc_report* report);

/* ---- artifact inspection ---- */

/* Writes the metadata of a dataset directory, checkpoint file or evaluation
 * output directory into buffer as JSON text. out_needed (optional) receives
 * the required size including the terminator; the call fails with
 * PDEDPC_ERR_RUNTIME when the buffer is too small. */
pdedpc_status pdedpc_inspect(const char* path, char* buffer, size_t buffer_len,
                             size_t* out_needed);

#ifdef __cplusplus
}
#endif

#endif /* PDEDPC_H */
