/* C interface to the poisoning-robustness certification toolkit.
 *
 * All entry points are thread-safe and never throw across the boundary.
 * Functions that produce output allocate an opaque pcert_result; callers
 * must release it with pcert_result_free. On failure the result (when one
 * is returned) carries a diagnostic message.
 */
#ifndef PCERT_H
#define PCERT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct pcert_result pcert_result;

typedef enum pcert_status {
  PCERT_OK = 0,
  PCERT_E_RUNTIME = 1,         /* internal or unexpected failure */
  PCERT_E_CONFIG = 2,          /* bad configuration or invocation */
  PCERT_E_NOT_CERTIFIABLE = 3, /* pipeline ran; no certificate possible */
  PCERT_E_MISSING_INPUT = 4,   /* required input file or run missing */
} pcert_status;

const char* pcert_version(void);

/* Clean-baseline run; writes baseline.json into out_dir. */
pcert_status pcert_baseline(const char* config_text, const char* out_dir,
                            int force, int jobs, pcert_result** out);

/* Trajectory corpus generation; writes trajectories.csv, params.bin and
 * generate.json into out_dir. */
pcert_status pcert_generate(const char* config_text, const char* out_dir,
                            int force, int jobs, pcert_result** out);

/* Full certification; writes certificate.json plus supporting artifacts.
 * mode_override may be NULL, "train", or "test". Returns
 * PCERT_E_NOT_CERTIFIABLE when the pipeline completes without a
 * certificate. */
pcert_status pcert_certify(const char* config_text, const char* out_dir,
                           int force, int jobs, int strict_scenarios,
                           const char* mode_override, pcert_result** out);

/* Threshold sweep over one trajectory corpus; writes certificates.json and
 * curve.csv. */
pcert_status pcert_sweep(const char* config_text, const char* out_dir,
                         int force, int jobs, int strict_scenarios,
                         const char* mode_override, pcert_result** out);

/* Derives plot-ready CSVs from a finished certify/sweep directory. */
pcert_status pcert_plot_data(const char* cert_dir, pcert_result** out);

/* Main JSON document of the run (certificate, baseline, ...); empty string
 * when the run produced none. */
const char* pcert_result_json(const pcert_result* result);

/* Human-readable diagnostic; empty string on success. */
const char* pcert_result_message(const pcert_result* result);

void pcert_result_free(pcert_result* result);

/* Scenario-count bound: smallest N with (1-epsilon)^N <= beta. */
pcert_status pcert_required_scenarios(double epsilon, double beta,
                                      long long* out_n);

/* Smallest violation probability certified by n_hat scenarios at
 * confidence 1-beta. */
pcert_status pcert_achieved_epsilon(long long n_hat, double beta,
                                    double* out_epsilon);

#ifdef __cplusplus
}
#endif

#endif /* PCERT_H */
