/* C interface to the tuning workbench: experiment execution, summary
 * aggregation and trace export behind opaque handles. All functions return a
 * status code; on any non-OK status cbft_last_error() holds a thread-local
 * human-readable message. */
#ifndef CBFTUNE_H
#define CBFTUNE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cbft_status {
  CBFT_OK = 0,
  CBFT_ERROR_CONFIG = 2,            /* bad config file, schema or key */
  CBFT_ERROR_RUNTIME = 3,           /* internal failure during execution */
  CBFT_ERROR_NO_FEASIBLE_START = 4, /* initialization found no feasible point */
  CBFT_ERROR_INVALID_ARGUMENT = 5,  /* bad pointer or out-of-domain argument */
  CBFT_ERROR_NOT_FOUND = 6          /* missing record entry or trace */
} cbft_status;

/* Opaque experiment handle: a parsed, validated configuration plus any
 * command-line overrides applied before the run. */
typedef struct cbft_experiment cbft_experiment;

/* Parses and validates the JSON config at config_path. On success stores a
 * new handle in *out (release with cbft_experiment_close). */
cbft_status cbft_experiment_open(const char* config_path,
                                 cbft_experiment** out);

/* Override individual config fields before running. */
cbft_status cbft_experiment_override_output_dir(cbft_experiment* exp,
                                                const char* dir);
cbft_status cbft_experiment_override_repeats(cbft_experiment* exp,
                                             int repeats);
cbft_status cbft_experiment_override_seed(cbft_experiment* exp,
                                          uint64_t base_seed);

/* Executes all repetitions (worker count from CBFTUNE_WORKERS, default 1)
 * and writes one record JSON per repetition plus a manifest into the output
 * directory. Per-repetition failures do not abort the experiment; the counts
 * are reported through the optional out-parameters (any may be NULL):
 * completed + failed equals the configured repeats, and no_feasible_start
 * counts the subset of failures whose initialization had no feasible point. */
cbft_status cbft_experiment_run(cbft_experiment* exp, int* completed,
                                int* failed, int* no_feasible_start);

void cbft_experiment_close(cbft_experiment* exp);

/* Aggregates the record files found under num_dirs directories into a JSON
 * summary at out_path plus one best-feasible curve CSV per algorithm. */
cbft_status cbft_summarize(const char* const* dirs, size_t num_dirs,
                           const char* out_path);

/* Re-simulates the episode behind one record entry and writes its trajectory
 * CSV. */
cbft_status cbft_export_trace(const char* record_path, int entry_index,
                              const char* out_csv);

/* Message for the most recent non-OK status on this thread; never NULL. */
const char* cbft_last_error(void);

const char* cbft_version(void);

#ifdef __cplusplus
}
#endif

#endif /* CBFTUNE_H */
