/*
 * C API of the guided diffusion sampling engine. All engine state lives
 * behind opaque handles; every call returns a drf_status and leaves a
 * human-readable message in drf_last_error() on failure.
 *
 * Typical use:
 *
 *   drf_config* cfg = NULL;
 *   drf_config_create(&cfg);
 *   drf_config_load(cfg, "demo.toml");          // optional; TOML or JSON
 *   drf_config_set(cfg, "drf.N", "3");          // dotted-path overrides
 *   drf_status rc = drf_run_sample(cfg, "out");
 *   if (rc != DRF_OK) fprintf(stderr, "%s\n", drf_last_error());
 *   drf_config_destroy(cfg);
 */

#ifndef DRF_H
#define DRF_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum drf_status {
    DRF_OK             = 0,
    DRF_CHECK_FAILED   = 1, /* a validation suite ran and did not pass */
    DRF_CONFIG_ERROR   = 2,
    DRF_NUMERIC_ERROR  = 3,
    DRF_IO_ERROR       = 4,
    DRF_INTERNAL_ERROR = 5
} drf_status;

typedef struct drf_config drf_config; /* opaque */

/* Configuration handles start from built-in defaults. */
drf_status drf_config_create(drf_config** out);
void drf_config_destroy(drf_config* cfg);

/* Layers a TOML (or JSON, by extension) file over the current state. */
drf_status drf_config_load(drf_config* cfg, const char* path);

/* Dotted-path override, e.g. ("drf.N", "3") or ("task.palette_mean",
 * "[0.5, -0.2, 0.1]"). Applied after file parsing, before validation. */
drf_status drf_config_set(drf_config* cfg, const char* key, const char* value);

/* Stable digest of the resolved configuration (16 hex chars + NUL). */
drf_status drf_config_hash(const drf_config* cfg, char* buf, size_t buflen);

/* Resolved configuration as pretty-printed JSON. Returns the number of bytes
 * (excluding the NUL) through written; truncates if buflen is too small. */
drf_status drf_config_dump(const drf_config* cfg, char* buf, size_t buflen, size_t* written);

/* One controlled (+ optional feedback) sampling run; artifacts go to out_dir
 * (image, references, trace, metrics). */
drf_status drf_run_sample(const drf_config* cfg, const char* out_dir);

/* Full benchmark plan; writes results.csv, summary.json, per-run artifacts
 * and plots under out_dir. */
drf_status drf_run_bench(const drf_config* cfg, const char* out_dir);

/* Finite-difference gradient suite. DRF_OK when the maximum relative error
 * is under the configured tolerance, DRF_CHECK_FAILED otherwise; the error
 * is reported through max_rel_err when non-NULL. */
drf_status drf_run_gradcheck(const drf_config* cfg, double* max_rel_err);

/* Noise schedule dump as CSV (columns t, beta, alpha_bar). */
drf_status drf_dump_schedule(const drf_config* cfg, const char* csv_path);

/* Message for the most recent failure on this thread; empty string if none. */
const char* drf_last_error(void);

const char* drf_status_name(drf_status status);
const char* drf_version(void);

#ifdef __cplusplus
}
#endif

#endif /* DRF_H */
