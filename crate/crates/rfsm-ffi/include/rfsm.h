#ifndef RFSM_H
#define RFSM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfsmStatus {
  RFSM_STATUS_OK = 0,
  RFSM_STATUS_NULL_POINTER = 1,
  RFSM_STATUS_INVALID_ARGUMENT = 2,
  RFSM_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Point outside its domain, degenerate disorder, paramagnetic direction, ...
   */
  RFSM_STATUS_DOMAIN = 4,
  RFSM_STATUS_NO_CONVERGENCE = 5,
  RFSM_STATUS_IO = 6,
  RFSM_STATUS_FORMAT = 7,
  /**
   * An experiment stage failed; the run directory holds partial results.
   */
  RFSM_STATUS_STAGE_FAILED = 8,
  /**
   * A string did not fit; the required size (with NUL) was written to `len`.
   */
  RFSM_STATUS_BUFFER_TOO_SMALL = 9,
  RFSM_STATUS_PANIC = 10,
} RfsmStatus;

typedef enum RfsmScaling {
  RFSM_SCALING_UNIT = 0,
  RFSM_SCALING_INVERSE_SQRT_VOLUME = 1,
} RfsmScaling;

/**
 * An experiment configuration.
 */
typedef struct RfsmConfig RfsmConfig;

/**
 * A finished (or failed) run, together with its output directory.
 */
typedef struct RfsmManifest RfsmManifest;

/**
 * An equal-area partition of S¹ or S².
 */
typedef struct RfsmPartition RfsmPartition;

/**
 * Numeric part of one acceptance record.
 */
typedef struct RfsmRecord {
  double value;
  double comparator;
  double tolerance;
  bool pass;
} RfsmRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *rfsm_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on this thread.
 */
const char *rfsm_last_error(void);

/**
 * Default configuration of experiment `kind` (e.g. "partition_check").
 *
 * # Safety
 * `kind` must be a NUL-terminated string; `out` must be writable.
 */
enum RfsmStatus rfsm_config_preset(const char *kind, uint64_t seed, struct RfsmConfig **out);

/**
 * Preset overlaid by the TOML file at `path` (may be NULL), then by `seed`
 * and `out_dir` (may be NULL), exactly as the command line does.
 *
 * # Safety
 * String arguments must be NUL-terminated or NULL where allowed; `out` must be writable.
 */
enum RfsmStatus rfsm_config_load(const char *kind,
                                 const char *path,
                                 uint64_t seed,
                                 const char *out_dir,
                                 struct RfsmConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle; `dir` a NUL-terminated string.
 */
enum RfsmStatus rfsm_config_set_out(struct RfsmConfig *cfg, const char *dir);

/**
 * `workers = 0` means the global thread pool.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum RfsmStatus rfsm_config_set_workers(struct RfsmConfig *cfg, size_t workers);

/**
 * Checks the configuration without running it.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum RfsmStatus rfsm_config_validate(const struct RfsmConfig *cfg);

/**
 * The configuration as JSON.
 *
 * # Safety
 * `cfg` must be a live handle; `buf` must hold `cap` bytes; `len` may be NULL.
 */
enum RfsmStatus rfsm_config_to_json(const struct RfsmConfig *cfg,
                                    char *buf,
                                    size_t cap,
                                    size_t *len);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void rfsm_config_free(struct RfsmConfig *cfg);

/**
 * Runs the experiment, writing results under the configured directory.
 *
 * If a stage fails the return value is `RFSM_STATUS_STAGE_FAILED`, and
 * `*out` still receives the manifest of the partial run when one was written
 * (otherwise NULL).
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum RfsmStatus rfsm_run(const struct RfsmConfig *cfg, struct RfsmManifest **out);

/**
 * Loads `manifest.json` (or the run directory containing it).
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum RfsmStatus rfsm_manifest_load(const char *path, struct RfsmManifest **out);

/**
 * # Safety
 * `m` must be a live handle; `out` writable.
 */
enum RfsmStatus rfsm_manifest_record_count(const struct RfsmManifest *m, size_t *out);

/**
 * # Safety
 * `m` must be a live handle; `out` writable.
 */
enum RfsmStatus rfsm_manifest_record(const struct RfsmManifest *m,
                                     size_t index,
                                     struct RfsmRecord *out);

/**
 * Name of record `index`.
 *
 * # Safety
 * `m` must be a live handle; `buf` must hold `cap` bytes; `len` may be NULL.
 */
enum RfsmStatus rfsm_manifest_record_metric(const struct RfsmManifest *m,
                                            size_t index,
                                            char *buf,
                                            size_t cap,
                                            size_t *len);

/**
 * Re-judges the records and re-hashes the result files; `*passed` is true
 * only if every check passes and nothing is missing or altered.
 *
 * # Safety
 * `m` must be a live handle; `passed` writable.
 */
enum RfsmStatus rfsm_manifest_verify(const struct RfsmManifest *m, bool *passed);

/**
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void rfsm_manifest_free(struct RfsmManifest *m);

/**
 * Equal-area partition of S^sphere_dim (1 or 2) into `n` cells.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfsmStatus rfsm_partition_new(size_t sphere_dim, size_t n, struct RfsmPartition **out);

/**
 * # Safety
 * `p` must be a live handle; `out` writable.
 */
enum RfsmStatus rfsm_partition_len(const struct RfsmPartition *p, size_t *out);

/**
 * Index of the cell containing the unit vector `point` (`len` = sphere_dim + 1).
 *
 * # Safety
 * `p` must be a live handle; `point` must hold `len` doubles; `out` writable.
 */
enum RfsmStatus rfsm_partition_locate(const struct RfsmPartition *p,
                                      const double *point,
                                      size_t len,
                                      size_t *out);

/**
 * # Safety
 * `p` must be a live handle; `out` writable.
 */
enum RfsmStatus rfsm_partition_cell_area(const struct RfsmPartition *p, size_t k, double *out);

/**
 * # Safety
 * `p` must be NULL or a handle not yet freed.
 */
void rfsm_partition_free(struct RfsmPartition *p);

/**
 * Closed-form critical constants for field second moments `second_moments[0..d]`.
 * Writes r* and y* (d doubles); `*ferromagnetic` tells which regime applies.
 *
 * # Safety
 * `second_moments` and `y_star` must hold `d` doubles; outputs writable.
 */
enum RfsmStatus rfsm_classify_regime(size_t d,
                                     double beta,
                                     enum RfsmScaling scaling,
                                     const double *second_moments,
                                     double *r_star,
                                     double *y_star,
                                     bool *ferromagnetic);

/**
 * Density on S^{d−1} of the direction of a centred Gaussian with covariance
 * `cov` (d×d, row-major), evaluated at the unit vector `omega`.
 *
 * # Safety
 * `cov` must hold d² doubles, `omega` d doubles; `out` writable.
 */
enum RfsmStatus rfsm_aw_density(size_t d, const double *cov, const double *omega, double *out);

/**
 * Mean resultant length A_d(κ) of the tilted sphere law.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfsmStatus rfsm_mean_resultant_length(size_t d, double kappa, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFSM_H */
