#ifndef RFSD_H
#define RFSD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfsdStatus {
  RFSD_STATUS_OK = 0,
  RFSD_STATUS_NULL_POINTER = 1,
  RFSD_STATUS_INVALID_ARGUMENT = 2,
  RFSD_STATUS_DIMENSION_MISMATCH = 3,
  RFSD_STATUS_EMPTY_INPUT = 4,
  RFSD_STATUS_UNSUPPORTED = 5,
  RFSD_STATUS_NUMERICAL = 6,
  RFSD_STATUS_PARSE = 7,
  RFSD_STATUS_IO = 8,
  RFSD_STATUS_PANIC = 9,
} RfsdStatus;

typedef enum RfsdFamily {
  RFSD_FAMILY_L1_IMQ = 0,
  RFSD_FAMILY_L2_SECHEXP = 1,
} RfsdFamily;

/**
 * Estimator configuration.
 */
typedef struct RfsdConfig RfsdConfig;

/**
 * A target distribution.
 */
typedef struct RfsdModel RfsdModel;

/**
 * A sample of `n` points in `dim` dimensions.
 */
typedef struct RfsdSample RfsdSample;

typedef struct RfsdGofResult {
  double statistic;
  double threshold;
  double p_value;
  /**
   * 1 when the null is rejected.
   */
  int32_t reject;
} RfsdGofResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *rfsd_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *rfsd_version(void);

/**
 * Copies `n * dim` row-major values into a new sample.
 *
 * # Safety
 * `data` must point to `n * dim` readable doubles; `out` must be writable.
 */
enum RfsdStatus rfsd_sample_new(const double *data, size_t n, size_t dim, struct RfsdSample **out);

/**
 * Reads a sample CSV file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum RfsdStatus rfsd_sample_from_csv(const char *path, struct RfsdSample **out);

/**
 * # Safety
 * `s` must be null or a handle from this library.
 */
size_t rfsd_sample_len(const struct RfsdSample *s);

/**
 * # Safety
 * `s` must be null or a handle from this library.
 */
size_t rfsd_sample_dim(const struct RfsdSample *s);

/**
 * # Safety
 * `s` must be null or a handle from this library, not used afterwards.
 */
void rfsd_sample_free(struct RfsdSample *s);

/**
 * Standard Gaussian target in `dim` dimensions.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfsdStatus rfsd_model_gaussian(size_t dim, struct RfsdModel **out);

/**
 * Model from a JSON document `{"kind": ..., "params": {...}}`.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum RfsdStatus rfsd_model_from_json(const char *json, struct RfsdModel **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not used afterwards.
 */
void rfsd_model_free(struct RfsdModel *m);

/**
 * Default configuration of `family` for `sample`, with `m` importance
 * draws (0 keeps the default).
 *
 * # Safety
 * `sample` must be a valid handle; `out` must be writable.
 */
enum RfsdStatus rfsd_config_default(const struct RfsdSample *sample,
                                    enum RfsdFamily family,
                                    double gamma,
                                    size_t m,
                                    uint64_t seed,
                                    struct RfsdConfig **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum RfsdStatus rfsd_config_from_json(const char *json, struct RfsdConfig **out);

/**
 * Serializes the configuration; release the string with `rfsd_string_free`.
 *
 * # Safety
 * `cfg` must be a valid handle; `out` must be writable.
 */
enum RfsdStatus rfsd_config_to_json(const struct RfsdConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, not used afterwards.
 */
void rfsd_config_free(struct RfsdConfig *cfg);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void rfsd_string_free(char *s);

/**
 * Estimates the discrepancy. `per_dim`, when not null, receives the
 * squared per-dimension terms, which sum to `value²`.
 *
 * # Safety
 * Handles must be valid; `value` must be writable; `per_dim` must be null
 * or hold `rfsd_sample_dim(sample)` doubles.
 */
enum RfsdStatus rfsd_rphisd(const struct RfsdSample *sample,
                            const struct RfsdModel *model,
                            const struct RfsdConfig *cfg,
                            double *value,
                            double *per_dim);

/**
 * Squared kernel Stein discrepancy with the IMQ kernel `(c² + r²)^beta`.
 *
 * # Safety
 * Handles must be valid; `out` must be writable.
 */
enum RfsdStatus rfsd_ksd_squared_imq(const struct RfsdSample *sample,
                                     const struct RfsdModel *model,
                                     double c,
                                     double beta,
                                     double *out);

/**
 * Goodness-of-fit test at level `alpha` with `n_sims` null simulations.
 *
 * # Safety
 * Handles must be valid; `out` must be writable.
 */
enum RfsdStatus rfsd_gof_test(const struct RfsdSample *sample,
                              const struct RfsdModel *model,
                              const struct RfsdConfig *cfg,
                              double alpha,
                              size_t n_sims,
                              struct RfsdGofResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFSD_H */
