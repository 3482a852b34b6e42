#ifndef CHARGESHARE_H
#define CHARGESHARE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_INVALID_ARGUMENT = 3,
  CS_STATUS_PARSE = 4,
  CS_STATUS_INVALID_PARAM = 5,
  CS_STATUS_INVARIANT = 6,
  CS_STATUS_DOMAIN = 7,
  CS_STATUS_UNSTABLE = 8,
  CS_STATUS_NUMERICAL = 9,
  CS_STATUS_SIMULATION = 10,
  CS_STATUS_IO = 11,
  CS_STATUS_PANIC = 12,
} CsStatus;

// Values accepted by `kind` arguments.
typedef enum CsStationKind {
  CS_STATION_KIND_EV = 0,
  CS_STATION_KIND_DEDICATED = 1,
} CsStationKind;

// Values accepted by `policy` arguments.
typedef enum CsServingPolicy {
  CS_SERVING_POLICY_FIFS = 0,
  CS_SERVING_POLICY_EV_FIRST = 1,
} CsServingPolicy;

// Values accepted by `association` arguments.
typedef enum CsAssociation {
  CS_ASSOCIATION_NO_SHARING = 0,
  CS_ASSOCIATION_BIASED = 1,
  CS_ASSOCIATION_THINNING = 2,
} CsAssociation;

// Values accepted by `path` arguments.
typedef enum CsCoveragePath {
  CS_COVERAGE_PATH_EXACT = 0,
  CS_COVERAGE_PATH_APPROX = 1,
} CsCoveragePath;

// Opaque parameter set.
typedef struct CsParams CsParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version string. Static; do not free.
const char *cs_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next library call on the same thread.
const char *cs_last_error(void);

// New parameter set holding the defaults. Never NULL.
struct CsParams *cs_params_default(void);

// Parses `key = value` config text on top of the defaults.
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be writable.
enum CsStatus cs_params_from_config(const char *config, struct CsParams **out);

// Copy of `p`, or NULL if `p` is NULL.
//
// # Safety
// `p` must be NULL or a live handle.
struct CsParams *cs_params_clone(const struct CsParams *p);

// Releases a handle. NULL is ignored.
//
// # Safety
// `p` must be NULL or a live handle not used afterwards.
void cs_params_free(struct CsParams *p);

// Sets one parameter by config key, re-validating the whole set. On
// failure `p` is unchanged.
//
// # Safety
// `p` must be a live handle; `key` and `value` NUL-terminated strings.
enum CsStatus cs_params_set(struct CsParams *p, const char *key, const char *value);

// Serializes every parameter as config text into `*out`.
//
// # Safety
// `p` must be a live handle; `out` writable. Free the string with
// `cs_string_free`.
enum CsStatus cs_params_to_config(const struct CsParams *p, char **out);

// Share of UAVs associating with EV stations under distance bias `beta_d`.
//
// # Safety
// `p` must be a live handle; `out` writable.
enum CsStatus cs_association_ev(const struct CsParams *p, double beta_d, double *out);

// UAV availability `P_a` under a decision. `beta` is ignored for
// `CS_ASSOCIATION_NO_SHARING`; `delta_lambda_c_d` is in stations per m².
//
// # Safety
// `p` must be a live handle; `out` writable.
enum CsStatus cs_availability(const struct CsParams *p,
                              int32_t association,
                              double beta,
                              double delta_lambda_c_d,
                              double *out);

// Coverage probability of a typical user for availability `p_a`.
//
// # Safety
// `p` must be a live handle; `out` writable.
enum CsStatus cs_coverage(const struct CsParams *p, double p_a, int32_t path, double *out);

// Mean UAV wait (min) at a station of kind `kind` shared by `n_uavs`.
//
// # Safety
// `p` must be a live handle; `out` writable.
enum CsStatus cs_uav_wait(const struct CsParams *p, int32_t kind, uint32_t n_uavs, double *out);

// Mean EV wait (min) at an EV station shared by `n_uavs`, with the
// Pollaczek-Khinchine no-UAV baseline.
//
// # Safety
// `p` must be a live handle; `out` writable.
enum CsStatus cs_ev_wait(const struct CsParams *p, uint32_t n_uavs, int32_t policy, double *out);

// Yearly sharing fee (USD) per EV station.
//
// # Safety
// `p` must be a live handle; `out` writable.
enum CsStatus cs_sharing_fee(const struct CsParams *p,
                             double mean_uavs,
                             double mean_cycle_min,
                             double *out);

// Runs a named sweep (`fig-wait-uav`, `fig-wait-ev`, `fig-coverage`,
// `fig-beta`, `fig-economics`) and returns its CSV in `*out_csv`.
// `realizations` and `draws` of 0 select the defaults; `association` picks
// the `fig-beta` policy (biased or thinning).
//
// # Safety
// `p` must be a live handle; `name` NUL-terminated; `out_csv` writable.
// Free the string with `cs_string_free`.
enum CsStatus cs_run_experiment(const struct CsParams *p,
                                const char *name,
                                uint64_t seed,
                                uintptr_t realizations,
                                uintptr_t draws,
                                int32_t association,
                                char **out_csv);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a string from this library not freed before.
void cs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHARGESHARE_H */
