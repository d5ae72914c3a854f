#ifndef SWAPNET_H
#define SWAPNET_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Charger count meaning "one charger per battery".
 */
#define SWAPNET_UNLIMITED UINT64_MAX

typedef enum SwapnetRegime {
  SWAPNET_REGIME_LIMITED_CHARGERS = 0,
  SWAPNET_REGIME_UNLIMITED_CHARGERS = 1,
  SWAPNET_REGIME_SWAP_UNCONSTRAINED = 2,
} SwapnetRegime;

typedef enum SwapnetStatus {
  SWAPNET_STATUS_OK = 0,
  SWAPNET_STATUS_NULL_POINTER = 1,
  SWAPNET_STATUS_INVALID_ARGUMENT = 2,
  SWAPNET_STATUS_INVALID_CONFIG = 3,
  SWAPNET_STATUS_NUMERICAL = 4,
  SWAPNET_STATUS_IO = 5,
  SWAPNET_STATUS_PANIC = 6,
} SwapnetStatus;

/**
 * Validated network.
 */
typedef struct SwapnetNetwork SwapnetNetwork;

/**
 * Sampled simulation path.
 */
typedef struct SwapnetSimPath SwapnetSimPath;

/**
 * Exact single-station stationary distribution.
 */
typedef struct SwapnetSteadyState SwapnetSteadyState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *swapnet_last_error(void);

/**
 * Parses a TOML network description.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum SwapnetStatus swapnet_network_from_toml(const char *toml, struct SwapnetNetwork **out);

/**
 * Single station with `b` spares and `f` chargers
 * (`SWAPNET_UNLIMITED` for one per battery).
 *
 * # Safety
 * `out` must be writable.
 */
enum SwapnetStatus swapnet_network_single(double lambda,
                                          double mu,
                                          uint64_t r,
                                          uint64_t b,
                                          uint64_t f,
                                          struct SwapnetNetwork **out);

/**
 * # Safety
 * `net` must be NULL or a handle from this library not yet freed.
 */
void swapnet_network_free(struct SwapnetNetwork *net);

/**
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum SwapnetStatus swapnet_network_stations(const struct SwapnetNetwork *net, size_t *out);

/**
 * Copies spares and chargers per station into arrays of length `len`.
 * Unlimited chargers are reported as `SWAPNET_UNLIMITED`.
 *
 * # Safety
 * `b_out` and `f_out` must each hold `len` elements.
 */
enum SwapnetStatus swapnet_network_capacities(const struct SwapnetNetwork *net,
                                              uint64_t *b_out,
                                              uint64_t *f_out,
                                              size_t len);

/**
 * Exact stationary queue-length distribution of one station.
 *
 * # Safety
 * `out` must be writable.
 */
enum SwapnetStatus swapnet_steady_state_new(uint64_t b,
                                            uint64_t f,
                                            uint64_t r,
                                            double lambda,
                                            double mu,
                                            struct SwapnetSteadyState **out);

/**
 * # Safety
 * `ss` must be NULL or a live handle.
 */
void swapnet_steady_state_free(struct SwapnetSteadyState *ss);

/**
 * # Safety
 * `ss` must be a live handle; `out` must be writable.
 */
enum SwapnetStatus swapnet_steady_state_len(const struct SwapnetSteadyState *ss, size_t *out);

/**
 * Copies `π_0..π_{len-1}`; `len` must equal the distribution length.
 *
 * # Safety
 * `buf` must hold `len` elements.
 */
enum SwapnetStatus swapnet_steady_state_probs(const struct SwapnetSteadyState *ss,
                                              double *buf,
                                              size_t len);

/**
 * Stationary probability of no charged spare, given `b` spares.
 *
 * # Safety
 * `ss` must be a live handle; `out` must be writable.
 */
enum SwapnetStatus swapnet_steady_state_wait_probability(const struct SwapnetSteadyState *ss,
                                                         uint64_t b,
                                                         double *out);

/**
 * Limiting probability of waiting in the QED regime.
 *
 * # Safety
 * `out` must be writable.
 */
enum SwapnetStatus swapnet_wait_probability_limit(double lambda,
                                                  double mu,
                                                  double beta,
                                                  double gamma,
                                                  enum SwapnetRegime regime,
                                                  double *out);

/**
 * Limiting diffusion density at `x`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SwapnetStatus swapnet_diffusion_density(double lambda,
                                             double mu,
                                             double beta,
                                             double gamma,
                                             enum SwapnetRegime regime,
                                             double x,
                                             double *out);

/**
 * Runs the exponential CTMC from `q0` (one entry per station).
 *
 * # Safety
 * `net` must be a live handle, `q0` must hold `len` elements and `out`
 * must be writable.
 */
enum SwapnetStatus swapnet_simulate_ctmc(const struct SwapnetNetwork *net,
                                         const uint64_t *q0,
                                         size_t len,
                                         double horizon,
                                         double sample_dt,
                                         uint64_t seed,
                                         uint64_t stream,
                                         struct SwapnetSimPath **out);

/**
 * # Safety
 * `path` must be NULL or a live handle.
 */
void swapnet_sim_path_free(struct SwapnetSimPath *path);

/**
 * Number of samples and stations of a path.
 *
 * # Safety
 * `path` must be a live handle; outputs must be writable.
 */
enum SwapnetStatus swapnet_sim_path_shape(const struct SwapnetSimPath *path,
                                          size_t *samples,
                                          size_t *stations);

/**
 * Copies sample times (`samples` entries) and queue lengths (row-major,
 * `samples * stations` entries).
 *
 * # Safety
 * Buffers must have the sizes reported by `swapnet_sim_path_shape`.
 */
enum SwapnetStatus swapnet_sim_path_copy(const struct SwapnetSimPath *path,
                                         double *times,
                                         uint64_t *queues,
                                         size_t samples,
                                         size_t stations);

/**
 * Fraction of arrivals that waited, and invariant violations seen.
 *
 * # Safety
 * `path` must be a live handle; outputs must be writable.
 */
enum SwapnetStatus swapnet_sim_path_stats(const struct SwapnetSimPath *path,
                                          double *waited_fraction,
                                          uint64_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWAPNET_H */
