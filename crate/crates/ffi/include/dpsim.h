/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DPSIM_H
#define DPSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum DpsimStatus {
  DPSIM_STATUS_OK = 0,
  DPSIM_STATUS_NULL_POINTER = 1,
  DPSIM_STATUS_INVALID_ARGUMENT = 2,
  DPSIM_STATUS_CONFIG_ERROR = 3,
  DPSIM_STATUS_RUN_ERROR = 4,
  DPSIM_STATUS_PANIC = 5,
} DpsimStatus;

/*
 A sampled market with its own random stream.
 */
typedef struct DpsimMarket DpsimMarket;

/*
 A validated tournament configuration.
 */
typedef struct DpsimTournament DpsimTournament;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *dpsim_version(void);

/*
 Message of the last failed call on this thread, or null.

 The pointer stays valid until the next failing call on the same thread.
 */
const char *dpsim_last_error(void);

/*
 Release a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed already.
 */
void dpsim_string_free(char *s);

/*
 Principal branch of the Lambert W function for `x >= 0`.

 # Safety
 `out` must be valid for one write.
 */
enum DpsimStatus dpsim_lambert_w(double x, double *out);

/*
 Final scores of one simulation from raw revenues.

 `oligopoly` holds `m` revenues, `duopoly` an `m x m` row-major matrix
 where entry `(j, k)` is slot `j`'s revenue against `k`. `out_final`
 receives `m` scores.

 # Safety
 Pointers must be valid for the stated lengths.
 */
enum DpsimStatus dpsim_score_simulation(size_t m,
                                        const double *oligopoly,
                                        const double *duopoly,
                                        double *out_final);

/*
 Sample market parameters for `competitors` sellers from `seed`.

 # Safety
 `out` must be valid for one write.
 */
enum DpsimStatus dpsim_market_new(size_t competitors, uint64_t seed, struct DpsimMarket **out);

/*
 # Safety
 `market` must come from [`dpsim_market_new`] and not be used afterwards.
 */
void dpsim_market_free(struct DpsimMarket *market);

/*
 Market parameters as a JSON object; free with [`dpsim_string_free`].

 # Safety
 `market` must be a live handle and `out` valid for one write.
 */
enum DpsimStatus dpsim_market_params_json(const struct DpsimMarket *market, char **out);

/*
 Realise one period of demand at `prices`.

 `n` must be 2 or the market's competitor count. `out_sales` and
 `out_revenue` receive `n` values each.

 # Safety
 Pointers must be valid for `n` elements and `market` a live handle.
 */
enum DpsimStatus dpsim_market_realize(struct DpsimMarket *market,
                                      const double *prices,
                                      size_t n,
                                      uint32_t *out_sales,
                                      double *out_revenue);

/*
 Parse a TOML run configuration.

 # Safety
 `toml` must be a NUL-terminated string and `out` valid for one write.
 */
enum DpsimStatus dpsim_tournament_from_toml(const char *toml, struct DpsimTournament **out);

/*
 # Safety
 `t` must come from [`dpsim_tournament_from_toml`] and not be used afterwards.
 */
void dpsim_tournament_free(struct DpsimTournament *t);

/*
 Number of roster slots, or 0 for a null handle.

 # Safety
 `t` must be null or a live handle.
 */
size_t dpsim_tournament_roster_len(const struct DpsimTournament *t);

/*
 Run the tournament in memory and write each slot's mean final score.

 `len` must equal the roster length.

 # Safety
 `t` must be a live handle and `out_scores` valid for `len` writes.
 */
enum DpsimStatus dpsim_tournament_run(const struct DpsimTournament *t,
                                      double *out_scores,
                                      size_t len);

/*
 Run the tournament writing traces, manifest and report under `out_dir`.

 # Safety
 `t` must be a live handle and `out_dir` a NUL-terminated path.
 */
enum DpsimStatus dpsim_tournament_execute(const struct DpsimTournament *t, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPSIM_H */
